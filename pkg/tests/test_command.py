from random import Random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcp.command import (
    Dictionary,
    PaymentCommand,
    correct_token,
    detect_trigger,
    levenshtein,
    normalize,
    parse_command,
)
from dcp.errors import (
    CommandError,
    CommandParseError,
    IncompleteCommandError,
    UnknownUseCaseError,
)

CORPUS = [
    ("Hey DashCam, pay for parking at space number 5208.", "parking", 5208),
    ("Hey DashCam, pay for order number 120.", "fast_food", 120),
    ("Hey DashCam, pay for toll.", "toll", None),
    ("Hey DashCam, pay for gas at pump six.", "fuel", 6),
]


class TestLevenshtein:
    def test_parking_parting(self):
        assert levenshtein("parking", "parting") == 1

    def test_identity(self):
        assert levenshtein("same", "same") == 0

    def test_empty_vs_abc(self):
        assert levenshtein("", "abc") == 3

    def test_against_recursive_oracle(self):
        # independent oracle: textbook recursive definition with memoization
        from functools import lru_cache

        def oracle(a, b):
            @lru_cache(maxsize=None)
            def d(i, j):
                if i == 0:
                    return j
                if j == 0:
                    return i
                return min(
                    d(i - 1, j) + 1,
                    d(i, j - 1) + 1,
                    d(i - 1, j - 1) + (a[i - 1] != b[j - 1]),
                )

            return d(len(a), len(b))

        rng = Random(4)
        alphabet = "abcdefgh"
        for _ in range(200):
            a = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 8)))
            b = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 8)))
            assert levenshtein(a, b) == oracle(a, b)

    @given(st.text(max_size=12), st.text(max_size=12))
    @settings(max_examples=200)
    def test_metric_properties(self, a, b):
        d = levenshtein(a, b)
        assert d == levenshtein(b, a)
        assert (d == 0) == (a == b)
        assert d <= max(len(a), len(b))


class TestCorrection:
    def test_parting_to_parking(self):
        assert correct_token("parting") == "parking"

    def test_exact_word_unchanged(self):
        assert correct_token("gas") == "gas"

    def test_far_word_unchanged(self):
        assert correct_token("xylophone") == "xylophone"

    def test_idempotent(self):
        for token in ("parting", "gas", "xylophone", "pqy", "numbr"):
            once = correct_token(token)
            assert correct_token(once) == once

    def test_tie_break_lexicographic(self):
        d = Dictionary(words=("bat", "cat"))
        # "aat" is distance 1 from both; "bat" < "cat"
        assert correct_token("aat", d) == "bat"

    def test_dictionary_file_roundtrip(self, tmp_path):
        d = Dictionary.default()
        path = tmp_path / "words.txt"
        d.save(str(path))
        loaded = Dictionary.load(str(path))
        assert loaded.words == d.words

    def test_dictionary_file_comments(self, tmp_path):
        path = tmp_path / "words.txt"
        path.write_text("# comment\npay\nfor # inline\n\nGAS\n")
        d = Dictionary.load(str(path))
        assert d.words == ("for", "gas", "pay")


class TestTrigger:
    def test_plain_trigger(self):
        t = detect_trigger("Hey DashCam, pay for toll.")
        assert t.triggered and t.remainder == "pay for toll"

    def test_split_and_corrupted(self):
        # "dash camp" joins to "dashcamp", distance 1 from "dashcam"
        t = detect_trigger("hey dash camp pay for toll")
        assert t.triggered and t.remainder == "pay for toll"

    def test_other_assistant_ignored(self):
        assert not detect_trigger("okay google pay for toll").triggered

    def test_empty(self):
        assert not detect_trigger("").triggered

    def test_corrupted_hey(self):
        assert detect_trigger("hye dashcam pay for toll").triggered


class TestParse:
    @pytest.mark.parametrize("sentence,use_case,slot", CORPUS)
    def test_corpus_sentences(self, sentence, use_case, slot):
        cmd = parse_command(sentence)
        assert cmd.use_case == use_case
        assert cmd.slot == slot

    def test_without_trigger(self):
        cmd = parse_command("pay for gas at pump six")
        assert (cmd.use_case, cmd.slot) == ("fuel", 6)

    def test_number_words(self):
        assert parse_command("pay for gas at pump ninety nine").slot == 99
        assert parse_command("pay for gas at pump twenty-one").slot == 21
        assert parse_command("pay for order number zero").slot == 0

    def test_optional_number_keyword(self):
        assert parse_command("pay for gas at pump number 4").slot == 4
        assert parse_command("pay for parking at space 12").slot == 12

    def test_missing_slot(self):
        with pytest.raises(IncompleteCommandError):
            parse_command("pay for gas at pump")
        with pytest.raises(IncompleteCommandError):
            parse_command("pay for order number")

    def test_unknown_use_case(self):
        with pytest.raises(UnknownUseCaseError):
            parse_command("pay for groceries")

    def test_toll_with_trailing_tokens(self):
        with pytest.raises(CommandParseError) as err:
            parse_command("pay for toll booth")
        assert err.value.position == 3

    def test_error_names_position(self):
        with pytest.raises(CommandParseError) as err:
            parse_command("pay with gas at pump six")
        assert err.value.position == 1

    def test_render_roundtrip(self):
        for use_case, slot in [("toll", None), ("fuel", 99), ("parking", 5208), ("fast_food", 0)]:
            cmd = PaymentCommand(use_case, slot)
            again = parse_command(cmd.render())
            assert (again.use_case, again.slot) == (use_case, slot)

    def test_command_invariants(self):
        with pytest.raises(CommandParseError):
            PaymentCommand("toll", 5)
        with pytest.raises(IncompleteCommandError):
            PaymentCommand("fuel", None)
        with pytest.raises(UnknownUseCaseError):
            PaymentCommand("groceries", 1)

    @given(st.text(max_size=60))
    @settings(max_examples=300)
    def test_totality(self, text):
        # never panics: a structured command or a typed error
        try:
            cmd = parse_command(text)
            assert cmd.use_case in ("fuel", "toll", "parking", "fast_food")
        except CommandError:
            pass

    def test_normalize_strips_punctuation(self):
        assert normalize("Hey, DashCam! pay-for TOLL?") == ["hey", "dashcam", "pay", "for", "toll"]


def one_edit(word, rng):
    letters = "abcdefghijklmnopqrstuvwxyz"
    kind = rng.choice(["sub", "ins", "del"] if len(word) > 1 else ["sub", "ins"])
    i = rng.randrange(len(word))
    if kind == "sub":
        return word[:i] + rng.choice(letters) + word[i + 1 :]
    if kind == "ins":
        return word[:i] + rng.choice(letters) + word[i:]
    return word[:i] + word[i + 1 :]


def corrupt_sentence(sentence, rng):
    """Apply a distance-<=2 corruption to one random content (non-slot) word."""
    tokens = sentence.split()
    positions = [
        i
        for i, tok in enumerate(tokens)
        if not any(ch.isdigit() for ch in tok)
        and normalize(tok)
        and normalize(tok)[0] in Dictionary.default().words
    ]
    i = rng.choice(positions)
    word = tokens[i]
    word = one_edit(word, rng)
    if rng.random() < 0.5 and word:
        word = one_edit(word, rng)
    tokens[i] = word
    return " ".join(tokens)


class TestRobustness:
    def test_single_corruption_recovery_sample(self):
        # full >= 1000-sentence run lives in the acceptance suite
        rng = Random(77)
        ok = 0
        trials = 200
        for n in range(trials):
            sentence, use_case, slot = CORPUS[n % len(CORPUS)]
            corrupted = corrupt_sentence(sentence, rng)
            try:
                cmd = parse_command(corrupted)
                ok += (cmd.use_case, cmd.slot) == (use_case, slot)
            except CommandError:
                pass
        assert ok / trials >= 0.99


class TestCorpusFile:
    def test_bundled_corpus_parses_perfectly(self):
        from dcp.command import evaluate_corpus, load_corpus

        import pathlib

        corpus = str(pathlib.Path(__file__).parent.parent / "fixtures" / "commands.txt")
        entries = load_corpus(corpus)
        assert len(entries) == 7
        assert all(expected is not None for _, expected in entries)
        result = evaluate_corpus(corpus)
        assert result["total"] == result["parsed"] == result["correct"] == 7
        assert result["accuracy"] == 1.0

    def test_unannotated_lines_allowed(self, tmp_path):
        from dcp.command import evaluate_corpus, load_corpus

        path = tmp_path / "corpus.txt"
        path.write_text("# comment\npay for toll\n\npay for gibberish\n")
        entries = load_corpus(str(path))
        assert [e for _, e in entries] == [None, None]
        result = evaluate_corpus(str(path))
        assert result == {
            "total": 2,
            "parsed": 1,
            "correct": 0,
            "annotated": 0,
            "accuracy": None,
        }
