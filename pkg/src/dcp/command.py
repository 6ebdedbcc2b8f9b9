"""Transcript-level trigger detection and payment-command parsing.

Speech recognition itself is out of scope; transcripts (possibly noisy) arrive
as simulator input. Recognition errors are repaired with the dictionary
heuristic: a token within edit distance 2 of a permitted word is auto-corrected
to the closest one. Slot values (pump/space/order numbers) are identifiers, not
vocabulary, and are never auto-corrected - silently turning order 120 into
order 128 would misroute a payment.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .errors import (
    CommandError,
    CommandParseError,
    IncompleteCommandError,
    UnknownUseCaseError,
)

USE_CASES = ("fuel", "toll", "parking", "fast_food")

TRIGGER_WORDS = ("hey", "dashcam")

# Content vocabulary: everything that may legally appear in a command except
# slot numbers. Kept small on purpose; every extra word is a correction target.
_CONTENT_WORDS = (
    "hey",
    "dashcam",
    "pay",
    "for",
    "gas",
    "fuel",
    "toll",
    "parking",
    "order",
    "at",
    "pump",
    "space",
    "number",
)

_ONES = (
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
)
_TEENS = (
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen",
)
_TENS = ("twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety")

WORD_NUMBERS: dict[str, int] = {}
for _i, _w in enumerate(_ONES):
    WORD_NUMBERS[_w] = _i
for _i, _w in enumerate(_TEENS):
    WORD_NUMBERS[_w] = 10 + _i
for _i, _w in enumerate(_TENS):
    WORD_NUMBERS[_w] = 20 + 10 * _i


def levenshtein(a: str, b: str) -> int:
    """Unit-cost insert/delete/substitute edit distance."""
    if a == b:
        return 0
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(cur[j - 1] + 1, prev[j] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


# Grammar positions and the words legal at each. Position-scoped correction
# matters: against the whole vocabulary, the two-letter word "at" is within
# edit distance 2 of almost any short garbled token and would swallow it.
_GRAMMAR_GROUPS: dict[str, tuple[str, ...]] = {
    "hey": ("hey",),
    "dashcam": ("dashcam",),
    "pay": ("pay",),
    "for": ("for",),
    "use_case": ("fuel", "gas", "order", "parking", "toll"),
    "at": ("at",),
    "pump": ("pump",),
    "space": ("space",),
    "number": ("number",),
}


@dataclass(frozen=True)
class Dictionary:
    """Permitted command words, lowercase canonical forms.

    groups, when present, scope correction to grammar positions; a flat
    dictionary (e.g. loaded from a word file) corrects every position against
    the full word list.
    """

    words: tuple[str, ...]
    groups: dict[str, tuple[str, ...]] | None = None

    def __post_init__(self):
        if not self.words:
            raise ValueError("dictionary must not be empty")
        if any(w != w.lower() or not w for w in self.words):
            raise ValueError("dictionary words must be non-empty lowercase")

    @classmethod
    def default(cls) -> "Dictionary":
        return cls(words=tuple(sorted(set(_CONTENT_WORDS))), groups=dict(_GRAMMAR_GROUPS))

    @classmethod
    def load(cls, path: str) -> "Dictionary":
        """Line-delimited UTF-8, one word/phrase per line, '#' comments."""
        words = []
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.split("#", 1)[0].strip().lower()
                if line:
                    words.append(line)
        return cls(words=tuple(sorted(set(words))))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("# permitted command words\n")
            for w in self.words:
                f.write(w + "\n")

    def position_words(self, position: str) -> tuple[str, ...]:
        if self.groups and position in self.groups:
            return self.groups[position]
        return self.words

    def closest(self, token: str, position: str | None = None) -> tuple[str, int]:
        """(nearest word, distance); ties broken lexicographically (words are sorted)."""
        pool = self.position_words(position) if position else self.words
        best_w, best_d = pool[0], levenshtein(token, pool[0])
        for w in pool[1:]:
            d = levenshtein(token, w)
            if d < best_d:
                best_w, best_d = w, d
        return best_w, best_d


def correct_token(token: str, dictionary: Dictionary | None = None) -> str:
    """Auto-correct to the nearest dictionary word when edit distance <= 2."""
    d = dictionary or default_dictionary()
    if token in d.words:
        return token
    word, dist = d.closest(token)
    return word if dist <= 2 else token


def _match_position(token: str, dictionary: Dictionary, position: str) -> str | None:
    """Correct a token against the words legal at one grammar position."""
    pool = dictionary.position_words(position)
    if token in pool:
        return token
    word, dist = dictionary.closest(token, position)
    return word if dist <= 2 else None


def normalize(transcript: str) -> list[str]:
    """Lowercase tokens with punctuation stripped; hyphens split compounds."""
    cleaned = []
    for ch in transcript.lower():
        if ch.isalnum():
            cleaned.append(ch)
        elif ch == "-":
            cleaned.append(" ")
        else:
            cleaned.append(" " if ch.isspace() else "")
    return "".join(cleaned).split()


@dataclass(frozen=True)
class TriggerResult:
    triggered: bool
    remainder: str


def detect_trigger(transcript: str, dictionary: Dictionary | None = None) -> TriggerResult:
    """Detect the wake phrase at the start of a transcript.

    Leading tokens must correct to "hey dashcam" (edit distance <= 2 per
    token); a split "dash cam" is joined before correction.
    """
    d = dictionary or default_dictionary()
    tokens = normalize(transcript)
    if len(tokens) < 2:
        return TriggerResult(False, " ".join(tokens))
    if _match_position(tokens[0], d, "hey") is None:
        return TriggerResult(False, " ".join(tokens))
    if _match_position(tokens[1], d, "dashcam") is not None:
        return TriggerResult(True, " ".join(tokens[2:]))
    if len(tokens) >= 3 and _match_position(tokens[1] + tokens[2], d, "dashcam") is not None:
        return TriggerResult(True, " ".join(tokens[3:]))
    return TriggerResult(False, " ".join(tokens))


@dataclass(frozen=True)
class PaymentCommand:
    """Structured payment intent extracted from one transcript."""

    use_case: str
    slot: int | None
    transcript: str = ""

    def __post_init__(self):
        if self.use_case not in USE_CASES:
            raise UnknownUseCaseError(f"unknown use case {self.use_case!r}")
        if self.use_case == "toll" and self.slot is not None:
            raise CommandParseError("toll takes no slot value", 0)
        if self.use_case != "toll":
            if self.slot is None:
                raise IncompleteCommandError(f"{self.use_case} requires a slot value")
            if self.slot < 0:
                raise CommandParseError("slot must be non-negative", 0)

    def render(self) -> str:
        """Canonical sentence for this command (round-trips through parse_command)."""
        if self.use_case == "toll":
            return "hey dashcam pay for toll"
        if self.use_case == "fuel":
            return f"hey dashcam pay for gas at pump number {self.slot}"
        if self.use_case == "parking":
            return f"hey dashcam pay for parking at space number {self.slot}"
        return f"hey dashcam pay for order number {self.slot}"

    def to_dict(self) -> dict:
        return {"use_case": self.use_case, "slot": self.slot, "transcript": self.transcript}


def _parse_number(tokens: list[str], pos: int) -> int:
    """Parse a slot value: a digit string or number words up to ninety nine."""
    if pos >= len(tokens):
        raise IncompleteCommandError("expected a number, found end of command")
    tok = tokens[pos]
    if tok.isdigit():
        if pos != len(tokens) - 1:
            raise CommandParseError(f"unexpected trailing token {tokens[pos + 1]!r}", pos + 1)
        return int(tok)
    if tok in WORD_NUMBERS:
        value = WORD_NUMBERS[tok]
        used = 1
        if (
            tok in _TENS
            and pos + 1 < len(tokens)
            and tokens[pos + 1] in WORD_NUMBERS
            and 1 <= WORD_NUMBERS[tokens[pos + 1]] <= 9
        ):
            value += WORD_NUMBERS[tokens[pos + 1]]
            used = 2
        if pos + used != len(tokens):
            raise CommandParseError(f"unexpected trailing token {tokens[pos + used]!r}", pos + used)
        return value
    raise CommandParseError(f"expected a number, got {tok!r}", pos)


def _expect(tokens: list[str], pos: int, position: str, d: Dictionary) -> int:
    if pos >= len(tokens):
        raise IncompleteCommandError(f"expected {position!r}, found end of command")
    if _match_position(tokens[pos], d, position) is None:
        raise CommandParseError(f"expected {position!r}, got {tokens[pos]!r}", pos)
    return pos + 1


def parse_command(transcript: str, dictionary: Dictionary | None = None) -> PaymentCommand:
    """Parse a spoken payment command into a PaymentCommand.

    Accepts transcripts with or without the leading trigger phrase. Content
    words are corrected against the words legal at their grammar position;
    slot digits and number words are parsed verbatim, never corrected.
    """
    d = dictionary or default_dictionary()
    trig = detect_trigger(transcript, d)
    tokens = normalize(trig.remainder) if trig.triggered else normalize(transcript)
    if not tokens:
        raise IncompleteCommandError("empty command")

    pos = _expect(tokens, 0, "pay", d)
    pos = _expect(tokens, pos, "for", d)
    if pos >= len(tokens):
        raise IncompleteCommandError("expected a use case, found end of command")

    head = _match_position(tokens[pos], d, "use_case")
    pos += 1
    if head == "toll":
        if pos != len(tokens):
            raise CommandParseError(f"unexpected trailing token {tokens[pos]!r}", pos)
        return PaymentCommand("toll", None, transcript)
    if head in ("gas", "fuel"):
        pos = _expect(tokens, pos, "at", d)
        pos = _expect(tokens, pos, "pump", d)
        pos = _skip_optional(tokens, pos, "number", d)
        return PaymentCommand("fuel", _parse_number(tokens, pos), transcript)
    if head == "parking":
        pos = _expect(tokens, pos, "at", d)
        pos = _expect(tokens, pos, "space", d)
        pos = _skip_optional(tokens, pos, "number", d)
        return PaymentCommand("parking", _parse_number(tokens, pos), transcript)
    if head == "order":
        pos = _expect(tokens, pos, "number", d)
        return PaymentCommand("fast_food", _parse_number(tokens, pos), transcript)
    raise UnknownUseCaseError(f"unrecognized use case {tokens[pos - 1]!r}")


def _skip_optional(tokens: list[str], pos: int, position: str, d: Dictionary) -> int:
    # "number" is optional filler only when a number follows it; a bare slot
    # token must not be eaten by correction.
    if pos < len(tokens) and not tokens[pos].isdigit() and tokens[pos] not in WORD_NUMBERS:
        if _match_position(tokens[pos], d, position) is not None:
            return pos + 1
    return pos


@lru_cache(maxsize=1)
def default_dictionary() -> Dictionary:
    return Dictionary.default()


def load_corpus(path: str) -> list[tuple[str, PaymentCommand | None]]:
    """Corpus file: one transcript per line, optional tab-separated expected
    parse as JSON ({"use_case": ..., "slot": ...}); '#' comments."""
    import json

    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            transcript, _, annotation = line.partition("\t")
            expected = None
            if annotation.strip():
                d = json.loads(annotation)
                expected = PaymentCommand(d["use_case"], d.get("slot"), transcript)
            entries.append((transcript, expected))
    return entries


def evaluate_corpus(path: str, dictionary: Dictionary | None = None) -> dict:
    """Parse accuracy over an annotated corpus file."""
    entries = load_corpus(path)
    total = parsed = correct = 0
    for transcript, expected in entries:
        total += 1
        try:
            got = parse_command(transcript, dictionary)
        except CommandError:
            continue
        parsed += 1
        if expected is not None and (got.use_case, got.slot) == (
            expected.use_case,
            expected.slot,
        ):
            correct += 1
    annotated = sum(1 for _, e in entries if e is not None)
    return {
        "total": total,
        "parsed": parsed,
        "correct": correct,
        "annotated": annotated,
        "accuracy": correct / annotated if annotated else None,
    }
