import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dcp.embedding import (
    Embedding,
    IdentityProfile,
    dequantize,
    inner_product_int,
    make_profiles,
    quantize,
    sample_observation,
    score_to_cosine,
    score_to_sq_euclidean,
)
from dcp.errors import InvalidEmbeddingError, TemplateShapeError


def unit(values, modality="face"):
    return Embedding(values=np.asarray(values, dtype=float), modality=modality)


class TestQuantize:
    def test_basis_vector(self):
        qt = quantize(unit([1.0, 0.0, 0.0, 0.0]), 127)
        assert qt.values == (127, 0, 0, 0)

    def test_hand_rounding(self):
        # round(0.6*127) = round(76.2) = 76, round(0.8*127) = round(101.6) = 102
        qt = quantize(unit([0.6, 0.8, 0.0, 0.0]), 127)
        assert qt.values == (76, 102, 0, 0)

    @given(
        st.lists(st.floats(-1, 1), min_size=2, max_size=32).filter(
            lambda v: float(np.linalg.norm(v)) > 1e-6
        )
    )
    def test_scale_one_bounds(self, raw):
        qt = quantize(unit(raw), 1)
        assert set(qt.values) <= {-1, 0, 1}

    def test_rejects_nonfinite(self):
        with pytest.raises(InvalidEmbeddingError):
            unit([1.0, float("nan"), 0.0])
        with pytest.raises(InvalidEmbeddingError):
            unit([1.0, float("inf"), 0.0])

    def test_rejects_zero_norm_and_short(self):
        with pytest.raises(InvalidEmbeddingError):
            unit([0.0, 0.0, 0.0])
        with pytest.raises(InvalidEmbeddingError):
            unit([1.0])

    def test_normalizes_on_construction(self):
        e = unit([3.0, 4.0])
        assert np.linalg.norm(e.values) == pytest.approx(1.0, abs=1e-6)

    def test_dequantize_requantize_is_identity(self, np_rng):
        for _ in range(200):
            e = unit(np_rng.standard_normal(64))
            qt = quantize(e, 127)
            again = quantize(dequantize(qt), 127, modality=qt.modality)
            assert again == qt


class TestInnerProduct:
    def test_matched_basis(self):
        a = quantize(unit([1, 0, 0, 0]), 127)
        assert inner_product_int(a, a) == 127 * 127 == 16129

    def test_orthogonal(self):
        a = quantize(unit([1, 0]), 127)
        b = quantize(unit([0, 1]), 127)
        assert inner_product_int(a, b) == 0

    def test_against_naive_loop(self, np_rng):
        # independent oracle: plain python summation
        for _ in range(100):
            a = quantize(unit(np_rng.standard_normal(128)), 127)
            b = quantize(unit(np_rng.standard_normal(128)), 127)
            naive = sum(x * y for x, y in zip(a.values, b.values))
            assert inner_product_int(a, b) == naive

    def test_symmetry_and_scaling(self):
        a = quantize(unit([0.6, 0.8, 0, 0]), 10)
        b = quantize(unit([0, 0.8, 0.6, 0]), 10)
        assert inner_product_int(a, b) == inner_product_int(b, a)
        # bilinearity over integer scaling: <2a, b> = 2<a, b>
        doubled = type(a)(tuple(2 * v for v in a.values), a.modality, a.scale * 2)
        assert inner_product_int(doubled, b) == 2 * inner_product_int(a, b)

    def test_shape_and_modality_errors(self):
        a = quantize(unit([1, 0, 0]), 127)
        b = quantize(unit([1, 0]), 127)
        with pytest.raises(TemplateShapeError):
            inner_product_int(a, b)
        v = quantize(unit([1, 0, 0], modality="voice"), 127)
        with pytest.raises(TemplateShapeError):
            inner_product_int(a, v)


class TestScoreConversion:
    def test_identity_case(self):
        assert score_to_cosine(16129, 127) == 1.0
        assert score_to_sq_euclidean(16129, 127) == 0.0

    def test_orthogonal_case(self):
        assert score_to_cosine(0, 127) == 0.0
        assert score_to_sq_euclidean(0, 127) == 2.0

    def test_division(self):
        assert score_to_cosine(6452, 127) == pytest.approx(6452 / 16129)
        assert score_to_cosine(6452, 127) == pytest.approx(0.4000248, abs=1e-6)


class TestQuantizationError:
    def test_cosine_error_bound_10k_pairs(self, np_rng):
        # |quantized cosine - float cosine| <= 0.02 for Q=127, d=128
        n, d, q = 10_000, 128, 127
        a = np_rng.standard_normal((n, d))
        b = np_rng.standard_normal((n, d))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        b /= np.linalg.norm(b, axis=1, keepdims=True)
        qa = np.clip(np.rint(a * q), -q, q)
        qb = np.clip(np.rint(b * q), -q, q)
        approx = np.sum(qa * qb, axis=1) / (q * q)
        exact = np.sum(a * b, axis=1)
        assert np.max(np.abs(approx - exact)) <= 0.02


class TestSampling:
    def make_profile(self, np_rng, sigma=0.05, d=128):
        p = make_profiles(1, d, np_rng, noise_sigma=sigma)[0]
        return p

    def test_zero_noise_returns_mean(self, np_rng):
        p = self.make_profile(np_rng, sigma=0.0)
        obs = sample_observation(p, "face", np_rng)
        assert obs is p.face_mean

    def test_deterministic_under_seed(self):
        rng1 = np.random.default_rng(42)
        p = self.make_profile(np.random.default_rng(7))
        rng2 = np.random.default_rng(42)
        seq1 = [sample_observation(p, "voice", rng1).values for _ in range(5)]
        seq2 = [sample_observation(p, "voice", rng2).values for _ in range(5)]
        for a, b in zip(seq1, seq2):
            assert np.array_equal(a, b)

    def test_mean_cosine_fixture(self):
        # Monte-Carlo fixture recorded from this exact seed and noise model.
        rng = np.random.default_rng(2024)
        p = make_profiles(1, 128, rng, noise_sigma=0.05)[0]
        cos = np.mean(
            [sample_observation(p, "face", rng).cosine(p.face_mean) for _ in range(1000)]
        )
        assert cos > 0.9
        assert cos == pytest.approx(0.998764, abs=1e-4)

    def test_negative_sigma_rejected(self, np_rng):
        with pytest.raises(InvalidEmbeddingError):
            IdentityProfile(
                "x",
                unit(np.ones(4)),
                unit(np.ones(4), "voice"),
                noise_sigma=-1.0,
            )


class TestProfiles:
    def test_orthogonal_separation(self, np_rng):
        profiles = make_profiles(5, 64, np_rng, separation="orthogonal")
        for i in range(5):
            for j in range(i + 1, 5):
                assert abs(profiles[i].face_mean.cosine(profiles[j].face_mean)) < 1e-9
                assert abs(profiles[i].voice_mean.cosine(profiles[j].voice_mean)) < 1e-9

    def test_orthogonal_needs_enough_dims(self, np_rng):
        with pytest.raises(InvalidEmbeddingError):
            make_profiles(10, 4, np_rng, separation="orthogonal")


class TestJsonRoundtrip:
    def test_fixture_io(self, np_rng, tmp_path):
        from dcp.embedding import load_embedding, save_embedding

        e = unit(np_rng.standard_normal(16), "voice")
        path = tmp_path / "emb.json"
        save_embedding(e, str(path))
        back = load_embedding(str(path))
        assert back.modality == "voice"
        assert np.allclose(back.values, e.values)


@settings(max_examples=50)
@given(st.integers(min_value=-16129, max_value=16129))
def test_cosine_euclidean_companion(s):
    # for unit-norm inputs: ||a-b||^2 = 2 - 2 cos
    assert score_to_sq_euclidean(s, 127) == pytest.approx(2 - 2 * score_to_cosine(s, 127))
