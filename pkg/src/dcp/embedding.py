"""Biometric templates as fixed-point vectors, plus synthetic identity generation.

Real systems extract face/voice embeddings with learned models; here synthetic
unit vectors stand in so that inter/intra-class separation is a simulation knob.
Quantized integer templates feed the encrypted-score pipeline: cosine similarity
of unit vectors becomes an exact integer inner product at scale Q.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidEmbeddingError, TemplateShapeError

MODALITIES = ("face", "voice")

DEFAULT_DIM = 128
DEFAULT_SCALE = 127

# Keep d * Q^2 comfortably inside int64 so numpy inner products stay exact.
MAX_SCALE = 32767
MAX_DIM = 65535


@dataclass(frozen=True, eq=False)
class Embedding:
    """Unit-norm real feature vector with a modality tag.

    Values are normalized to unit L2 norm on construction; non-finite or
    near-zero inputs are rejected.
    """

    values: np.ndarray
    modality: str

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise InvalidEmbeddingError(f"unknown modality {self.modality!r}")
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise InvalidEmbeddingError("embedding must be a vector with d >= 2")
        if not np.all(np.isfinite(v)):
            raise InvalidEmbeddingError("embedding contains non-finite values")
        norm = float(np.linalg.norm(v))
        if norm < 1e-12:
            raise InvalidEmbeddingError("embedding has (near-)zero norm")
        v = v / norm
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.size

    def cosine(self, other: "Embedding") -> float:
        if other.dim != self.dim or other.modality != self.modality:
            raise TemplateShapeError("embeddings differ in dimension or modality")
        return float(np.dot(self.values, other.values))

    def to_dict(self) -> dict:
        return {"modality": self.modality, "values": [float(x) for x in self.values]}

    @classmethod
    def from_dict(cls, d: dict) -> "Embedding":
        return cls(values=np.asarray(d["values"], dtype=np.float64), modality=d["modality"])


@dataclass(frozen=True)
class QuantizedTemplate:
    """Integer template with every element in [-scale, scale]."""

    values: tuple[int, ...]
    modality: str
    scale: int

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise TemplateShapeError(f"unknown modality {self.modality!r}")
        if not (1 <= self.scale <= MAX_SCALE):
            raise TemplateShapeError(f"scale must be in [1, {MAX_SCALE}]")
        if len(self.values) < 2 or len(self.values) > MAX_DIM:
            raise TemplateShapeError("template dimension out of range")
        if any(abs(v) > self.scale for v in self.values):
            raise TemplateShapeError("template element outside [-scale, scale]")

    @property
    def dim(self) -> int:
        return len(self.values)


def quantize(
    e: "Embedding | np.ndarray", scale: int = DEFAULT_SCALE, modality: str | None = None
) -> QuantizedTemplate:
    """Fixed-point quantization: round each coordinate of a unit vector to scale Q.

    Rounding is numpy's round-half-to-even; results are clamped to [-Q, Q].
    Raw arrays are accepted (with an explicit modality) so that dequantized
    vectors can be re-quantized without renormalization.
    """
    if not (1 <= scale <= MAX_SCALE):
        raise TemplateShapeError(f"scale must be in [1, {MAX_SCALE}]")
    if isinstance(e, Embedding):
        values, modality = e.values, e.modality
    else:
        if modality is None:
            raise TemplateShapeError("raw-array quantization needs a modality")
        values = np.asarray(e, dtype=np.float64)
        if not np.all(np.isfinite(values)):
            raise InvalidEmbeddingError("embedding contains non-finite values")
    q = np.clip(np.rint(values * scale), -scale, scale).astype(np.int64)
    return QuantizedTemplate(values=tuple(int(x) for x in q), modality=modality, scale=scale)


def dequantize(qt: QuantizedTemplate) -> np.ndarray:
    """Real vector values / Q; norm is within quantization error of 1."""
    return np.asarray(qt.values, dtype=np.float64) / qt.scale


def inner_product_int(a: QuantizedTemplate, b: QuantizedTemplate) -> int:
    """Exact integer inner product; |result| <= d * Q^2."""
    if a.dim != b.dim:
        raise TemplateShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.modality != b.modality:
        raise TemplateShapeError(f"modality mismatch: {a.modality} vs {b.modality}")
    return int(np.dot(np.asarray(a.values, dtype=np.int64), np.asarray(b.values, dtype=np.int64)))


def score_to_cosine(s: int, scale: int = DEFAULT_SCALE) -> float:
    """Map an integer score back to the cosine estimate s / Q^2."""
    return s / (scale * scale)


def score_to_sq_euclidean(s: int, scale: int = DEFAULT_SCALE) -> float:
    """Squared euclidean distance companion, valid for unit-norm inputs: 2 - 2*cos."""
    return 2.0 - 2.0 * score_to_cosine(s, scale)


def cosine_to_score(cos: float, scale: int = DEFAULT_SCALE) -> int:
    """Integer score threshold equivalent of a cosine threshold."""
    return int(round(cos * scale * scale))


@dataclass(frozen=True)
class IdentityProfile:
    """Synthetic enrolled subject: mean face/voice embeddings plus capture noise."""

    subject_id: str
    face_mean: Embedding
    voice_mean: Embedding
    noise_sigma: float = 0.05

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvalidEmbeddingError("noise_sigma must be >= 0")

    def mean(self, modality: str) -> Embedding:
        if modality == "face":
            return self.face_mean
        if modality == "voice":
            return self.voice_mean
        raise TemplateShapeError(f"unknown modality {modality!r}")


def sample_observation(
    profile: IdentityProfile,
    modality: str,
    rng: np.random.Generator,
    sigma: float | None = None,
) -> Embedding:
    """Noisy capture of a subject: mean + isotropic Gaussian noise, re-normalized.

    sigma is the expected total noise norm (per-coordinate std sigma/sqrt(d)),
    so its effect on cosine similarity is dimension-independent:
    E[cos] ~ 1/sqrt(1 + sigma^2). sigma overrides the profile's noise level
    when given; sigma == 0 returns the mean exactly.
    """
    mean = profile.mean(modality)
    s = profile.noise_sigma if sigma is None else sigma
    if s < 0:
        raise InvalidEmbeddingError("sigma must be >= 0")
    if s == 0:
        return mean
    noisy = mean.values + (s / np.sqrt(mean.dim)) * rng.standard_normal(mean.dim)
    return Embedding(values=noisy, modality=modality)


def random_unit_embedding(dim: int, modality: str, rng: np.random.Generator) -> Embedding:
    return Embedding(values=rng.standard_normal(dim), modality=modality)


def make_profiles(
    n: int,
    dim: int,
    rng: np.random.Generator,
    noise_sigma: float = 0.05,
    separation: str = "orthogonal",
) -> list[IdentityProfile]:
    """Generate n synthetic identities.

    separation "orthogonal" draws mutually orthogonal means per modality
    (requires n <= dim), guaranteeing inter-class cosine 0; "random" draws
    independent unit vectors (near-orthogonal in high dimension, but unbounded).
    """
    if separation not in ("orthogonal", "random"):
        raise InvalidEmbeddingError(f"unknown separation scheme {separation!r}")
    if separation == "orthogonal" and n > dim:
        raise InvalidEmbeddingError(f"orthogonal separation needs n <= dim, got n={n}, dim={dim}")
    means = {}
    for modality in MODALITIES:
        if separation == "orthogonal":
            basis, _ = np.linalg.qr(rng.standard_normal((dim, n)))
            vecs = basis.T[:n]
        else:
            vecs = rng.standard_normal((n, dim))
        means[modality] = [Embedding(values=v, modality=modality) for v in vecs]
    return [
        IdentityProfile(
            subject_id=f"subject-{i}",
            face_mean=means["face"][i],
            voice_mean=means["voice"][i],
            noise_sigma=noise_sigma,
        )
        for i in range(n)
    ]


def save_embedding(e: Embedding, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(e.to_dict(), f)


def load_embedding(path: str) -> Embedding:
    with open(path, "r", encoding="utf-8") as f:
        return Embedding.from_dict(json.load(f))
