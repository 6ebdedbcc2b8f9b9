"""Zero-knowledge match proofs: a device proves its encrypted score was decrypted
correctly and lies above (match) or not above (non-match) its threshold, without
revealing the score.

Construction, all plain sigma-protocol toolbox over the same group as the
encryption layer, made non-interactive with hash-derived challenges:

  1. Verifiable decryption: knowledge of (x, S, r) with pk = g^x,
     c2 = c1^x * g^S and C_S = g^S * h^r, via a three-equation Schnorr proof.
     This pins the Pedersen commitment C_S to the true decryption of (c1, c2).
  2. Range proof: the claimed inequality is folded into a non-negative
     difference D = S - t - 1 (match) or D = t - S (non-match). The verifier
     derives C_D from C_S and t, and the prover shows D is a k-bit value via
     per-bit Pedersen commitments with 0/1 OR-proofs plus an aggregation
     response tying the bits back to C_D.

A proof binds the exact (public key, ciphertext, threshold, claimed bit,
device id, modality, round nonce); any change invalidates it.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from random import Random

from .errors import CannotProveError, DecryptionRangeError, GroupError
from .he import Ciphertext, GroupParams, KeyPair, PublicKey, decrypt

CHALLENGE_LABEL_VERSION = "dcp/v1"


def derive_challenge(params: GroupParams, label: str, transcript: bytes) -> int:
    """Deterministic hash-to-scalar, domain-separated by label."""
    h = hashlib.sha512()
    lab = label.encode("utf-8")
    h.update(len(lab).to_bytes(4, "big"))
    h.update(lab)
    h.update(transcript)
    return int.from_bytes(h.digest(), "big") % params.q


def _lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


@dataclass(frozen=True)
class Commitment:
    """Pedersen commitment g^v * h^r; the opening (v, r) stays with the prover."""

    element: int


def commit_with_randomness(params: GroupParams, v: int, r: int) -> Commitment:
    return Commitment(params.pow_g(v) * params.pow_h(r) % params.p)


def commit(params: GroupParams, v: int, rng: Random) -> tuple[Commitment, int]:
    """Commit to v; returns (commitment, randomness r) for the caller to retain."""
    r = params.random_scalar(rng)
    return commit_with_randomness(params, v, r), r


def open_commitment(params: GroupParams, com: Commitment, v: int, r: int) -> bool:
    return commit_with_randomness(params, v, r) == com


@dataclass(frozen=True)
class Threshold:
    """Integer score cutoff; matches are strict: score > value."""

    value: int


@dataclass(frozen=True)
class ProofContext:
    """Binds a proof to one device, modality, and challenge round."""

    device_id: int
    modality: str
    nonce: bytes

    def to_bytes(self) -> bytes:
        from .he import MODALITY_CODES

        return (
            self.device_id.to_bytes(8, "big")
            + bytes([MODALITY_CODES[self.modality]])
            + _lp(self.nonce)
        )


@dataclass(frozen=True)
class BitProof:
    """OR-proof that one Pedersen commitment hides 0 or 1."""

    a0: int
    a1: int
    e0: int
    z0: int
    z1: int


@dataclass(frozen=True)
class MatchProof:
    is_match: bool
    threshold: int
    context: ProofContext
    c_s: int  # commitment to the decrypted score
    a1: int   # sigma commitments: g^kx, c1^kx*g^ks, g^ks*h^kr
    a2: int
    a3: int
    zx: int
    zs: int
    zr: int
    bit_commitments: tuple[int, ...]
    bit_proofs: tuple[BitProof, ...]
    agg_r: int


class MatchResult(enum.Enum):
    MATCH = "match"
    NON_MATCH = "non-match"
    INVALID = "invalid"


def range_bits(params: GroupParams) -> int:
    """Bit width of the non-negative difference: ceil(log2(2B+1)) + 1."""
    return (2 * params.plaintext_bound + 1).bit_length() + 1


def _statement_bytes(
    pk: PublicKey,
    ct: Ciphertext,
    t: Threshold,
    is_match: bool,
    context: ProofContext,
    c_s: int,
    bit_commitments: tuple[int, ...],
) -> bytes:
    params = pk.params
    enc = params.encode_element
    return b"".join(
        [
            _lp(CHALLENGE_LABEL_VERSION.encode()),
            _lp(params.profile.encode()),
            _lp(pk.to_bytes()),
            _lp(enc(ct.c1)),
            _lp(enc(ct.c2)),
            _lp(t.value.to_bytes(8, "big", signed=True)),
            bytes([1 if is_match else 0]),
            _lp(context.to_bytes()),
            _lp(enc(c_s)),
            _lp(b"".join(enc(c) for c in bit_commitments)),
        ]
    )


def prove_match(
    sk: KeyPair,
    ct: Ciphertext,
    t: Threshold,
    context: ProofContext,
    rng: Random,
) -> MatchProof:
    """Decrypt the challenge score and prove (score > t) or (score <= t)."""
    params = sk.params
    bound = params.plaintext_bound
    if abs(t.value) >= bound:
        raise CannotProveError(f"|threshold| must be < {bound}")
    try:
        score = decrypt(sk, ct)
    except (DecryptionRangeError, GroupError) as exc:
        raise CannotProveError(f"cannot decrypt challenge score: {exc}") from exc

    p, q = params.p, params.q
    is_match = score > t.value
    r = params.random_scalar(rng)
    c_s = commit_with_randomness(params, score, r).element

    # Non-negative difference certified by the range proof.
    delta = score - t.value - 1 if is_match else t.value - score
    k = range_bits(params)
    assert 0 <= delta < (1 << k)
    r_delta = r if is_match else (-r) % q

    # Per-bit commitments first; they are part of the challenged statement.
    bits = [(delta >> i) & 1 for i in range(k)]
    bit_rand = [params.random_scalar(rng) for _ in range(k)]
    bit_cs = tuple(commit_with_randomness(params, b, s).element for b, s in zip(bits, bit_rand))

    stmt = _statement_bytes(sk.public_key, ct, t, is_match, context, c_s, bit_cs)

    # Verifiable decryption sigma proof.
    kx, ks, kr = (params.random_scalar(rng) for _ in range(3))
    g_ks = params.pow_g(ks)
    a1 = params.pow_g(kx)
    a2 = pow(ct.c1, kx, p) * g_ks % p
    a3 = g_ks * params.pow_h(kr) % p
    enc = params.encode_element
    sigma_part = _lp(enc(a1)) + _lp(enc(a2)) + _lp(enc(a3))
    e = derive_challenge(params, "dcp/v1/dec", stmt + sigma_part)
    zx = (kx + e * sk.x) % q
    zs = (ks + e * score) % q
    zr = (kr + e * r) % q

    # 0/1 OR-proofs: real branch answered honestly, other branch simulated.
    bit_proofs = []
    for i, (b, s, c) in enumerate(zip(bits, bit_rand, bit_cs)):
        k_real = params.random_scalar(rng)
        e_sim = params.random_scalar(rng)
        z_sim = params.random_scalar(rng)
        if b == 0:
            a0 = params.pow_h(k_real)
            target1 = c * pow(params.g, -1, p) % p  # C / g
            a1b = params.pow_h(z_sim) * pow(target1, -e_sim % q, p) % p
        else:
            a1b = params.pow_h(k_real)
            a0 = params.pow_h(z_sim) * pow(c, -e_sim % q, p) % p
        ei = derive_challenge(
            params,
            "dcp/v1/bit",
            stmt + sigma_part + i.to_bytes(2, "big") + _lp(enc(a0)) + _lp(enc(a1b)),
        )
        e_real = (ei - e_sim) % q
        z_real = (k_real + e_real * s) % q
        if b == 0:
            bit_proofs.append(BitProof(a0, a1b, e_real, z_real, z_sim))
        else:
            bit_proofs.append(BitProof(a0, a1b, e_sim, z_sim, z_real))

    s_total = sum(s << i for i, s in enumerate(bit_rand)) % q
    agg_r = (s_total - r_delta) % q

    return MatchProof(
        is_match=is_match,
        threshold=t.value,
        context=context,
        c_s=c_s,
        a1=a1,
        a2=a2,
        a3=a3,
        zx=zx,
        zs=zs,
        zr=zr,
        bit_commitments=bit_cs,
        bit_proofs=tuple(bit_proofs),
        agg_r=agg_r,
    )


def verify_match(
    pk: PublicKey,
    ct: Ciphertext,
    t: Threshold,
    proof: MatchProof,
    context: ProofContext,
) -> MatchResult:
    """Validate a match proof; returns INVALID rather than raising.

    The verifier sees only public data: it never receives the score, the
    secret key, or any commitment opening.
    """
    try:
        return _verify(pk, ct, t, proof, context)
    except Exception:
        return MatchResult.INVALID


def _verify(
    pk: PublicKey,
    ct: Ciphertext,
    t: Threshold,
    proof: MatchProof,
    context: ProofContext,
) -> MatchResult:
    params = pk.params
    p, q = params.p, params.q
    if proof.context != context or proof.threshold != t.value:
        return MatchResult.INVALID

    k = range_bits(params)
    if len(proof.bit_commitments) != k or len(proof.bit_proofs) != k:
        return MatchResult.INVALID

    elements = [proof.c_s, proof.a1, proof.a2, proof.a3, ct.c1, ct.c2]
    elements += list(proof.bit_commitments)
    for bp in proof.bit_proofs:
        elements += [bp.a0, bp.a1]
    if any(not params.is_element(e) for e in elements):
        return MatchResult.INVALID
    scalars = [proof.zx, proof.zs, proof.zr, proof.agg_r]
    for bp in proof.bit_proofs:
        scalars += [bp.e0, bp.z0, bp.z1]
    if any(not (0 <= s < q) for s in scalars):
        return MatchResult.INVALID

    stmt = _statement_bytes(pk, ct, t, proof.is_match, context, proof.c_s, proof.bit_commitments)
    enc = params.encode_element
    sigma_part = _lp(enc(proof.a1)) + _lp(enc(proof.a2)) + _lp(enc(proof.a3))
    e = derive_challenge(params, "dcp/v1/dec", stmt + sigma_part)

    # Verifiable decryption equations.
    if params.pow_g(proof.zx) != proof.a1 * pow(pk.y, e, p) % p:
        return MatchResult.INVALID
    g_zs = params.pow_g(proof.zs)
    if pow(ct.c1, proof.zx, p) * g_zs % p != proof.a2 * pow(ct.c2, e, p) % p:
        return MatchResult.INVALID
    if g_zs * params.pow_h(proof.zr) % p != proof.a3 * pow(proof.c_s, e, p) % p:
        return MatchResult.INVALID

    # Per-bit OR-proofs.
    g_inv = pow(params.g, -1, p)
    for i, (c, bp) in enumerate(zip(proof.bit_commitments, proof.bit_proofs)):
        ei = derive_challenge(
            params,
            "dcp/v1/bit",
            stmt + sigma_part + i.to_bytes(2, "big") + _lp(enc(bp.a0)) + _lp(enc(bp.a1)),
        )
        e1 = (ei - bp.e0) % q
        if params.pow_h(bp.z0) != bp.a0 * pow(c, bp.e0, p) % p:
            return MatchResult.INVALID
        if params.pow_h(bp.z1) != bp.a1 * pow(c * g_inv % p, e1, p) % p:
            return MatchResult.INVALID

    # Aggregate the bits back onto the score commitment.
    agg = 1
    for i, c in enumerate(proof.bit_commitments):
        agg = agg * pow(c, 1 << i, p) % p
    if proof.is_match:
        c_delta = proof.c_s * params.pow_g(-(t.value + 1)) % p
    else:
        c_delta = params.pow_g(t.value) * pow(proof.c_s, -1, p) % p
    if agg != c_delta * params.pow_h(proof.agg_r) % p:
        return MatchResult.INVALID

    return MatchResult.MATCH if proof.is_match else MatchResult.NON_MATCH


def proof_to_bytes(proof: MatchProof, params: GroupParams) -> bytes:
    """Canonical proof serialization: fixed field order, length-prefixed bit vector."""
    enc = params.encode_element
    encs = params.encode_scalar
    parts = [
        bytes([1 if proof.is_match else 0]),
        proof.threshold.to_bytes(8, "big", signed=True),
        proof.context.device_id.to_bytes(8, "big"),
        _modality_byte(proof.context.modality),
        bytes([len(proof.context.nonce)]),
        proof.context.nonce,
        enc(proof.c_s),
        enc(proof.a1),
        enc(proof.a2),
        enc(proof.a3),
        encs(proof.zx),
        encs(proof.zs),
        encs(proof.zr),
        len(proof.bit_commitments).to_bytes(2, "big"),
    ]
    for c, bp in zip(proof.bit_commitments, proof.bit_proofs):
        parts += [enc(c), enc(bp.a0), enc(bp.a1), encs(bp.e0), encs(bp.z0), encs(bp.z1)]
    parts.append(encs(proof.agg_r))
    return b"".join(parts)


def _modality_byte(modality: str) -> bytes:
    from .he import MODALITY_CODES

    return bytes([MODALITY_CODES[modality]])


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise GroupError("proof bytes truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def done(self) -> bool:
        return self.pos == len(self.data)


def proof_from_bytes(data: bytes, params: GroupParams) -> MatchProof:
    from .he import MODALITY_NAMES

    r = _Reader(data)
    ew, sw = params.element_bytes, params.scalar_bytes
    is_match = r.take(1)[0] == 1
    threshold = int.from_bytes(r.take(8), "big", signed=True)
    device_id = int.from_bytes(r.take(8), "big")
    mcode = r.take(1)[0]
    if mcode not in MODALITY_NAMES:
        raise GroupError(f"unknown modality code {mcode}")
    nonce = r.take(r.take(1)[0])
    c_s = params.decode_element(r.take(ew))
    a1 = params.decode_element(r.take(ew))
    a2 = params.decode_element(r.take(ew))
    a3 = params.decode_element(r.take(ew))
    zx = params.decode_scalar(r.take(sw))
    zs = params.decode_scalar(r.take(sw))
    zr = params.decode_scalar(r.take(sw))
    k = int.from_bytes(r.take(2), "big")
    if k > 512:
        raise GroupError("implausible bit-vector length")
    bit_cs, bit_proofs = [], []
    for _ in range(k):
        bit_cs.append(params.decode_element(r.take(ew)))
        a0b = params.decode_element(r.take(ew))
        a1b = params.decode_element(r.take(ew))
        e0 = params.decode_scalar(r.take(sw))
        z0 = params.decode_scalar(r.take(sw))
        z1 = params.decode_scalar(r.take(sw))
        bit_proofs.append(BitProof(a0b, a1b, e0, z0, z1))
    agg_r = params.decode_scalar(r.take(sw))
    if not r.done():
        raise GroupError("trailing bytes after proof")
    return MatchProof(
        is_match=is_match,
        threshold=threshold,
        context=ProofContext(device_id, MODALITY_NAMES[mcode], nonce),
        c_s=c_s,
        a1=a1,
        a2=a2,
        a3=a3,
        zx=zx,
        zs=zs,
        zr=zr,
        bit_commitments=tuple(bit_cs),
        bit_proofs=tuple(bit_proofs),
        agg_r=agg_r,
    )
