"""Additively homomorphic encryption over a prime-order subgroup of Z_p*.

Exponent-encoded ElGamal: Enc(v) = (g^r, pk^r * g^v). Adding ciphertexts adds
plaintexts; raising to a plaintext scalar multiplies them. That is exactly the
algebra an encrypted template/plaintext-probe inner product needs, and unlike
lattice schemes it is noise-free, so encrypted scores decrypt to the exact
integer inner product. Decryption recovers the bounded exponent with
baby-step/giant-step.

Two parameter profiles:
  "test"   64-bit safe prime, for fast unit tests; no security claim.
  "secure" 2048-bit field with a 256-bit prime-order subgroup (~112-bit
           classical field strength per NIST SP 800-57; subgroup attacks
           cost ~2^128).

Generators are nothing-up-my-sleeve: hash-derived field elements raised to the
cofactor (see scripts/gen_group_params.py, which regenerates the constants
below). The discrete log of h to base g is unknown, as Pedersen commitments
require.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from random import Random

from .embedding import QuantizedTemplate
from .errors import (
    DecryptionRangeError,
    GroupError,
    KeyMismatchError,
    PlaintextRangeError,
    TemplateShapeError,
)

# Default plaintext bound: d * Q^2 for d=128, Q=127.
DEFAULT_BOUND = 128 * 127 * 127  # 2_064_512

# Generated by scripts/gen_group_params.py (seeded SHA-256 derivation).
_P_TEST = 0xC9EFCF572329F12B
_Q_TEST = 0x64F7E7AB9194F895
_G_TEST = 0x4E97B8E8CCA8BBCC
_H_TEST = 0x89267FF7407D5592

_P_SECURE = int(
    "8B791771EBD5AF3EA1D111C74FCD0DCBD1CAA5226511FBDF67979E010C4DB71E"
    "5881E8CD5F0C839A80474BE847DC706A5808DA528C5EC262E45F135A1D32F562"
    "DBBB2CD8EF71C8C6938F6C59A3783F1CAE8BF6E72C7FB758D44B419801328D17"
    "7F6B08C42F313786D49BEA3578C5871F9B1B7E1617773DE1312AC007E2A18DC4"
    "B545C3ADDB9642943CE2FD196622E8296A6A3A643F2E41614788256CE6B37422"
    "696F54AF9981DD99C3EB769D34319C18C9AA333EBE191B2DB8768D54203D7DB7"
    "6EC42BDA09282EDC2D6692805E4A75DEDE3859698A86E55AFD492D35C5F52643"
    "6AFC8332A2E7A25BE8CE5D8083D3D00203814F524DADD4074FCAF3E7CCF832ED",
    16,
)
_Q_SECURE = 0xA5F6D53359E6FED265D45765CA44EF11EF8927B916A763D31349E7CADD8638CF
_G_SECURE = int(
    "7D833BFD74CC8F87E9025D13A46501C955BEBC58182CDAEE8033F4D1E5FFDE34"
    "C817E7A4A9452FF5FAA3A2A2341CCADB8B8D25A5CB6C2B36A4C42A07E3BA7378"
    "A69B7E8800CB92AE3E379B5A16B2FE1328B59CFB675B578B1858F418DB0F1CA5"
    "9640180D338B808CDD2B6FA1631D839C7460E3DB03617175A3800E1612AEAB81"
    "F2186F3A5C081DE09D26C0F90FB58E4D89BD073578FB3690D08EF24B53BA0FB1"
    "4902E99795A647E94F072388B3238273657F7CA43FEDEB02D7571F6C592FD25E"
    "C092EA8D35FDECE48767E40C07CC62D8293D845FC4C1D8857ED7578CF6C469CF"
    "34C8EE3C869DF8DAC997AFB9E3D4D95716FEFBF8ABCDD31A826D4CCE23D46061",
    16,
)
_H_SECURE = int(
    "7ACC53C19253342DE43306C20B444012405979056827174141A1B9477B70D88F"
    "8EC2BD508A30F8834B3D5C242C5334CA811E806F09F20D9F515160C55195DFB9"
    "400BA215194D0EA227CEF0DEA22149636178B9B1973069E433EEF7EE6904F727"
    "5473E8298F10516DCEE5356DB5CA90F8DCA31385B9C8E975990B1D0B13BDCA6A"
    "4B87E16795F1CB5C4C26CF41AB6850707D0191E8C7EC3C02AF5C0A034775A248"
    "4EA24B784341D38700365A9E8B4F54687F2C9361740768CE6D80C13C7E1F46E6"
    "3C865162FA9C65D6BC692E74DDB8382C6530ACFA6FF2AF024E19585DEE6717CA"
    "D86914C4C13DA65B87AD7BC6748A5C6DC3601B50D9435FB7FE1D5EC477C2800C",
    16,
)


def _miller_rabin(n: int, rounds: int = 40, rng: Random | None = None) -> bool:
    if n < 2:
        return False
    for sp in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % sp == 0:
            return n == sp
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    rng = rng or Random(0xDC9)
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class GroupParams:
    """Cyclic group of prime order q inside Z_p*, with independent generators g, h."""

    profile: str  # "test" | "secure"
    p: int
    q: int
    g: int
    h: int
    plaintext_bound: int = DEFAULT_BOUND

    def __post_init__(self):
        if self.profile not in ("test", "secure"):
            raise GroupError(f"unknown profile {self.profile!r}")
        if not (1 <= self.plaintext_bound):
            raise GroupError("plaintext_bound must be >= 1")
        if self.q <= 2 * self.plaintext_bound:
            raise GroupError("group order too small for the plaintext bound")
        for name, e in (("g", self.g), ("h", self.h)):
            if not (1 < e < self.p) or pow(e, self.q, self.p) != 1:
                raise GroupError(f"{name} is not a non-identity subgroup element")
        if self.g == self.h:
            raise GroupError("g and h must be independent generators")

    @property
    def element_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8

    @property
    def scalar_bytes(self) -> int:
        return (self.q.bit_length() + 7) // 8

    def validate(self, strict: bool = False) -> None:
        """Re-check structural invariants; strict adds primality tests."""
        self.__post_init__()
        if strict:
            if not _miller_rabin(self.p):
                raise GroupError("p is not prime")
            if not _miller_rabin(self.q):
                raise GroupError("q is not prime")
            if (self.p - 1) % self.q != 0:
                raise GroupError("q does not divide p - 1")

    def is_element(self, e: int, subgroup_check: bool = False) -> bool:
        if not (1 <= e < self.p):
            return False
        return pow(e, self.q, self.p) == 1 if subgroup_check else True

    def encode_element(self, e: int) -> bytes:
        return e.to_bytes(self.element_bytes, "big")

    def decode_element(self, b: bytes) -> int:
        if len(b) != self.element_bytes:
            raise GroupError(f"element encoding must be {self.element_bytes} bytes")
        e = int.from_bytes(b, "big")
        if not self.is_element(e):
            raise GroupError("decoded value is not in [1, p)")
        return e

    def encode_scalar(self, s: int) -> bytes:
        return (s % self.q).to_bytes(self.scalar_bytes, "big")

    def decode_scalar(self, b: bytes) -> int:
        if len(b) != self.scalar_bytes:
            raise GroupError(f"scalar encoding must be {self.scalar_bytes} bytes")
        s = int.from_bytes(b, "big")
        if s >= self.q:
            raise GroupError("scalar out of range")
        return s

    def random_scalar(self, rng: Random) -> int:
        return rng.randrange(1, self.q)

    def pow_g(self, e: int) -> int:
        return _fixed_base(self, self.g).pow(e % self.q)

    def pow_h(self, e: int) -> int:
        return _fixed_base(self, self.h).pow(e % self.q)


class _FixedBasePow:
    """Windowed fixed-base exponentiation table (4-bit windows).

    pow(e) costs ~q_bits/4 modular multiplications instead of a full modexp;
    the table is built once per (params, base) and shared read-only.
    """

    __slots__ = ("p", "table", "windows")

    def __init__(self, p: int, q: int, base: int):
        self.p = p
        self.windows = (q.bit_length() + 3) // 4
        table = []
        b = base
        for _ in range(self.windows):
            row = [1] * 16
            for d in range(1, 16):
                row[d] = row[d - 1] * b % p
            table.append(row)
            b = row[15] * b % p  # base^(16^(i+1))
        self.table = table

    def pow(self, e: int) -> int:
        acc = 1
        i = 0
        while e:
            d = e & 0xF
            if d:
                acc = acc * self.table[i][d] % self.p
            e >>= 4
            i += 1
        return acc


@lru_cache(maxsize=16)
def _fixed_base_cached(p: int, q: int, base: int) -> _FixedBasePow:
    return _FixedBasePow(p, q, base)


def _fixed_base(params: GroupParams, base: int) -> _FixedBasePow:
    return _fixed_base_cached(params.p, params.q, base)


@lru_cache(maxsize=4)
def test_params(plaintext_bound: int = DEFAULT_BOUND) -> GroupParams:
    return GroupParams("test", _P_TEST, _Q_TEST, _G_TEST, _H_TEST, plaintext_bound)


@lru_cache(maxsize=4)
def secure_params(plaintext_bound: int = DEFAULT_BOUND) -> GroupParams:
    return GroupParams("secure", _P_SECURE, _Q_SECURE, _G_SECURE, _H_SECURE, plaintext_bound)


def params_for(profile: str, plaintext_bound: int = DEFAULT_BOUND) -> GroupParams:
    if profile == "test":
        return test_params(plaintext_bound)
    if profile == "secure":
        return secure_params(plaintext_bound)
    raise GroupError(f"unknown profile {profile!r}")


@dataclass(frozen=True)
class PublicKey:
    params: GroupParams
    y: int

    def __post_init__(self):
        if not self.params.is_element(self.y):
            raise GroupError("public key is not a group element")

    def to_bytes(self) -> bytes:
        return self.params.encode_element(self.y)


@dataclass(frozen=True)
class KeyPair:
    """Device-resident key pair; only PublicKey ever crosses the wire."""

    params: GroupParams
    x: int
    y: int

    def __post_init__(self):
        if not (1 <= self.x < self.params.q):
            raise GroupError("secret scalar out of range")
        if self.params.pow_g(self.x) != self.y:
            raise GroupError("public element inconsistent with secret scalar")

    @property
    def public_key(self) -> PublicKey:
        return PublicKey(self.params, self.y)


def keygen(params: GroupParams, rng: Random) -> KeyPair:
    """Fresh key pair with uniformly random secret in [1, q-1]."""
    x = params.random_scalar(rng)
    return KeyPair(params, x, params.pow_g(x))


@dataclass(frozen=True)
class Ciphertext:
    """ElGamal pair (c1, c2) = (g^r, pk^r * g^v) encrypting v in the exponent."""

    pk: PublicKey
    c1: int
    c2: int

    def to_bytes(self) -> bytes:
        enc = self.pk.params.encode_element
        return enc(self.c1) + enc(self.c2)


def encrypt(pk: PublicKey, v: int, rng: Random) -> Ciphertext:
    """Encrypt integer v; |v| must be within the configured plaintext bound."""
    params = pk.params
    if abs(v) > params.plaintext_bound:
        raise PlaintextRangeError(f"|{v}| exceeds bound {params.plaintext_bound}")
    r = params.random_scalar(rng)
    c1 = params.pow_g(r)
    c2 = pow(pk.y, r, params.p) * params.pow_g(v) % params.p
    return Ciphertext(pk, c1, c2)


def _same_key(a: Ciphertext, b: Ciphertext) -> None:
    if a.pk != b.pk:
        raise KeyMismatchError("ciphertexts under different public keys")


def add(a: Ciphertext, b: Ciphertext) -> Ciphertext:
    """Dec(add(Enc(u), Enc(v))) == u + v."""
    _same_key(a, b)
    p = a.pk.params.p
    return Ciphertext(a.pk, a.c1 * b.c1 % p, a.c2 * b.c2 % p)


def scalar_mul(a: Ciphertext, k: int) -> Ciphertext:
    """Dec(scalar_mul(Enc(u), k)) == k * u (may overflow the decryption bound)."""
    p = a.pk.params.p
    return Ciphertext(a.pk, pow(a.c1, k, p), pow(a.c2, k, p))


def rerandomize(a: Ciphertext, rng: Random) -> Ciphertext:
    """Fresh-looking ciphertext of the same plaintext."""
    return add(a, encrypt(a.pk, 0, rng))


class _BsgsTable:
    """Baby-step table for solving g^v = m with v in [-B, B]."""

    __slots__ = ("params", "bound", "step", "baby", "giant_inv")

    def __init__(self, params: GroupParams, bound: int):
        self.params = params
        self.bound = bound
        self.step = math.isqrt(2 * bound + 1) + 1
        baby = {}
        acc = 1
        g = params.g
        p = params.p
        for j in range(self.step):
            baby.setdefault(acc, j)
            acc = acc * g % p
        self.baby = baby
        # acc == g^step here; its inverse is the giant-step factor
        self.giant_inv = pow(acc, -1, p)

    def solve(self, m: int) -> int:
        # Shift so the unknown exponent w = v + B lies in [0, 2B].
        y = m * self.params.pow_g(self.bound) % self.params.p
        n_giant = (2 * self.bound) // self.step + 1
        p = self.params.p
        for i in range(n_giant + 1):
            j = self.baby.get(y)
            if j is not None:
                w = i * self.step + j
                if w <= 2 * self.bound:
                    return w - self.bound
            y = y * self.giant_inv % p
        raise DecryptionRangeError(
            f"no plaintext in [-{self.bound}, {self.bound}] matches ciphertext"
        )


@lru_cache(maxsize=8)
def _bsgs_cached(p: int, q: int, g: int, h: int, profile: str, pb: int, bound: int) -> _BsgsTable:
    return _BsgsTable(GroupParams(profile, p, q, g, h, pb), bound)


def bsgs_table(params: GroupParams, bound: int) -> _BsgsTable:
    return _bsgs_cached(
        params.p, params.q, params.g, params.h, params.profile, params.plaintext_bound, bound
    )


def decrypt(sk: KeyPair, ct: Ciphertext, bound: int | None = None) -> int:
    """Recover the exponent plaintext, assuming it lies in [-bound, bound].

    Raises DecryptionRangeError when nothing in range matches, which is how
    homomorphic overflow and tampering surface. c1/c2 get a full subgroup
    check first: the secret key never touches non-subgroup input.
    """
    params = sk.params
    if ct.pk.params != params:
        raise KeyMismatchError("ciphertext from a different group")
    if not (
        params.is_element(ct.c1, subgroup_check=True)
        and params.is_element(ct.c2, subgroup_check=True)
    ):
        raise GroupError("ciphertext elements outside the prime-order subgroup")
    b = params.plaintext_bound if bound is None else bound
    m = ct.c2 * pow(ct.c1, -sk.x % params.q, params.p) % params.p
    return bsgs_table(params, b).solve(m)


@dataclass(frozen=True)
class EncryptedTemplate:
    """Per-element encryption of a quantized template, all under one key."""

    cts: tuple[Ciphertext, ...]
    modality: str
    owner_id: int | None = None

    def __post_init__(self):
        if len(self.cts) < 2:
            raise TemplateShapeError("encrypted template needs d >= 2")
        pk = self.cts[0].pk
        if any(ct.pk != pk for ct in self.cts):
            raise KeyMismatchError("encrypted template mixes public keys")

    @property
    def dim(self) -> int:
        return len(self.cts)

    @property
    def pk(self) -> PublicKey:
        return self.cts[0].pk

    def with_owner(self, owner_id: int) -> "EncryptedTemplate":
        return EncryptedTemplate(self.cts, self.modality, owner_id)


def encrypt_template(pk: PublicKey, qt: QuantizedTemplate, rng: Random) -> EncryptedTemplate:
    """Element-wise encryption of an enrollment template."""
    return EncryptedTemplate(
        cts=tuple(encrypt(pk, v, rng) for v in qt.values), modality=qt.modality
    )


def encrypted_inner_product(et: EncryptedTemplate, at: QuantizedTemplate) -> Ciphertext:
    """Homomorphic inner product of an encrypted template with a plaintext probe.

    Decrypts (under the template owner's key) to inner_product_int(plain, at)
    exactly; the scheme is noise-free.
    """
    if et.dim != at.dim:
        raise TemplateShapeError(f"dimension mismatch: {et.dim} vs {at.dim}")
    if et.modality != at.modality:
        raise TemplateShapeError(f"modality mismatch: {et.modality} vs {at.modality}")
    p = et.pk.params.p
    acc1, acc2 = 1, 1
    for ct, k in zip(et.cts, at.values):
        if k == 0:
            continue
        acc1 = acc1 * pow(ct.c1, k, p) % p
        acc2 = acc2 * pow(ct.c2, k, p) % p
    return Ciphertext(et.pk, acc1, acc2)


MODALITY_CODES = {"face": 0, "voice": 1}
MODALITY_NAMES = {v: k for k, v in MODALITY_CODES.items()}


def quantized_element_bytes(scale: int) -> int:
    """Bytes per element of the canonical signed encoding for range [-Q, Q]."""
    return ((2 * scale + 1).bit_length() + 7) // 8


def quantized_to_bytes(qt: QuantizedTemplate) -> bytes:
    """Canonical template bytes: d(2 BE) | modality(1) | two's-complement values."""
    w = quantized_element_bytes(qt.scale)
    out = [qt.dim.to_bytes(2, "big"), bytes([MODALITY_CODES[qt.modality]])]
    out += [v.to_bytes(w, "big", signed=True) for v in qt.values]
    return b"".join(out)


def quantized_serialized_size(dim: int, scale: int) -> int:
    return 3 + dim * quantized_element_bytes(scale)


def template_to_bytes(et: EncryptedTemplate) -> bytes:
    """Canonical encrypted-template bytes: d(2 BE) | modality(1) | d x (c1 | c2)."""
    out = [et.dim.to_bytes(2, "big"), bytes([MODALITY_CODES[et.modality]])]
    out += [ct.to_bytes() for ct in et.cts]
    return b"".join(out)


def template_from_bytes(data: bytes, pk: PublicKey) -> EncryptedTemplate:
    params = pk.params
    if len(data) < 3:
        raise GroupError("encrypted template too short")
    dim = int.from_bytes(data[:2], "big")
    code = data[2]
    if code not in MODALITY_NAMES:
        raise GroupError(f"unknown modality code {code}")
    w = params.element_bytes
    body = data[3:]
    if len(body) != dim * 2 * w:
        raise GroupError("encrypted template length inconsistent with header")
    cts = []
    for i in range(dim):
        c1 = params.decode_element(body[2 * i * w : (2 * i + 1) * w])
        c2 = params.decode_element(body[(2 * i + 1) * w : (2 * i + 2) * w])
        cts.append(Ciphertext(pk, c1, c2))
    return EncryptedTemplate(tuple(cts), MODALITY_NAMES[code])


def template_serialized_size(params: GroupParams, dim: int) -> int:
    return 3 + dim * 2 * params.element_bytes


def ciphertext_expansion(et: EncryptedTemplate, scale: int = 127) -> float:
    """Size ratio of the encrypted template to its plaintext serialization.

    Entirely a function of group element width vs. the fixed-point element
    width, so it can be computed without the plaintext template.
    """
    return len(template_to_bytes(et)) / quantized_serialized_size(et.dim, scale)
