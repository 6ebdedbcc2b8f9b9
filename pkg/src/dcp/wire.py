"""Length-prefixed wire format for dashcam/device messages.

Frame layout:

    length (4B, big-endian) | type (1B) | canonical payload

The length counts the type byte plus payload. All multi-byte integers are
big-endian; group elements and scalars use the fixed-width encodings of the
active GroupParams, so decoding requires the params in use. decode(encode(m))
is the identity for every message type.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .command import USE_CASES, PaymentCommand
from .errors import CommandError, DecodeError, GroupError
from .he import (
    MODALITY_CODES,
    MODALITY_NAMES,
    Ciphertext,
    EncryptedTemplate,
    GroupParams,
    PublicKey,
    template_from_bytes,
    template_to_bytes,
)
from .zkp import MatchProof, proof_from_bytes, proof_to_bytes

NONCE_LEN = 16
MAX_FRAME = 1 << 24  # 16 MiB; anything larger is not a legal frame

MSG_CONNECT_REQUEST = 0x01
MSG_CONNECT_ACCEPT = 0x02
MSG_ENROLLMENT_TRANSFER = 0x03
MSG_SCORE_CHALLENGE = 0x04
MSG_SCORE_PROOF = 0x05
MSG_PAYMENT_REQUEST = 0x06
MSG_PAYMENT_ACK = 0x07
MSG_RECOURSE_NOTICE = 0x08

RECOURSE_REASONS = ("no_match", "multiple_matches", "decryption_failure", "protocol_error")


@dataclass(frozen=True)
class ConnectRequest:
    """Device asks to join the dashcam session; carries nothing."""


@dataclass(frozen=True)
class ConnectAccept:
    device_id: int
    session_nonce: bytes


@dataclass(frozen=True)
class EnrollmentTransfer:
    device_id: int
    pk: PublicKey
    et_face: EncryptedTemplate
    et_voice: EncryptedTemplate


@dataclass(frozen=True)
class ScoreChallenge:
    modality: str
    nonce: bytes
    c1: int
    c2: int

    @classmethod
    def from_ciphertext(cls, modality: str, nonce: bytes, ct: Ciphertext) -> "ScoreChallenge":
        return cls(modality, nonce, ct.c1, ct.c2)

    def ciphertext(self, pk: PublicKey) -> Ciphertext:
        return Ciphertext(pk, self.c1, self.c2)


@dataclass(frozen=True)
class ScoreProof:
    device_id: int
    proof: MatchProof


@dataclass(frozen=True)
class PaymentRequest:
    device_id: int
    command: PaymentCommand


@dataclass(frozen=True)
class PaymentAck:
    device_id: int
    receipt_id: bytes


@dataclass(frozen=True)
class RecourseNotice:
    reason: str
    detail: str = ""


ProtocolMessage = (
    ConnectRequest
    | ConnectAccept
    | EnrollmentTransfer
    | ScoreChallenge
    | ScoreProof
    | PaymentRequest
    | PaymentAck
    | RecourseNotice
)


def _lp(b: bytes) -> bytes:
    return len(b).to_bytes(4, "big") + b


def _payload(m: ProtocolMessage, params: GroupParams | None) -> tuple[int, bytes]:
    if isinstance(m, ConnectRequest):
        return MSG_CONNECT_REQUEST, b""
    if isinstance(m, ConnectAccept):
        if len(m.session_nonce) != NONCE_LEN:
            raise ValueError(f"session nonce must be {NONCE_LEN} bytes")
        return MSG_CONNECT_ACCEPT, m.device_id.to_bytes(8, "big") + m.session_nonce
    if isinstance(m, EnrollmentTransfer):
        return MSG_ENROLLMENT_TRANSFER, b"".join(
            [
                m.device_id.to_bytes(8, "big"),
                m.pk.to_bytes(),
                _lp(template_to_bytes(m.et_face)),
                _lp(template_to_bytes(m.et_voice)),
            ]
        )
    if isinstance(m, ScoreChallenge):
        if params is None:
            raise ValueError("ScoreChallenge encoding requires group params")
        if len(m.nonce) != NONCE_LEN:
            raise ValueError(f"round nonce must be {NONCE_LEN} bytes")
        enc = params.encode_element
        return MSG_SCORE_CHALLENGE, b"".join(
            [bytes([MODALITY_CODES[m.modality]]), m.nonce, enc(m.c1), enc(m.c2)]
        )
    if isinstance(m, ScoreProof):
        if params is None:
            raise ValueError("ScoreProof encoding requires group params")
        return MSG_SCORE_PROOF, m.device_id.to_bytes(8, "big") + _lp(
            proof_to_bytes(m.proof, params)
        )
    if isinstance(m, PaymentRequest):
        c = m.command
        return MSG_PAYMENT_REQUEST, b"".join(
            [
                m.device_id.to_bytes(8, "big"),
                bytes([USE_CASES.index(c.use_case)]),
                bytes([1 if c.slot is not None else 0]),
                (c.slot or 0).to_bytes(8, "big"),
                _lp(c.transcript.encode("utf-8")),
            ]
        )
    if isinstance(m, PaymentAck):
        if len(m.receipt_id) != NONCE_LEN:
            raise ValueError(f"receipt id must be {NONCE_LEN} bytes")
        return MSG_PAYMENT_ACK, m.device_id.to_bytes(8, "big") + m.receipt_id
    if isinstance(m, RecourseNotice):
        return MSG_RECOURSE_NOTICE, bytes([RECOURSE_REASONS.index(m.reason)]) + _lp(
            m.detail.encode("utf-8")
        )
    raise TypeError(f"not a protocol message: {type(m).__name__}")


def encode(m: ProtocolMessage, params: GroupParams | None = None) -> bytes:
    """Frame a message for the wire."""
    tag, payload = _payload(m, params)
    return (1 + len(payload)).to_bytes(4, "big") + bytes([tag]) + payload


class _Reader:
    __slots__ = ("data", "pos")

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise DecodeError("payload truncated", kind="truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "big")

    def lp(self) -> bytes:
        n = int.from_bytes(self.take(4), "big")
        if n > MAX_FRAME:
            raise DecodeError("length-prefixed field too large", kind="length")
        return self.take(n)

    def expect_done(self) -> None:
        if self.pos != len(self.data):
            raise DecodeError("trailing bytes in payload", kind="malformed")


def _modality(code: int) -> str:
    if code not in MODALITY_NAMES:
        raise DecodeError(f"unknown modality code {code}", kind="malformed")
    return MODALITY_NAMES[code]


def decode(data: bytes, params: GroupParams) -> ProtocolMessage:
    """Decode exactly one frame; raises DecodeError subtypes on any defect."""
    if len(data) < 5:
        raise DecodeError(f"frame shorter than minimum: {len(data)} bytes", kind="truncated")
    (length,) = struct.unpack(">I", data[:4])
    if length < 1 or length > MAX_FRAME:
        raise DecodeError(f"illegal frame length {length}", kind="length")
    if len(data) != 4 + length:
        kind = "truncated" if len(data) < 4 + length else "length"
        raise DecodeError(
            f"frame length field says {length}, buffer holds {len(data) - 4}", kind=kind
        )
    tag = data[4]
    r = _Reader(data[5:])
    try:
        msg = _decode_payload(tag, r, params)
        r.expect_done()
        return msg
    except DecodeError:
        raise
    except (GroupError, CommandError, ValueError, IndexError, OverflowError) as exc:
        raise DecodeError(f"malformed payload for type 0x{tag:02x}: {exc}", kind="malformed")


def _decode_payload(tag: int, r: _Reader, params: GroupParams) -> ProtocolMessage:
    if tag == MSG_CONNECT_REQUEST:
        return ConnectRequest()
    if tag == MSG_CONNECT_ACCEPT:
        return ConnectAccept(device_id=r.u64(), session_nonce=r.take(NONCE_LEN))
    if tag == MSG_ENROLLMENT_TRANSFER:
        device_id = r.u64()
        pk = PublicKey(params, params.decode_element(r.take(params.element_bytes)))
        et_face = template_from_bytes(r.lp(), pk)
        et_voice = template_from_bytes(r.lp(), pk)
        return EnrollmentTransfer(device_id, pk, et_face, et_voice)
    if tag == MSG_SCORE_CHALLENGE:
        modality = _modality(r.u8())
        nonce = r.take(NONCE_LEN)
        c1 = params.decode_element(r.take(params.element_bytes))
        c2 = params.decode_element(r.take(params.element_bytes))
        return ScoreChallenge(modality, nonce, c1, c2)
    if tag == MSG_SCORE_PROOF:
        device_id = r.u64()
        return ScoreProof(device_id, proof_from_bytes(r.lp(), params))
    if tag == MSG_PAYMENT_REQUEST:
        device_id = r.u64()
        uc = r.u8()
        if uc >= len(USE_CASES):
            raise DecodeError(f"unknown use case code {uc}", kind="malformed")
        has_slot = r.u8()
        slot = r.u64()
        transcript = r.lp().decode("utf-8", errors="strict")
        return PaymentRequest(
            device_id,
            PaymentCommand(USE_CASES[uc], slot if has_slot else None, transcript),
        )
    if tag == MSG_PAYMENT_ACK:
        return PaymentAck(device_id=r.u64(), receipt_id=r.take(NONCE_LEN))
    if tag == MSG_RECOURSE_NOTICE:
        reason = r.u8()
        if reason >= len(RECOURSE_REASONS):
            raise DecodeError(f"unknown recourse reason {reason}", kind="malformed")
        return RecourseNotice(RECOURSE_REASONS[reason], r.lp().decode("utf-8"))
    raise DecodeError(f"unknown message type 0x{tag:02x}", kind="unknown-type")
