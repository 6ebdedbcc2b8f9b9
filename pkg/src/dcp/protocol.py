"""Event-driven state machines for the dashcam and device roles.

Both machines are sans-IO: they consume events (raw inbound frames, capture
events, timers) and return outbound messages; the simulator owns clocks and
delivery. Malformed or out-of-place input is audited and dropped, never
raised, so a hostile peer cannot crash either side.

Trust boundary: the dashcam state holds only public keys, encrypted templates,
and outstanding challenge ciphertexts. No secret key, plaintext template, or
decrypted score type is reachable from DashcamState; match/non-match bits
arrive exclusively as validated zero-knowledge proofs. Thresholds live
device-side; the dashcam learns each device's threshold only as the public
statement inside its proofs.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from random import Random
from typing import Callable

from .command import PaymentCommand
from .embedding import QuantizedTemplate
from .errors import CannotProveError, DecodeError
from .he import (
    Ciphertext,
    EncryptedTemplate,
    GroupParams,
    KeyPair,
    PublicKey,
    encrypt_template,
    encrypted_inner_product,
    rerandomize,
    template_to_bytes,
)
from .wire import (
    NONCE_LEN,
    ConnectAccept,
    ConnectRequest,
    EnrollmentTransfer,
    PaymentAck,
    PaymentRequest,
    ProtocolMessage,
    RecourseNotice,
    ScoreChallenge,
    ScoreProof,
    decode,
)
from .zkp import MatchProof, MatchResult, ProofContext, Threshold, prove_match, verify_match

DEFAULT_TIMEOUT_S = 5.0


@dataclass(frozen=True)
class AuditRecord:
    time: float
    actor: str
    event: str
    detail: str = ""

    def to_json_line(self) -> str:
        return json.dumps(
            {"time": self.time, "actor": self.actor, "event": self.event, "detail": self.detail},
            sort_keys=True,
        )


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Inbound:
    """A raw frame arrived on a link."""

    link: int
    frame: bytes
    now: float = 0.0


@dataclass(frozen=True)
class FaceCapture:
    """The in-cabin camera produced face templates (possibly none)."""

    templates: tuple[QuantizedTemplate, ...]
    now: float = 0.0


@dataclass(frozen=True)
class Timer:
    now: float


@dataclass(frozen=True)
class StartConnect:
    """Device-side kick-off: initiate the session handshake."""

    now: float = 0.0


Event = Inbound | FaceCapture | Timer | StartConnect
Outbound = tuple[int, ProtocolMessage]  # (link, message)


class DecisionOutcome(enum.Enum):
    UNIQUE_PAYER = "unique_payer"
    NO_MATCH = "no_match"
    MULTIPLE_MATCHES = "multiple_matches"


@dataclass(frozen=True)
class PayerDecision:
    outcome: DecisionOutcome
    payer_id: int | None
    matched: tuple[int, ...]
    audit: tuple[AuditRecord, ...] = ()

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.value,
            "payer_id": self.payer_id,
            "matched": list(self.matched),
        }


@dataclass(frozen=True)
class PaymentReceipt:
    """Simulated payment result; no real rails are involved."""

    receipt_id: str
    device_id: int
    use_case: str
    slot: int | None
    credential: str
    status: str = "simulated"

    def to_dict(self) -> dict:
        return {
            "receipt_id": self.receipt_id,
            "device_id": self.device_id,
            "use_case": self.use_case,
            "slot": self.slot,
            "credential": self.credential,
            "status": self.status,
        }


# ---------------------------------------------------------------------------
# Dashcam role
# ---------------------------------------------------------------------------


@dataclass
class RosterEntry:
    device_id: int
    link: int
    pk: PublicKey | None = None
    et_face: EncryptedTemplate | None = None
    et_voice: EncryptedTemplate | None = None

    @property
    def enrolled(self) -> bool:
        return self.pk is not None and self.et_face is not None and self.et_voice is not None


@dataclass
class PendingChallenge:
    device_id: int
    modality: str
    round_id: int
    ciphertext_bytes: bytes  # canonical c1 | c2, kept for proof verification
    sent_at: float


@dataclass
class RoundState:
    round_id: int
    modality: str
    outstanding: dict[int, set[bytes]]  # device -> nonces still unanswered
    results: dict[int, list[bool]]  # device -> validated match bits
    applied: set[int] = field(default_factory=set)

    def device_done(self, device_id: int) -> bool:
        return not self.outstanding.get(device_id)

    def complete(self) -> bool:
        return all(not v for v in self.outstanding.values())


@dataclass
class DashcamState:
    """Verifier-side session state: ciphertexts, public keys, proofs - nothing else."""

    params: GroupParams
    rng: Random
    session_nonce: bytes
    timeout_s: float = DEFAULT_TIMEOUT_S
    now: float = 0.0
    roster: dict[int, RosterEntry] = field(default_factory=dict)  # device_id -> entry
    link_to_device: dict[int, int] = field(default_factory=dict)
    candidates: dict[int, None] = field(default_factory=dict)  # ordered set of device ids
    pending: dict[bytes, PendingChallenge] = field(default_factory=dict)
    rounds: dict[int, RoundState] = field(default_factory=dict)
    next_round_id: int = 0
    payment_pending: int | None = None
    receipts: list[PaymentReceipt] = field(default_factory=list)
    audit: list[AuditRecord] = field(default_factory=list)

    def log(self, event: str, detail: str = "") -> None:
        self.audit.append(AuditRecord(self.now, "dashcam", event, detail))

    def candidate_ids(self) -> tuple[int, ...]:
        return tuple(self.candidates)

    def state_dump(self) -> bytes:
        """Canonical serialization of everything the dashcam retains.

        Used by the privacy scan: the dump must never contain a device's
        plaintext template or secret key bytes.
        """
        parts = [self.session_nonce]
        for device_id in sorted(self.roster):
            e = self.roster[device_id]
            parts.append(device_id.to_bytes(8, "big"))
            if e.pk is not None:
                parts.append(e.pk.to_bytes())
            if e.et_face is not None:
                parts.append(template_to_bytes(e.et_face))
            if e.et_voice is not None:
                parts.append(template_to_bytes(e.et_voice))
        for nonce in sorted(self.pending):
            parts.append(nonce)
            parts.append(self.pending[nonce].ciphertext_bytes)
        for device_id in self.candidates:
            parts.append(device_id.to_bytes(8, "big"))
        parts.extend(r.to_json_line().encode() for r in self.audit)
        return b"".join(parts)


def make_dashcam(
    params: GroupParams, rng: Random, timeout_s: float = DEFAULT_TIMEOUT_S
) -> DashcamState:
    return DashcamState(
        params=params, rng=rng, session_nonce=rng.randbytes(NONCE_LEN), timeout_s=timeout_s
    )


def _fresh_device_id(state: DashcamState) -> int:
    while True:
        device_id = state.rng.getrandbits(64)
        if device_id and device_id not in state.roster:
            return device_id


def dashcam_step(state: DashcamState, event: Event) -> tuple[DashcamState, list[Outbound]]:
    """Advance the dashcam machine; state is updated in place and returned.

    Deterministic: the same state and event sequence yields the same outputs
    for a fixed rng seed. Undecodable or out-of-place messages are audited
    and dropped.
    """
    if isinstance(event, Inbound):
        state.now = max(state.now, event.now)
        return state, _dashcam_inbound(state, event)
    if isinstance(event, FaceCapture):
        state.now = max(state.now, event.now)
        return prescreen_faces(state, event.templates)
    if isinstance(event, Timer):
        state.now = max(state.now, event.now)
        _expire_pending(state)
        return state, []
    state.log("unexpected-event", type(event).__name__)
    return state, []


def _dashcam_inbound(state: DashcamState, event: Inbound) -> list[Outbound]:
    try:
        msg = decode(event.frame, state.params)
    except DecodeError as exc:
        state.log("decode-error", f"link={event.link} kind={exc.kind}")
        return []

    if isinstance(msg, ConnectRequest):
        existing = state.link_to_device.get(event.link)
        if existing is not None:
            state.log("reconnect", f"device={existing}")
            return [(event.link, ConnectAccept(existing, state.session_nonce))]
        device_id = _fresh_device_id(state)
        state.roster[device_id] = RosterEntry(device_id=device_id, link=event.link)
        state.link_to_device[event.link] = device_id
        state.log("connect", f"device={device_id}")
        return [(event.link, ConnectAccept(device_id, state.session_nonce))]

    if isinstance(msg, EnrollmentTransfer):
        entry = state.roster.get(msg.device_id)
        if entry is None or entry.link != event.link:
            state.log("enrollment-rejected", f"unknown device {msg.device_id}")
            return []
        if not state.params.is_element(msg.pk.y, subgroup_check=True):
            state.log("enrollment-rejected", f"device={msg.device_id} bad public key")
            return []
        entry.pk = msg.pk
        entry.et_face = msg.et_face.with_owner(msg.device_id)
        entry.et_voice = msg.et_voice.with_owner(msg.device_id)
        state.log("enrolled", f"device={msg.device_id} d={msg.et_face.dim}")
        return []

    if isinstance(msg, ScoreProof):
        _handle_score_proof(state, event.link, msg)
        return []

    if isinstance(msg, PaymentAck):
        if state.payment_pending == msg.device_id:
            state.payment_pending = None
            state.log("payment-acked", f"device={msg.device_id}")
        else:
            state.log("unexpected-payment-ack", f"device={msg.device_id}")
        return []

    if isinstance(msg, RecourseNotice):
        state.log("device-recourse", f"link={event.link} reason={msg.reason}")
        return []

    state.log("unexpected-message", type(msg).__name__)
    return []


def _handle_score_proof(state: DashcamState, link: int, msg: ScoreProof) -> None:
    nonce = msg.proof.context.nonce
    pend = state.pending.pop(nonce, None)
    if pend is None:
        state.log("unexpected-proof", f"device={msg.device_id} (replayed or expired nonce)")
        return
    entry = state.roster.get(pend.device_id)
    if (
        entry is None
        or entry.link != link
        or msg.device_id != pend.device_id
        or msg.proof.context.device_id != pend.device_id
        or msg.proof.context.modality != pend.modality
        or entry.pk is None
    ):
        state.log("proof-mismatch", f"device={msg.device_id} nonce round={pend.round_id}")
        _record_result(state, pend, nonce, False)
        return
    ew = state.params.element_bytes
    ct_bytes = pend.ciphertext_bytes
    ct = Ciphertext(
        entry.pk,
        int.from_bytes(ct_bytes[:ew], "big"),
        int.from_bytes(ct_bytes[ew:], "big"),
    )
    context = ProofContext(pend.device_id, pend.modality, nonce)
    result = verify_match(entry.pk, ct, Threshold(msg.proof.threshold), msg.proof, context)
    if result == MatchResult.INVALID:
        state.log("invalid-proof", f"device={pend.device_id} round={pend.round_id}")
        _record_result(state, pend, nonce, False)
        return
    bit = result == MatchResult.MATCH
    state.log(
        "proof-verified",
        f"device={pend.device_id} modality={pend.modality} match={bit}",
    )
    _record_result(state, pend, nonce, bit)


def _record_result(state: DashcamState, pend: PendingChallenge, nonce: bytes, bit: bool) -> None:
    rnd = state.rounds.get(pend.round_id)
    if rnd is None:
        return
    rnd.results.setdefault(pend.device_id, []).append(bit)
    rnd.outstanding.get(pend.device_id, set()).discard(nonce)
    _apply_round_membership(state, rnd, pend.device_id)


def _apply_round_membership(state: DashcamState, rnd: RoundState, device_id: int) -> None:
    if rnd.modality != "face" or device_id in rnd.applied or not rnd.device_done(device_id):
        return
    rnd.applied.add(device_id)
    matched = any(rnd.results.get(device_id, []))
    if matched:
        if device_id not in state.candidates:
            state.candidates[device_id] = None
            state.log("candidate-added", f"device={device_id} round={rnd.round_id}")
    else:
        if device_id in state.candidates:
            del state.candidates[device_id]
            state.log("candidate-removed", f"device={device_id} round={rnd.round_id}")


def _expire_pending(state: DashcamState) -> None:
    expired = [
        nonce
        for nonce, pend in state.pending.items()
        if pend.sent_at + state.timeout_s <= state.now
    ]
    for nonce in expired:
        pend = state.pending.pop(nonce)
        state.log(
            "challenge-timeout",
            f"device={pend.device_id} modality={pend.modality} round={pend.round_id}",
        )
        _record_result(state, pend, nonce, False)


def _issue_challenges(
    state: DashcamState,
    device_ids: list[int],
    modality: str,
    probes: tuple[QuantizedTemplate, ...],
) -> tuple[int, list[Outbound]]:
    round_id = state.next_round_id
    state.next_round_id += 1
    rnd = RoundState(round_id=round_id, modality=modality, outstanding={}, results={})
    state.rounds[round_id] = rnd
    outbound: list[Outbound] = []
    for device_id in device_ids:
        entry = state.roster[device_id]
        et = entry.et_face if modality == "face" else entry.et_voice
        rnd.outstanding[device_id] = set()
        rnd.results[device_id] = []
        for probe in probes:
            ct = rerandomize(encrypted_inner_product(et, probe), state.rng)
            nonce = state.rng.randbytes(NONCE_LEN)
            state.pending[nonce] = PendingChallenge(
                device_id=device_id,
                modality=modality,
                round_id=round_id,
                ciphertext_bytes=ct.to_bytes(),
                sent_at=state.now,
            )
            rnd.outstanding[device_id].add(nonce)
            outbound.append(
                (entry.link, ScoreChallenge.from_ciphertext(modality, nonce, ct))
            )
    return round_id, outbound


def prescreen_faces(
    state: DashcamState, captured: tuple[QuantizedTemplate, ...]
) -> tuple[DashcamState, list[Outbound]]:
    """Start a face round: one challenge per enrolled device per captured face.

    A device joins the candidate set iff any captured face yields a validated
    match; a device whose every face challenge comes back non-match leaves.
    With no captured faces, no challenges are issued and the set is unchanged.
    """
    enrolled = [d for d, e in state.roster.items() if e.enrolled]
    if not captured or not enrolled:
        state.log("prescreen-skipped", f"faces={len(captured)} enrolled={len(enrolled)}")
        return state, []
    round_id, outbound = _issue_challenges(state, enrolled, "face", tuple(captured))
    state.log("prescreen-start", f"round={round_id} faces={len(captured)} devices={len(enrolled)}")
    return state, outbound


Exchange = Callable[[list[Outbound]], list[tuple[int, bytes]]]


def identify_payer(
    state: DashcamState,
    voice: QuantizedTemplate,
    exchange: Exchange,
    now: float | None = None,
) -> PayerDecision:
    """Voice round over the candidate set; returns the payer decision.

    exchange delivers the outgoing challenges and returns whatever reply
    frames arrive in time (the simulator's transport pump). Devices that do
    not answer count as non-matches once the round times out.
    """
    if now is not None:
        state.now = max(state.now, now)
    audit_start = len(state.audit)
    candidates = [d for d in state.candidates if state.roster[d].enrolled]
    if not candidates:
        state.log("identify-no-candidates")
        return PayerDecision(
            DecisionOutcome.NO_MATCH, None, (), tuple(state.audit[audit_start:])
        )
    round_id, outbound = _issue_challenges(state, candidates, "voice", (voice,))
    state.log("identify-start", f"round={round_id} candidates={len(candidates)}")
    for link, frame in exchange(outbound):
        dashcam_step(state, Inbound(link=link, frame=frame, now=state.now))
    dashcam_step(state, Timer(now=state.now + state.timeout_s))

    rnd = state.rounds[round_id]
    matched = tuple(d for d in candidates if any(rnd.results.get(d, [])))
    if len(matched) == 1:
        outcome, payer = DecisionOutcome.UNIQUE_PAYER, matched[0]
    elif not matched:
        outcome, payer = DecisionOutcome.NO_MATCH, None
    else:
        outcome, payer = DecisionOutcome.MULTIPLE_MATCHES, None
    state.log("identify-decision", f"outcome={outcome.value} matched={list(matched)}")
    return PayerDecision(outcome, payer, matched, tuple(state.audit[audit_start:]))


def request_payment(
    state: DashcamState, decision: PayerDecision, command: PaymentCommand
) -> list[Outbound]:
    """Forward order details to the unique payer, or notify everyone of recourse."""
    if decision.outcome == DecisionOutcome.UNIQUE_PAYER:
        entry = state.roster[decision.payer_id]
        state.payment_pending = decision.payer_id
        state.log("payment-request", f"device={decision.payer_id} use_case={command.use_case}")
        return [(entry.link, PaymentRequest(decision.payer_id, command))]
    reason = (
        "no_match" if decision.outcome == DecisionOutcome.NO_MATCH else "multiple_matches"
    )
    state.log("recourse", reason)
    return [
        (e.link, RecourseNotice(reason, "retry or pay another way"))
        for e in state.roster.values()
    ]


# ---------------------------------------------------------------------------
# Device role
# ---------------------------------------------------------------------------


@dataclass
class DeviceState:
    """Prover-side state: key pair, plaintext templates, thresholds, credential."""

    params: GroupParams
    rng: Random
    keypair: KeyPair
    face_template: QuantizedTemplate | None
    voice_template: QuantizedTemplate | None
    enc_face: EncryptedTemplate | None
    enc_voice: EncryptedTemplate | None
    thresholds: dict[str, Threshold]
    credential: str
    device_id: int | None = None
    session_nonce: bytes | None = None
    now: float = 0.0
    seen_nonces: set[bytes] = field(default_factory=set)
    receipts: list[PaymentReceipt] = field(default_factory=list)
    audit: list[AuditRecord] = field(default_factory=list)

    @property
    def enrolled(self) -> bool:
        return self.enc_face is not None and self.enc_voice is not None

    def log(self, event: str, detail: str = "") -> None:
        name = f"device-{self.device_id}" if self.device_id is not None else "device-?"
        self.audit.append(AuditRecord(self.now, name, event, detail))


def enroll_device(
    params: GroupParams,
    face: QuantizedTemplate | None,
    voice: QuantizedTemplate | None,
    thresholds: dict[str, Threshold],
    rng: Random,
    credential: str = "tok_sim",
) -> DeviceState:
    """On-device enrollment: key generation plus template encryption.

    Passing face/voice as None models an un-enrolled device that connects but
    never transfers templates.
    """
    from .he import keygen

    kp = keygen(params, rng)
    enc_face = encrypt_template(kp.public_key, face, rng) if face is not None else None
    enc_voice = encrypt_template(kp.public_key, voice, rng) if voice is not None else None
    return DeviceState(
        params=params,
        rng=rng,
        keypair=kp,
        face_template=face,
        voice_template=voice,
        enc_face=enc_face,
        enc_voice=enc_voice,
        thresholds=dict(thresholds),
        credential=credential,
    )


def device_step(state: DeviceState, event: Event) -> tuple[DeviceState, list[ProtocolMessage]]:
    """Advance the device machine; same contract as dashcam_step."""
    if isinstance(event, StartConnect):
        state.now = max(state.now, event.now)
        return state, [ConnectRequest()]
    if isinstance(event, Timer):
        state.now = max(state.now, event.now)
        return state, []
    if not isinstance(event, Inbound):
        state.log("unexpected-event", type(event).__name__)
        return state, []
    state.now = max(state.now, event.now)
    try:
        msg = decode(event.frame, state.params)
    except DecodeError as exc:
        state.log("decode-error", f"kind={exc.kind}")
        return state, []

    if isinstance(msg, ConnectAccept):
        state.device_id = msg.device_id
        state.session_nonce = msg.session_nonce
        state.log("connected", f"assigned={msg.device_id}")
        if not state.enrolled:
            state.log("not-enrolled", "no templates to transfer")
            return state, []
        return state, [
            EnrollmentTransfer(
                device_id=msg.device_id,
                pk=state.keypair.public_key,
                et_face=state.enc_face,
                et_voice=state.enc_voice,
            )
        ]

    if isinstance(msg, ScoreChallenge):
        return state, _device_challenge(state, msg)

    if isinstance(msg, PaymentRequest):
        if state.device_id is None or msg.device_id != state.device_id:
            state.log("payment-rejected", "addressed to another device")
            return state, []
        receipt = PaymentReceipt(
            receipt_id=state.rng.randbytes(NONCE_LEN).hex(),
            device_id=state.device_id,
            use_case=msg.command.use_case,
            slot=msg.command.slot,
            credential=state.credential,
        )
        state.receipts.append(receipt)
        state.log("payment-made", f"use_case={msg.command.use_case} slot={msg.command.slot}")
        return state, [PaymentAck(state.device_id, bytes.fromhex(receipt.receipt_id))]

    if isinstance(msg, RecourseNotice):
        state.log("recourse-received", msg.reason)
        return state, []

    state.log("unexpected-message", type(msg).__name__)
    return state, []


def _device_challenge(state: DeviceState, msg: ScoreChallenge) -> list[ProtocolMessage]:
    if state.device_id is None:
        state.log("challenge-before-connect")
        return []
    if msg.nonce in state.seen_nonces:
        state.log("replayed-challenge", f"modality={msg.modality}")
        return []
    state.seen_nonces.add(msg.nonce)
    ct = msg.ciphertext(state.keypair.public_key)
    context = ProofContext(state.device_id, msg.modality, msg.nonce)
    try:
        proof: MatchProof = prove_match(
            state.keypair, ct, state.thresholds[msg.modality], context, state.rng
        )
    except CannotProveError as exc:
        state.log("decryption-failure", str(exc))
        return [RecourseNotice("decryption_failure", f"device {state.device_id}: {exc}")]
    state.log("proof-sent", f"modality={msg.modality} match={proof.is_match}")
    return [ScoreProof(state.device_id, proof)]
