"""Scenario-driven end-to-end ride simulator.

One run wires device and dashcam state machines over simulated wireless links
and replays a full ride: connect, enrollment transfer, face prescreen(s),
trigger/parse of the spoken command, voice identification, and the simulated
payment (or recourse). Every random draw derives from the scenario seed, so
identical (scenario, seed) pairs produce byte-identical reports and traces.

A plaintext oracle pipeline (same quantized observations, no cryptography)
runs beside the encrypted protocol; the two must agree exactly because the
encryption is noise-free.
"""

from __future__ import annotations

import dataclasses
import heapq
import json
import time as _time
from dataclasses import dataclass
from random import Random

import numpy as np

from . import protocol as proto
from .command import parse_command
from .embedding import (
    IdentityProfile,
    QuantizedTemplate,
    cosine_to_score,
    inner_product_int,
    make_profiles,
    quantize,
    sample_observation,
)
from .errors import CommandError, DcpError
from .he import (
    GroupParams,
    ciphertext_expansion,
    params_for,
)
from .scenario import Scenario
from .transport import TransportProfile, dropped, profile_for, simulate_transfer
from .wire import ProtocolMessage, encode
from .zkp import Threshold


@dataclass
class World:
    """Deterministic materialization of a scenario: identities, devices, probes."""

    scenario: Scenario
    params: GroupParams
    profiles: list[IdentityProfile]
    devices: dict[int, proto.DeviceState]  # link (= passenger index) -> device
    dashcam: proto.DashcamState
    captures: list[tuple[QuantizedTemplate, ...]]  # quantized face probes per event
    voice_probe: QuantizedTemplate
    face_threshold: int
    voice_threshold: int

    def enrolled_links(self) -> list[int]:
        return [link for link, d in self.devices.items() if d.enrolled]

    def link_of_device(self, device_id: int) -> int | None:
        entry = self.dashcam.roster.get(device_id)
        return entry.link if entry else None


def build_world(scenario: Scenario) -> World:
    """Materialize identities, observations, and protocol endpoints from the seed."""
    n = len(scenario.passengers)
    ss = np.random.SeedSequence(scenario.seed)
    ss_prof, ss_obs, ss_crypto = ss.spawn(3)
    rng_prof = np.random.default_rng(ss_prof)
    rng_obs = np.random.default_rng(ss_obs)
    crypto_seeds = [int(s) for s in ss_crypto.generate_state(n + 1, dtype=np.uint64)]

    params = params_for(
        scenario.group_profile, scenario.dimension * scenario.quant_scale**2
    )

    profiles = make_profiles(
        n, scenario.dimension, rng_prof, separation=scenario.separation
    )
    profiles = [
        dataclasses.replace(p, subject_id=spec.name, noise_sigma=spec.noise_sigma)
        for p, spec in zip(profiles, scenario.passengers)
    ]
    for group in scenario.shared_voice:
        lead = profiles[group[0]]
        for idx in group[1:]:
            profiles[idx] = dataclasses.replace(profiles[idx], voice_mean=lead.voice_mean)

    q = scenario.quant_scale
    thresholds = {
        "face": Threshold(cosine_to_score(scenario.face_threshold_cos, q)),
        "voice": Threshold(cosine_to_score(scenario.voice_threshold_cos, q)),
    }

    devices: dict[int, proto.DeviceState] = {}
    for link, spec in enumerate(scenario.passengers):
        if not spec.has_device:
            continue
        face_qt = quantize(profiles[link].face_mean, q) if spec.enrolled else None
        voice_qt = quantize(profiles[link].voice_mean, q) if spec.enrolled else None
        devices[link] = proto.enroll_device(
            params,
            face_qt,
            voice_qt,
            thresholds,
            Random(crypto_seeds[link]),
            credential=f"tok_{spec.name}",
        )

    dashcam = proto.make_dashcam(params, Random(crypto_seeds[n]), timeout_s=scenario.timeout_s)

    captures = []
    for ev in scenario.capture_events:
        probes = tuple(
            quantize(sample_observation(profiles[i], "face", rng_obs, sigma=ev.sigma), q)
            for i in ev.present
        )
        captures.append(probes)
    voice_probe = quantize(
        sample_observation(
            profiles[scenario.command.speaker], "voice", rng_obs, sigma=scenario.command.sigma
        ),
        q,
    )

    return World(
        scenario=scenario,
        params=params,
        profiles=profiles,
        devices=devices,
        dashcam=dashcam,
        captures=captures,
        voice_probe=voice_probe,
        face_threshold=thresholds["face"].value,
        voice_threshold=thresholds["voice"].value,
    )


class Network:
    """Discrete-event message fabric between the dashcam and device links."""

    def __init__(self, world: World, drop_rng: Random | None = None):
        self.world = world
        self.params = world.params
        self.profiles: dict[int, TransportProfile] = {
            link: profile_for(world.scenario.transport_for(link)) for link in world.devices
        }
        self.drop_rng = drop_rng or Random(0)
        self.queue: list[tuple[float, int, str, int, bytes]] = []
        self.seq = 0
        self.clock = 0.0
        self.bytes_by_type: dict[str, int] = {}
        self.message_counts: dict[str, int] = {}
        self.arrival_by_type: dict[str, float] = {}
        self.dashcam_rx = bytearray()
        self.trace: list[dict] = []

    def _account(self, msg: ProtocolMessage, frame: bytes, src: str, dst: str, link: int,
                 arrival: float, was_dropped: bool) -> None:
        name = type(msg).__name__
        self.bytes_by_type[name] = self.bytes_by_type.get(name, 0) + len(frame)
        self.message_counts[name] = self.message_counts.get(name, 0) + 1
        if not was_dropped:
            self.arrival_by_type[name] = max(self.arrival_by_type.get(name, 0.0), arrival)
        self.trace.append(
            {
                "seq": self.seq,
                "src": src,
                "dst": dst,
                "link": link,
                "type": name,
                "dropped": was_dropped,
                "frame": frame.hex(),
            }
        )

    def send(self, dst: str, link: int, msg: ProtocolMessage, at: float) -> None:
        frame = encode(msg, self.params)
        profile = self.profiles[link]
        arrival = at + simulate_transfer(profile, len(frame))
        drop = dropped(profile, self.drop_rng)
        src = "dashcam" if dst == "M" else f"device-{link}"
        dst_name = f"device-{link}" if dst == "M" else "dashcam"
        self._account(msg, frame, src, dst_name, link, arrival, drop)
        self.seq += 1
        if not drop:
            heapq.heappush(self.queue, (arrival, self.seq, dst, link, frame))

    def pump(self, collect_for_dashcam: bool = False) -> list[tuple[int, bytes]]:
        """Deliver queued frames in arrival order until quiescent.

        With collect_for_dashcam, dashcam-bound frames are returned instead of
        being stepped into the dashcam (identify_payer feeds them itself).
        """
        collected: list[tuple[int, bytes]] = []
        while self.queue:
            arrival, _, dst, link, frame = heapq.heappop(self.queue)
            self.clock = max(self.clock, arrival)
            if dst == "M":
                dev = self.world.devices[link]
                _, replies = proto.device_step(dev, proto.Inbound(0, frame, now=arrival))
                for m in replies:
                    self.send("D", link, m, at=arrival)
            else:
                self.dashcam_rx.extend(frame)
                if collect_for_dashcam:
                    collected.append((link, frame))
                    continue
                _, replies = proto.dashcam_step(
                    self.world.dashcam, proto.Inbound(link, frame, now=arrival)
                )
                for out_link, m in replies:
                    self.send("M", out_link, m, at=arrival)
        return collected

    def send_all(self, outbound: list[proto.Outbound], at: float) -> None:
        for link, msg in outbound:
            self.send("M", link, msg, at=at)


@dataclass
class RideReport:
    """Outcome and accounting for one simulated ride."""

    scenario_summary: dict
    command: dict
    decision: dict | None
    oracle: dict | None
    oracle_agrees: bool
    recourse_reason: str | None
    phase_times: dict
    bytes_by_type: dict
    message_counts: dict
    total_bytes: int
    total_sim_time: float
    expansion_factor: float | None
    receipt: dict | None
    audit: list[dict]
    wall_clock_s: float = 0.0
    wall_clock_phases: dict | None = None

    def to_dict(self, include_wall_clock: bool = False) -> dict:
        d = {
            "scenario": self.scenario_summary,
            "command": self.command,
            "decision": self.decision,
            "oracle": self.oracle,
            "oracle_agrees": self.oracle_agrees,
            "recourse_reason": self.recourse_reason,
            "phase_times": self.phase_times,
            "bytes_by_type": self.bytes_by_type,
            "message_counts": self.message_counts,
            "total_bytes": self.total_bytes,
            "total_sim_time": self.total_sim_time,
            "expansion_factor": self.expansion_factor,
            "receipt": self.receipt,
            "audit": self.audit,
        }
        if include_wall_clock:
            d["wall_clock_s"] = self.wall_clock_s
            d["wall_clock_phases"] = self.wall_clock_phases
        return d

    def to_json(self, include_wall_clock: bool = False) -> str:
        return json.dumps(self.to_dict(include_wall_clock), sort_keys=True, indent=2)


def plaintext_oracle(world: World) -> dict:
    """Decision of the unencrypted pipeline on the identical quantized inputs.

    Re-derives enrollment templates from profile means and compares integer
    scores against the same thresholds with the same strict > rule and the
    same candidate-set update semantics as the protocol.
    """
    sc = world.scenario
    q = sc.quant_scale
    enrolled = [
        i
        for i, spec in enumerate(sc.passengers)
        if spec.has_device and spec.enrolled
    ]
    face_enroll = {i: quantize(world.profiles[i].face_mean, q) for i in enrolled}
    voice_enroll = {i: quantize(world.profiles[i].voice_mean, q) for i in enrolled}

    events = list(world.captures)
    if sc.refresh_prescreen_on_pay and world.captures:
        events.append(world.captures[-1])

    candidates: set[int] = set()
    for probes in events:
        if not probes or not enrolled:
            continue
        for i in enrolled:
            hit = any(
                inner_product_int(face_enroll[i], probe) > world.face_threshold
                for probe in probes
            )
            if hit:
                candidates.add(i)
            else:
                candidates.discard(i)

    try:
        parse_command(sc.command.transcript)
    except CommandError:
        return {"outcome": None, "payer": None, "matched": []}

    matched = sorted(
        i
        for i in candidates
        if inner_product_int(voice_enroll[i], world.voice_probe) > world.voice_threshold
    )
    if len(matched) == 1:
        return {"outcome": "unique_payer", "payer": matched[0], "matched": matched}
    if not matched:
        return {"outcome": "no_match", "payer": None, "matched": []}
    return {"outcome": "multiple_matches", "payer": None, "matched": matched}


def run_scenario_detailed(scenario: Scenario) -> tuple[RideReport, World, Network]:
    """Run one ride; returns the report plus world and network for inspection."""
    t_wall = _time.perf_counter()
    world = build_world(scenario)
    net = Network(world)
    dashcam = world.dashcam
    phases: dict[str, float] = {}
    wall_phases: dict[str, float] = {"build": _time.perf_counter() - t_wall}

    def mark_wall(name: str, since: float) -> None:
        wall_phases[name] = round(_time.perf_counter() - since, 6)

    # Connect + enrollment transfer (one cascade; phases split by arrival times).
    w0 = _time.perf_counter()
    for link, dev in world.devices.items():
        _, msgs = proto.device_step(dev, proto.StartConnect())
        for m in msgs:
            net.send("D", link, m, at=0.0)
    net.pump()
    t_connect = net.arrival_by_type.get("ConnectAccept", 0.0)
    t_enroll = max(net.arrival_by_type.get("EnrollmentTransfer", t_connect), t_connect)
    phases["connect"] = t_connect
    phases["enroll"] = t_enroll - t_connect
    mark_wall("connect_enroll", w0)

    # Face prescreen rounds.
    def run_prescreen(probes: tuple[QuantizedTemplate, ...]) -> None:
        _, challenges = proto.dashcam_step(
            dashcam, proto.FaceCapture(templates=probes, now=net.clock)
        )
        net.send_all(challenges, at=net.clock)
        net.pump()
        if dashcam.pending:
            _, _ = proto.dashcam_step(dashcam, proto.Timer(now=net.clock + dashcam.timeout_s))

    t0 = net.clock
    w0 = _time.perf_counter()
    for probes in world.captures:
        run_prescreen(probes)
    phases["prescreen"] = net.clock - t0
    mark_wall("prescreen", w0)

    # Trigger + parse.
    command_info: dict
    cmd = None
    try:
        cmd = parse_command(scenario.command.transcript)
        command_info = cmd.to_dict()
    except CommandError as exc:
        command_info = {"error": type(exc).__name__, "message": str(exc)}

    decision = None
    receipt = None
    recourse = None
    t0 = net.clock
    w0 = _time.perf_counter()
    if cmd is not None:
        if scenario.refresh_prescreen_on_pay and world.captures:
            run_prescreen(world.captures[-1])

        def exchange(outbound: list[proto.Outbound]) -> list[tuple[int, bytes]]:
            net.send_all(outbound, at=net.clock)
            frames = net.pump(collect_for_dashcam=True)
            dashcam.now = max(dashcam.now, net.clock)
            return frames

        decision = proto.identify_payer(dashcam, world.voice_probe, exchange, now=net.clock)
        phases["voice"] = net.clock - t0
        mark_wall("voice", w0)

        t0 = net.clock
        w0 = _time.perf_counter()
        outbound = proto.request_payment(dashcam, decision, cmd)
        net.send_all(outbound, at=net.clock)
        net.pump()
        phases["payment"] = net.clock - t0
        mark_wall("payment", w0)
        if decision.outcome != proto.DecisionOutcome.UNIQUE_PAYER:
            recourse = (
                "no_match"
                if decision.outcome == proto.DecisionOutcome.NO_MATCH
                else "multiple_matches"
            )
        else:
            payer_link = world.link_of_device(decision.payer_id)
            dev = world.devices.get(payer_link)
            if dev and dev.receipts:
                receipt = dev.receipts[-1].to_dict()
    else:
        recourse = "command_error"
        phases["voice"] = 0.0
        phases["payment"] = 0.0
        mark_wall("voice", w0)
        wall_phases["payment"] = 0.0

    oracle = plaintext_oracle(world)
    decision_dict = None
    if decision is not None:
        payer_link = (
            world.link_of_device(decision.payer_id) if decision.payer_id is not None else None
        )
        decision_dict = {
            "outcome": decision.outcome.value,
            "payer_device_id": decision.payer_id,
            "payer": payer_link,
            "matched": sorted(
                world.link_of_device(d) for d in decision.matched
            ),
        }
        agrees = (
            decision_dict["outcome"] == oracle["outcome"]
            and decision_dict["payer"] == oracle["payer"]
            and decision_dict["matched"] == oracle["matched"]
        )
    else:
        agrees = oracle["outcome"] is None

    expansion = None
    for dev in world.devices.values():
        if dev.enc_face is not None:
            expansion = round(ciphertext_expansion(dev.enc_face, scenario.quant_scale), 3)
            break

    report = RideReport(
        scenario_summary={
            "seed": scenario.seed,
            "group_profile": scenario.group_profile,
            "dimension": scenario.dimension,
            "quant_scale": scenario.quant_scale,
            "passengers": len(scenario.passengers),
            "merchant": scenario.merchant,
        },
        command=command_info,
        decision=decision_dict,
        oracle=oracle,
        oracle_agrees=agrees,
        recourse_reason=recourse,
        phase_times={k: round(v, 6) for k, v in phases.items()},
        bytes_by_type=dict(sorted(net.bytes_by_type.items())),
        message_counts=dict(sorted(net.message_counts.items())),
        total_bytes=sum(net.bytes_by_type.values()),
        total_sim_time=round(net.clock, 6),
        expansion_factor=expansion,
        receipt=receipt,
        audit=[
            {"time": round(r.time, 6), "actor": r.actor, "event": r.event, "detail": r.detail}
            for r in dashcam.audit
        ],
        wall_clock_s=_time.perf_counter() - t_wall,
        wall_clock_phases={k: round(v, 6) for k, v in wall_phases.items()},
    )
    return report, world, net


def run_scenario(scenario: Scenario) -> RideReport:
    report, _, _ = run_scenario_detailed(scenario)
    return report


# ---------------------------------------------------------------------------
# Batch harness
# ---------------------------------------------------------------------------

BATCH_COLUMNS = [
    "sweep_key",
    "sweep_value",
    "trials",
    "face_tpir",
    "face_fpir",
    "voice_tpir",
    "voice_fpir",
    "tpir",
    "fpir",
    "unique",
    "no_match",
    "multiple",
    "oracle_agreement",
]

_SWEEPABLE = ("noise_sigma", "face_threshold", "voice_threshold")


def _apply_sweep(base: Scenario, key: str, value: float) -> Scenario:
    if key == "noise_sigma":
        passengers = tuple(
            dataclasses.replace(p, noise_sigma=value) for p in base.passengers
        )
        return dataclasses.replace(base, passengers=passengers)
    if key == "face_threshold":
        return dataclasses.replace(base, face_threshold_cos=value)
    if key == "voice_threshold":
        return dataclasses.replace(base, voice_threshold_cos=value)
    raise DcpError(f"unsupported sweep key {key!r}; options: {_SWEEPABLE}")


def _trial_seed(base_seed: int, row: int, trial: int) -> int:
    return int(np.random.SeedSequence([base_seed, row, trial]).generate_state(1, np.uint64)[0])


def run_batch(
    base: Scenario,
    trials: int,
    sweep_key: str | None = None,
    sweep_values: list[float] | None = None,
) -> list[dict]:
    """TPIR/FPIR and decision metrics over repeated randomized trials.

    Each trial re-derives identities and observations from a fresh seed while
    keeping the scenario structure fixed. Comparison-level rates come from the
    integer scores; decision-level rates from the protocol outcomes (equal by
    the exactness of the encrypted pipeline, which oracle_agreement checks).
    """
    if trials < 1:
        raise DcpError("trials must be >= 1")
    if (sweep_key is None) != (not sweep_values):
        raise DcpError("sweep_key and sweep_values go together")
    points = [(sweep_key, v) for v in (sweep_values or [None])]

    rows = []
    for row_idx, (key, value) in enumerate(points):
        scenario = _apply_sweep(base, key, value) if key else base
        counts = {"unique": 0, "no_match": 0, "multiple": 0}
        agree = 0
        genuine_ok = 0
        genuine_n = 0
        impostor_hit = 0
        face = {"tp": 0, "tn": 0, "fp": 0, "fn": 0, "gen": 0, "imp": 0}
        voice = {"tp": 0, "gen": 0, "fp": 0, "imp": 0}
        for trial in range(trials):
            s = dataclasses.replace(scenario, seed=_trial_seed(scenario.seed, row_idx, trial))
            report, world, _ = run_scenario_detailed(s)
            oracle = report.oracle
            speaker = s.command.speaker
            speaker_enrolled = (
                s.passengers[speaker].has_device and s.passengers[speaker].enrolled
            )
            if report.decision is not None:
                out = report.decision["outcome"]
                counts[
                    {"unique_payer": "unique", "no_match": "no_match",
                     "multiple_matches": "multiple"}[out]
                ] += 1
                if speaker_enrolled:
                    genuine_n += 1
                    if out == "unique_payer" and report.decision["payer"] == speaker:
                        genuine_ok += 1
                if out == "unique_payer" and report.decision["payer"] != speaker:
                    impostor_hit += 1
            agree += int(report.oracle_agrees)
            _accumulate_comparison_rates(world, face, voice)
        rows.append(
            {
                "sweep_key": key or "",
                "sweep_value": value if value is not None else "",
                "trials": trials,
                "face_tpir": _ratio(face["tp"], face["gen"]),
                "face_fpir": _ratio(face["fp"], face["imp"]),
                "voice_tpir": _ratio(voice["tp"], voice["gen"]),
                "voice_fpir": _ratio(voice["fp"], voice["imp"]),
                "tpir": _ratio(genuine_ok, genuine_n),
                "fpir": _ratio(impostor_hit, trials),
                "unique": counts["unique"],
                "no_match": counts["no_match"],
                "multiple": counts["multiple"],
                "oracle_agreement": _ratio(agree, trials),
            }
        )
    return rows


def _ratio(num: int, den: int) -> float:
    return round(num / den, 6) if den else 0.0


def _accumulate_comparison_rates(world: World, face: dict, voice: dict) -> None:
    sc = world.scenario
    q = sc.quant_scale
    enrolled = [
        i for i, p in enumerate(sc.passengers) if p.has_device and p.enrolled
    ]
    face_enroll = {i: quantize(world.profiles[i].face_mean, q) for i in enrolled}
    voice_enroll = {i: quantize(world.profiles[i].voice_mean, q) for i in enrolled}
    for ev, probes in zip(sc.capture_events, world.captures):
        for i in enrolled:
            for j, probe in zip(ev.present, probes):
                hit = inner_product_int(face_enroll[i], probe) > world.face_threshold
                if i == j:
                    face["gen"] += 1
                    face["tp"] += int(hit)
                else:
                    face["imp"] += 1
                    face["fp"] += int(hit)
    speaker = sc.command.speaker
    for i in enrolled:
        hit = inner_product_int(voice_enroll[i], world.voice_probe) > world.voice_threshold
        if i == speaker:
            voice["gen"] += 1
            voice["tp"] += int(hit)
        else:
            voice["imp"] += 1
            voice["fp"] += int(hit)


def batch_to_csv(rows: list[dict]) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=BATCH_COLUMNS)
    w.writeheader()
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Crypto bench
# ---------------------------------------------------------------------------


def bench_comparison(profile: str = "secure", dim: int = 128, scale: int = 127) -> dict:
    """Wall-clock breakdown of key generation plus one full encrypted comparison.

    The comparison covers the per-identification path: homomorphic score
    computation at the dashcam, decryption and proof generation at the device,
    and proof verification back at the dashcam. One-time setup (enrollment
    encryption of the full template, discrete-log table build) is reported
    separately since it happens once per enrollment/session, not per
    comparison.
    """
    from . import he, zkp

    params = params_for(profile, dim * scale * scale)
    rng = Random(0xBE)
    np_rng = np.random.default_rng(0xBE)
    profiles = make_profiles(2, dim, np_rng)
    enroll_qt = quantize(profiles[0].face_mean, scale)
    probe_qt = quantize(sample_observation(profiles[0], "face", np_rng), scale)

    timings = {}

    t0 = _time.perf_counter()
    kp = he.keygen(params, rng)
    timings["keygen_s"] = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    et = he.encrypt_template(kp.public_key, enroll_qt, rng)
    timings["enroll_encrypt_s"] = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    he.bsgs_table(params, params.plaintext_bound)
    timings["dlog_table_build_s"] = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    ct = he.rerandomize(he.encrypted_inner_product(et, probe_qt), rng)
    timings["encrypted_score_s"] = _time.perf_counter() - t0

    threshold = Threshold(cosine_to_score(0.5, scale))
    context = zkp.ProofContext(1, "face", b"\x07" * 16)

    t0 = _time.perf_counter()
    score = he.decrypt(kp, ct)
    timings["decrypt_s"] = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    proof = zkp.prove_match(kp, ct, threshold, context, rng)
    timings["prove_s"] = _time.perf_counter() - t0

    t0 = _time.perf_counter()
    result = zkp.verify_match(kp.public_key, ct, threshold, proof, context)
    timings["verify_s"] = _time.perf_counter() - t0

    comparison = (
        timings["keygen_s"]
        + timings["encrypted_score_s"]
        + timings["decrypt_s"]
        + timings["prove_s"]
        + timings["verify_s"]
    )
    expected = inner_product_int(enroll_qt, probe_qt)
    return {
        "profile": profile,
        "dimension": dim,
        "quant_scale": scale,
        "score_exact": score == expected,
        "verify_result": result.value,
        "proof_bytes": len(zkp.proof_to_bytes(proof, params)),
        "ciphertext_bytes": 2 * params.element_bytes,
        "expansion_factor": round(ciphertext_expansion(et, scale), 3),
        "timings": {k: round(v, 6) for k, v in timings.items()},
        "keygen_plus_comparison_s": round(comparison, 6),
    }
