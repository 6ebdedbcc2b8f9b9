"""Ride scenario definition, validation, and bundled templates.

A scenario is the complete deterministic input to one simulated ride: who is
in the vehicle, who carries an enrolled device, which faces each capture event
sees, the spoken command, and the transport/crypto profiles. Everything
downstream (identities, observations, keys, nonces) derives from the seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ScenarioError

GROUP_PROFILES = ("test", "secure")
SEPARATIONS = ("orthogonal", "random")
TRANSPORT_NAMES = ("ble", "wifi")


@dataclass(frozen=True)
class PassengerSpec:
    name: str
    has_device: bool = True
    enrolled: bool = True
    noise_sigma: float = 0.05


@dataclass(frozen=True)
class CaptureSpec:
    present: tuple[int, ...]
    sigma: float | None = None  # None: use each passenger's own noise level


@dataclass(frozen=True)
class CommandSpec:
    transcript: str
    speaker: int
    sigma: float | None = None


@dataclass(frozen=True)
class Scenario:
    seed: int
    passengers: tuple[PassengerSpec, ...]
    capture_events: tuple[CaptureSpec, ...]
    command: CommandSpec
    group_profile: str = "test"
    dimension: int = 128
    quant_scale: int = 127
    face_threshold_cos: float = 0.5
    voice_threshold_cos: float = 0.5
    separation: str = "orthogonal"
    transport: tuple[str, ...] = ()  # per-device; empty means wifi for all
    shared_voice: tuple[tuple[int, ...], ...] = ()  # groups sharing one voice profile
    refresh_prescreen_on_pay: bool = False
    timeout_s: float = 5.0
    merchant: str = ""

    def transport_for(self, index: int) -> str:
        if not self.transport:
            return "wifi"
        if len(self.transport) == 1:
            return self.transport[0]
        return self.transport[index]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "group_profile": self.group_profile,
            "dimension": self.dimension,
            "quant_scale": self.quant_scale,
            "thresholds": {
                "face_cosine": self.face_threshold_cos,
                "voice_cosine": self.voice_threshold_cos,
            },
            "separation": self.separation,
            "passengers": [
                {
                    "name": p.name,
                    "has_device": p.has_device,
                    "enrolled": p.enrolled,
                    "noise_sigma": p.noise_sigma,
                }
                for p in self.passengers
            ],
            "capture_events": [
                {"present": list(c.present), "sigma": c.sigma} for c in self.capture_events
            ],
            "command": {
                "transcript": self.command.transcript,
                "speaker": self.command.speaker,
                "sigma": self.command.sigma,
            },
            "transport": list(self.transport),
            "shared_voice": [list(g) for g in self.shared_voice],
            "refresh_prescreen_on_pay": self.refresh_prescreen_on_pay,
            "timeout_s": self.timeout_s,
            "merchant": self.merchant,
        }


def _require(cond: bool, message: str, fieldpath: str):
    if not cond:
        raise ScenarioError(message, fieldpath)


def scenario_from_dict(d: dict) -> Scenario:
    """Build and validate a Scenario; errors carry the offending field path."""
    if not isinstance(d, dict):
        raise ScenarioError("scenario must be a JSON object", "")

    seed = d.get("seed", 0)
    _require(isinstance(seed, int) and 0 <= seed < 2**64, "seed must be a u64", "seed")

    profile = d.get("group_profile", "test")
    _require(profile in GROUP_PROFILES, f"must be one of {GROUP_PROFILES}", "group_profile")

    dim = d.get("dimension", 128)
    _require(isinstance(dim, int) and 2 <= dim <= 4096, "must be an int in [2, 4096]", "dimension")
    scale = d.get("quant_scale", 127)
    _require(
        isinstance(scale, int) and 1 <= scale <= 32767, "must be an int in [1, 32767]", "quant_scale"
    )

    th = d.get("thresholds", {})
    face_t = th.get("face_cosine", 0.5)
    voice_t = th.get("voice_cosine", 0.5)
    for name, val in (("face_cosine", face_t), ("voice_cosine", voice_t)):
        _require(
            isinstance(val, (int, float)) and -1.0 < val < 1.0,
            "must be a cosine in (-1, 1)",
            f"thresholds.{name}",
        )

    separation = d.get("separation", "orthogonal")
    _require(separation in SEPARATIONS, f"must be one of {SEPARATIONS}", "separation")

    raw_passengers = d.get("passengers")
    _require(
        isinstance(raw_passengers, list) and len(raw_passengers) >= 1,
        "must be a non-empty list",
        "passengers",
    )
    passengers = []
    for i, rp in enumerate(raw_passengers):
        path = f"passengers[{i}]"
        _require(isinstance(rp, dict), "must be an object", path)
        name = rp.get("name", f"passenger-{i}")
        has_device = rp.get("has_device", True)
        enrolled = rp.get("enrolled", True)
        sigma = rp.get("noise_sigma", 0.05)
        _require(isinstance(has_device, bool), "must be a bool", f"{path}.has_device")
        _require(isinstance(enrolled, bool), "must be a bool", f"{path}.enrolled")
        _require(
            isinstance(sigma, (int, float)) and sigma >= 0, "must be >= 0", f"{path}.noise_sigma"
        )
        _require(
            not (enrolled and not has_device),
            "enrolled requires has_device",
            f"{path}.enrolled",
        )
        passengers.append(
            PassengerSpec(name=str(name), has_device=has_device, enrolled=enrolled,
                          noise_sigma=float(sigma))
        )
    n = len(passengers)
    if separation == "orthogonal":
        _require(n <= dim, "orthogonal separation needs <= dimension passengers", "passengers")

    raw_captures = d.get("capture_events", [])
    _require(isinstance(raw_captures, list), "must be a list", "capture_events")
    captures = []
    for i, rc in enumerate(raw_captures):
        path = f"capture_events[{i}]"
        _require(isinstance(rc, dict), "must be an object", path)
        present = rc.get("present", [])
        _require(isinstance(present, list), "must be a list of passenger indices", f"{path}.present")
        for j, idx in enumerate(present):
            _require(
                isinstance(idx, int) and 0 <= idx < n,
                f"passenger index out of range [0, {n})",
                f"{path}.present[{j}]",
            )
        sigma = rc.get("sigma")
        if sigma is not None:
            _require(
                isinstance(sigma, (int, float)) and sigma >= 0, "must be >= 0", f"{path}.sigma"
            )
        captures.append(CaptureSpec(present=tuple(present), sigma=sigma))

    raw_cmd = d.get("command")
    _require(isinstance(raw_cmd, dict), "must be an object", "command")
    transcript = raw_cmd.get("transcript", "")
    _require(
        isinstance(transcript, str) and transcript.strip() != "",
        "must be a non-empty string",
        "command.transcript",
    )
    speaker = raw_cmd.get("speaker")
    _require(
        isinstance(speaker, int) and 0 <= speaker < n,
        f"speaker index out of range [0, {n})",
        "command.speaker",
    )
    cmd_sigma = raw_cmd.get("sigma")
    if cmd_sigma is not None:
        _require(
            isinstance(cmd_sigma, (int, float)) and cmd_sigma >= 0, "must be >= 0", "command.sigma"
        )

    raw_tr = d.get("transport", [])
    if isinstance(raw_tr, str):
        raw_tr = [raw_tr]
    _require(isinstance(raw_tr, list), "must be a name or list of names", "transport")
    for i, t in enumerate(raw_tr):
        _require(t in TRANSPORT_NAMES, f"must be one of {TRANSPORT_NAMES}", f"transport[{i}]")
    _require(
        len(raw_tr) in (0, 1, n), f"must name one profile or one per passenger ({n})", "transport"
    )

    raw_shared = d.get("shared_voice", [])
    _require(isinstance(raw_shared, list), "must be a list of index groups", "shared_voice")
    shared = []
    for i, grp in enumerate(raw_shared):
        path = f"shared_voice[{i}]"
        _require(isinstance(grp, list) and len(grp) >= 2, "must list >= 2 indices", path)
        for j, idx in enumerate(grp):
            _require(
                isinstance(idx, int) and 0 <= idx < n,
                f"passenger index out of range [0, {n})",
                f"{path}[{j}]",
            )
        shared.append(tuple(grp))

    refresh = d.get("refresh_prescreen_on_pay", False)
    _require(isinstance(refresh, bool), "must be a bool", "refresh_prescreen_on_pay")
    timeout = d.get("timeout_s", 5.0)
    _require(
        isinstance(timeout, (int, float)) and timeout > 0, "must be > 0", "timeout_s"
    )

    return Scenario(
        seed=seed,
        passengers=tuple(passengers),
        capture_events=tuple(captures),
        command=CommandSpec(transcript=transcript, speaker=speaker, sigma=cmd_sigma),
        group_profile=profile,
        dimension=dim,
        quant_scale=scale,
        face_threshold_cos=float(face_t),
        voice_threshold_cos=float(voice_t),
        separation=separation,
        transport=tuple(raw_tr),
        shared_voice=tuple(shared),
        refresh_prescreen_on_pay=refresh,
        timeout_s=float(timeout),
        merchant=str(d.get("merchant", "")),
    )


def load_scenario(path: str) -> Scenario:
    """Load and validate a scenario JSON file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ScenarioError(f"no such file: {path}", "")
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno}: {exc.msg}", "")
    return scenario_from_dict(raw)


def save_scenario(s: Scenario, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(s.to_dict(), f, indent=2, sort_keys=True)
        f.write("\n")


def builtin_scenario(name: str, seed: int = 7) -> Scenario:
    """Bundled scenario templates for the CLI's gen subcommand."""
    if name not in BUILTIN_SCENARIOS:
        raise ScenarioError(f"unknown template {name!r}; options: {sorted(BUILTIN_SCENARIOS)}", "")
    return scenario_from_dict(BUILTIN_SCENARIOS[name](seed))


def _drive_through(seed: int) -> dict:
    return {
        "seed": seed,
        "group_profile": "test",
        "dimension": 128,
        "quant_scale": 127,
        "thresholds": {"face_cosine": 0.5, "voice_cosine": 0.5},
        "passengers": [
            {"name": "driver", "has_device": True, "enrolled": True, "noise_sigma": 0.05},
            {"name": "front", "has_device": True, "enrolled": True, "noise_sigma": 0.05},
            {"name": "back", "has_device": True, "enrolled": True, "noise_sigma": 0.05},
        ],
        "capture_events": [{"present": [0, 1, 2]}],
        "command": {"transcript": "Hey DashCam, pay for order number 120.", "speaker": 1},
        "transport": "wifi",
        "merchant": "drive-through lane 1",
    }


def _toll_booth(seed: int) -> dict:
    return {
        "seed": seed,
        "passengers": [
            {"name": "driver"},
            {"name": "passenger", "has_device": False, "enrolled": False},
        ],
        "capture_events": [{"present": [0, 1]}],
        "command": {"transcript": "Hey DashCam, pay for toll.", "speaker": 0},
        "transport": "ble",
        "merchant": "toll plaza",
    }


def _parking(seed: int) -> dict:
    return {
        "seed": seed,
        "passengers": [{"name": "driver"}, {"name": "front"}],
        "capture_events": [{"present": [0, 1]}],
        "command": {
            "transcript": "Hey DashCam, pay for parking at space number 5208.",
            "speaker": 0,
        },
        "transport": "wifi",
        "merchant": "parking lot",
    }


def _gas_station(seed: int) -> dict:
    return {
        "seed": seed,
        "passengers": [{"name": "driver"}],
        "capture_events": [{"present": [0]}],
        "command": {"transcript": "Hey DashCam, pay for gas at pump six.", "speaker": 0},
        "transport": "wifi",
        "merchant": "gas station",
    }


def _twins(seed: int) -> dict:
    # Two passengers sharing one voice profile force a multiple-match recourse;
    # the simulator honors the shared_voice_with marker.
    return {
        "seed": seed,
        "passengers": [
            {"name": "twin-a"},
            {"name": "twin-b"},
        ],
        "capture_events": [{"present": [0, 1]}],
        "command": {"transcript": "Hey DashCam, pay for toll.", "speaker": 0},
        "shared_voice": [[0, 1]],
        "merchant": "toll plaza",
    }


def _no_device_speaker(seed: int) -> dict:
    return {
        "seed": seed,
        "passengers": [
            {"name": "driver"},
            {"name": "guest", "has_device": False, "enrolled": False},
        ],
        "capture_events": [{"present": [0, 1]}],
        "command": {"transcript": "Hey DashCam, pay for gas at pump six.", "speaker": 1},
        "merchant": "gas station",
    }


BUILTIN_SCENARIOS = {
    "drive_through": _drive_through,
    "toll_booth": _toll_booth,
    "parking": _parking,
    "gas_station": _gas_station,
    "twins": _twins,
    "no_device_speaker": _no_device_speaker,
}
