"""Simulated wireless links with BLE/Wi-Fi profiles.

Transfer time is the simple fluid model latency + bytes/bandwidth. The default
bandwidths are calibrated so that one full enrollment payload at the secure
group profile (d=128, both modalities) takes about 10 s over BLE and 2 s over
Wi-Fi; see docs/FORMATS.md for the payload arithmetic behind the constants.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random


@dataclass(frozen=True)
class TransportProfile:
    name: str
    bandwidth_bytes_per_s: float
    latency_s: float = 0.0
    drop_probability: float = 0.0

    def __post_init__(self):
        if self.bandwidth_bytes_per_s <= 0:
            raise ValueError("bandwidth must be > 0")
        if not (0.0 <= self.drop_probability <= 1.0):
            raise ValueError("drop probability must be in [0, 1]")


# Secure-profile enrollment payload is 131_355 bytes (see docs/FORMATS.md);
# 13_150 B/s puts it at ~10.0 s, 65_700 B/s at ~2.0 s.
BLE = TransportProfile("ble", bandwidth_bytes_per_s=13_150.0, latency_s=0.05)
WIFI = TransportProfile("wifi", bandwidth_bytes_per_s=65_700.0, latency_s=0.02)

PROFILES = {"ble": BLE, "wifi": WIFI}


def profile_for(name: str) -> TransportProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown transport profile {name!r}") from None


def simulate_transfer(profile: TransportProfile, nbytes: int) -> float:
    """Seconds to move nbytes over the link; deterministic."""
    if nbytes < 0:
        raise ValueError("nbytes must be >= 0")
    return profile.latency_s + nbytes / profile.bandwidth_bytes_per_s


def dropped(profile: TransportProfile, rng: Random) -> bool:
    """Whether this message is lost; draws from rng only when drops are enabled."""
    if profile.drop_probability == 0.0:
        return False
    return rng.random() < profile.drop_probability
