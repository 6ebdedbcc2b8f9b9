#!/usr/bin/env python3
"""Print the secure-profile enrollment payload size and transport timings.

The default BLE/Wi-Fi bandwidth constants in dcp.transport were chosen from
this script's output: bandwidth = payload / target_seconds, rounded.
"""

import pathlib
import sys
from random import Random

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

import numpy as np  # noqa: E402

from dcp import he, wire  # noqa: E402
from dcp.embedding import Embedding, quantize  # noqa: E402
from dcp.transport import BLE, WIFI, simulate_transfer  # noqa: E402


def main() -> None:
    params = he.secure_params()
    rng = Random(1)
    np_rng = np.random.default_rng(1)
    kp = he.keygen(params, rng)
    face = quantize(Embedding(np_rng.standard_normal(128), "face"), 127)
    voice = quantize(Embedding(np_rng.standard_normal(128), "voice"), 127)
    msg = wire.EnrollmentTransfer(
        1,
        kp.public_key,
        he.encrypt_template(kp.public_key, face, rng),
        he.encrypt_template(kp.public_key, voice, rng),
    )
    payload = len(wire.encode(msg, params))
    print(f"secure enrollment payload: {payload} bytes (d=128, both modalities)")
    print(f"  exact bandwidth for 10 s: {payload / 10:.1f} B/s")
    print(f"  exact bandwidth for  2 s: {payload / 2:.1f} B/s")
    for profile, target in ((BLE, 10.0), (WIFI, 2.0)):
        t = simulate_transfer(profile, payload)
        print(
            f"  {profile.name}: bandwidth {profile.bandwidth_bytes_per_s:.0f} B/s, "
            f"latency {profile.latency_s}s -> {t:.2f}s (target {target}s, "
            f"{100 * (t - target) / target:+.1f}%)"
        )
    print(f"ciphertext expansion at this profile: {he.ciphertext_expansion(msg.et_face, 127):.1f}x")


if __name__ == "__main__":
    main()
