#!/usr/bin/env python3
"""Regenerate pinned fixtures: the golden message trace and format test vectors.

Run after any intentional change to the wire format, crypto serialization, or
RNG consumption order, then review the diff. Byte-stability of these fixtures
is what the regression tests assert.
"""

import hashlib
import json
import pathlib
import sys
from random import Random

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from dcp import he, zkp  # noqa: E402
from dcp.scenario import builtin_scenario  # noqa: E402
from dcp.simulator import run_scenario_detailed  # noqa: E402

DATA = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"


def golden_trace() -> dict:
    scenario = builtin_scenario("drive_through", seed=7)
    _, _, net = run_scenario_detailed(scenario)
    frames = [t["frame"] for t in net.trace]
    digest = hashlib.sha256("".join(frames).encode()).hexdigest()
    return {
        "scenario": "drive_through",
        "seed": 7,
        "frame_count": len(frames),
        "trace_sha256": digest,
        "messages": [
            {"seq": t["seq"], "src": t["src"], "dst": t["dst"], "type": t["type"]}
            for t in net.trace
        ],
        "frames": frames,
    }


def format_vectors() -> dict:
    params = he.test_params()
    rng = Random(0xF1C)
    kp = he.keygen(params, rng)
    ct = he.encrypt(kp.public_key, 5, rng)
    return {
        "profile": "test",
        "p": hex(params.p),
        "q": hex(params.q),
        "g": hex(params.g),
        "h": hex(params.h),
        "element_bytes": params.element_bytes,
        "scalar_bytes": params.scalar_bytes,
        "keygen_seed": hex(0xF1C),
        "secret_x": hex(kp.x),
        "public_y": hex(kp.y),
        "enc_5_hex": ct.to_bytes().hex(),
        "connect_request_frame": "0000000101",
        "challenge_dcp_v1_empty": hex(zkp.derive_challenge(params, "dcp/v1", b"")),
    }


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    with open(DATA / "golden_drive_through.json", "w", encoding="utf-8") as f:
        json.dump(golden_trace(), f, indent=1)
        f.write("\n")
    with open(DATA / "format_vectors.json", "w", encoding="utf-8") as f:
        json.dump(format_vectors(), f, indent=2)
        f.write("\n")
    print(f"fixtures written to {DATA}")


if __name__ == "__main__":
    main()
