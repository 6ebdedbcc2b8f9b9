#!/usr/bin/env python3
"""Identification rates vs. capture noise: TPIR/FPIR sweep to CSV on stdout.

Usage: python scripts/sweep_noise.py [trials] [n_passengers]

Noise sigma is the expected noise-vector norm; intra-class cosine falls off as
1/sqrt(1 + sigma^2), so the interesting region for a 0.5 cosine threshold sits
around sigma ~ 1.3-2.0.
"""

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from dcp.scenario import scenario_from_dict  # noqa: E402
from dcp.simulator import batch_to_csv, run_batch  # noqa: E402


def main() -> None:
    trials = int(sys.argv[1]) if len(sys.argv) > 1 else 100
    n = int(sys.argv[2]) if len(sys.argv) > 2 else 4
    base = scenario_from_dict(
        {
            "seed": 2024,
            "group_profile": "test",
            "dimension": 32,
            "quant_scale": 127,
            "passengers": [{"name": f"p{i}"} for i in range(n)],
            "capture_events": [{"present": list(range(n))}],
            "command": {"transcript": "Hey DashCam, pay for toll.", "speaker": n - 1},
        }
    )
    sigmas = [0.05, 0.4, 0.8, 1.1, 1.4, 1.7, 2.0, 2.5]
    rows = run_batch(base, trials=trials, sweep_key="noise_sigma", sweep_values=sigmas)
    print(batch_to_csv(rows), end="")


if __name__ == "__main__":
    main()
