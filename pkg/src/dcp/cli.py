"""Command-line interface: run rides, batch metrics, parse commands, bench crypto.

The RNG seed comes from --seed, else the DCP_SEED environment variable, else
the scenario file. JSON output is byte-stable across runs for a fixed seed
(wall-clock timings are included only with --timings).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .command import parse_command
from .errors import DcpError
from .scenario import BUILTIN_SCENARIOS, builtin_scenario, load_scenario, save_scenario
from .simulator import batch_to_csv, bench_comparison, run_batch, run_scenario

ENV_SEED = "DCP_SEED"


def _build_parser() -> argparse.ArgumentParser:
    # Global flags work both before and after the subcommand name.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--seed", type=int, default=argparse.SUPPRESS, help="override the scenario seed"
    )
    common.add_argument(
        "--format", choices=("text", "json"), default=argparse.SUPPRESS, help="output format"
    )

    parser = argparse.ArgumentParser(
        prog="dcp",
        description="Privacy-preserving in-vehicle payer identification simulator",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_run = sub.add_parser("run", help="run one ride scenario", parents=[common])
    p_run.add_argument("scenario", help="scenario JSON file")
    p_run.add_argument("--timings", action="store_true", help="include wall-clock timings")
    p_run.add_argument(
        "--audit", default=None, metavar="PATH", help="write the audit log as JSON lines"
    )

    p_batch = sub.add_parser(
        "batch", help="repeated randomized trials with metrics", parents=[common]
    )
    p_batch.add_argument("scenario", help="scenario JSON file")
    p_batch.add_argument("--trials", type=int, default=100)
    p_batch.add_argument(
        "--sweep",
        default=None,
        metavar="KEY=V1,V2,...",
        help="sweep noise_sigma, face_threshold, or voice_threshold",
    )
    p_batch.add_argument("--out", default=None, help="write CSV here instead of stdout")

    p_parse = sub.add_parser("parse", help="parse a voice command transcript", parents=[common])
    p_parse.add_argument("transcript")

    p_bench = sub.add_parser(
        "bench", help="time keygen plus one encrypted comparison", parents=[common]
    )
    p_bench.add_argument("--profile", choices=("test", "secure"), default="secure")
    p_bench.add_argument("--dim", type=int, default=128)
    p_bench.add_argument("--scale", type=int, default=127)

    p_gen = sub.add_parser("gen", help="emit a scenario template", parents=[common])
    p_gen.add_argument("template", choices=sorted(BUILTIN_SCENARIOS))
    p_gen.add_argument("-o", "--out", default=None, help="write to file instead of stdout")

    return parser


def _resolve_seed(args) -> int | None:
    # flag wins over the environment; SUPPRESS leaves the attr unset entirely
    seed = getattr(args, "seed", None)
    if seed is not None:
        return seed
    env = os.environ.get(ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise DcpError(f"{ENV_SEED} must be an integer, got {env!r}")
    return None


def _resolve_format(args) -> str:
    return getattr(args, "format", "text")


def _load_with_seed(path: str, seed: int | None):
    import dataclasses

    scenario = load_scenario(path)
    if seed is not None:
        scenario = dataclasses.replace(scenario, seed=seed)
    return scenario


def _cmd_run(args) -> int:
    scenario = _load_with_seed(args.scenario, _resolve_seed(args))
    report = run_scenario(scenario)
    if args.audit:
        with open(args.audit, "w", encoding="utf-8") as f:
            for record in report.audit:
                f.write(json.dumps(record, sort_keys=True) + "\n")
    if _resolve_format(args) == "json":
        print(report.to_json(include_wall_clock=args.timings))
    else:
        d = report.decision or {}
        print(f"scenario: {args.scenario} (seed {scenario.seed})")
        print(f"command:  {report.command}")
        print(f"decision: {d.get('outcome')} payer={d.get('payer')}")
        print(f"oracle agrees: {report.oracle_agrees}")
        if report.recourse_reason:
            print(f"recourse: {report.recourse_reason}")
        if report.receipt:
            print(f"receipt:  {report.receipt['receipt_id']} ({report.receipt['status']})")
        print(f"sim time: {report.total_sim_time:.3f}s  phases: {report.phase_times}")
        print(f"bytes:    {report.total_bytes}  expansion: {report.expansion_factor}x")
        if args.timings:
            print(f"wall:     {report.wall_clock_s:.3f}s")
    return 0


def _cmd_batch(args) -> int:
    scenario = _load_with_seed(args.scenario, _resolve_seed(args))
    sweep_key, sweep_values = None, None
    if args.sweep:
        if "=" not in args.sweep:
            raise DcpError("--sweep expects KEY=V1,V2,...")
        sweep_key, raw = args.sweep.split("=", 1)
        try:
            sweep_values = [float(v) for v in raw.split(",") if v]
        except ValueError:
            raise DcpError(f"bad sweep values {raw!r}")
        if not sweep_values:
            raise DcpError("sweep needs at least one value")
    rows = run_batch(scenario, args.trials, sweep_key, sweep_values)
    csv_text = batch_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(csv_text)
        print(f"wrote {len(rows)} row(s) to {args.out}")
    elif _resolve_format(args) == "json":
        print(json.dumps(rows, indent=2, sort_keys=True))
    else:
        print(csv_text, end="")
    return 0


def _cmd_parse(args) -> int:
    cmd = parse_command(args.transcript)
    if _resolve_format(args) == "json":
        print(json.dumps(cmd.to_dict(), sort_keys=True))
    else:
        slot = "" if cmd.slot is None else f" slot={cmd.slot}"
        print(f"{cmd.use_case}{slot}")
    return 0


def _cmd_bench(args) -> int:
    result = bench_comparison(args.profile, args.dim, args.scale)
    if _resolve_format(args) == "json":
        print(json.dumps(result, indent=2, sort_keys=True))
    else:
        print(f"profile: {result['profile']}  d={result['dimension']} Q={result['quant_scale']}")
        for name, secs in result["timings"].items():
            print(f"  {name:22s} {secs * 1000:9.2f} ms")
        print(f"  {'keygen+comparison':22s} {result['keygen_plus_comparison_s'] * 1000:9.2f} ms")
        print(f"score exact: {result['score_exact']}  verify: {result['verify_result']}")
        print(f"proof bytes: {result['proof_bytes']}  expansion: {result['expansion_factor']}x")
    return 0


def _cmd_gen(args) -> int:
    seed = _resolve_seed(args)
    scenario = builtin_scenario(args.template, seed=seed if seed is not None else 7)
    if args.out:
        save_scenario(scenario, args.out)
        print(f"wrote {args.template} scenario to {args.out}")
    else:
        print(json.dumps(scenario.to_dict(), indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "batch": _cmd_batch,
    "parse": _cmd_parse,
    "bench": _cmd_bench,
    "gen": _cmd_gen,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args)
    except DcpError as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
