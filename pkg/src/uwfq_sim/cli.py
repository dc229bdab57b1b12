"""Command-line entry point: ``uwfq-sim`` / ``python3 -m uwfq_sim``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .experiment import (BoundViolation, ExperimentSpec, OutputExists, format_table, run_experiment,
                         verify_bounds)
from .model import load_workload_file
from .policies import POLICY_NAMES
from .workloads import TraceRefinement


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uwfq-sim", description="Simulate scheduling policies on a multi-user cluster.")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", type=int, choices=(1, 2), help="built-in micro scenario")
    src.add_argument("--trace", help="trace CSV (job_id,user_id,submit_ms,runtime_ms)")
    src.add_argument("--workload", help="JSON/YAML workload file")
    p.add_argument("--policy", action="append", choices=POLICY_NAMES, metavar="NAME",
                   help=f"policy to run, repeatable ({'|'.join(POLICY_NAMES)}); default: all")
    p.add_argument("--partitioner", choices=("static", "runtime"), default="static")
    p.add_argument("--atr", type=float, default=None, help="advisory task runtime in seconds (runtime partitioner)")
    p.add_argument("--cores", type=int, default=None, help="default: the workload file's value, else 32")
    p.add_argument("--seed", type=int, action="append", help="repeatable; default 0")
    p.add_argument("--out", default="results")
    p.add_argument("--strict-eq23", action="store_true",
                   help="count violations as ratio > 1 and slack as ratio <= 1")
    p.add_argument("--cfq-stage-granularity", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--grace", type=float, default=2.0, help="UWFQ grace period in seconds")
    p.add_argument("--verify-bounds", action="store_true", help="also check UWFQ against the fluid references")
    p.add_argument("--force", action="store_true", help="write into a non-empty output directory")
    p.add_argument("--workers", type=int, default=None, help="processes for multi-seed runs")
    ref = TraceRefinement()
    p.add_argument("--window-start", type=float, default=ref.window_start, help="ms")
    p.add_argument("--window-end", type=float, default=ref.window_end, help="ms")
    p.add_argument("--cutoff", type=float, default=ref.median_multiplier_cutoff, help="x median total work")
    p.add_argument("--utilization", type=float, default=ref.target_utilization)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.partitioner == "runtime" and args.atr is None:
        parser.error("--partitioner runtime requires --atr")
    cores = args.cores
    if cores is None:
        cores = 32
        if args.workload:
            try:
                cores = load_workload_file(args.workload)[1].get("cores", 32)
            except (ValueError, OSError) as e:
                print(f"error: {e}", file=sys.stderr)
                return 1
    try:
        spec = ExperimentSpec(
            policies=args.policy or list(POLICY_NAMES),
            scenario=args.scenario, trace=args.trace, workload_file=args.workload,
            partitioner=args.partitioner, atr=args.atr, cores=cores,
            seeds=args.seed or [0], out=args.out, strict=args.strict_eq23,
            cfq_stage_granularity=args.cfq_stage_granularity, grace=args.grace, force=args.force,
            workers=args.workers,
            refinement=TraceRefinement(args.window_start, args.window_end, args.cutoff, args.utilization),
        )
    except ValueError as e:
        parser.error(str(e))
    try:
        rows = run_experiment(spec)
    except OutputExists as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(format_table(rows))
    if args.verify_bounds:
        lines, ok = [], True
        for seed in dict.fromkeys(spec.seeds):
            jobs, _ = spec.workload(seed)
            try:
                rep = verify_bounds(jobs, spec.cores, spec.make_partitioner(), grace=0.0)
                lines += [f"seed={seed} status=pass"] + [f"seed={seed} {x}" for x in rep.lines()]
            except BoundViolation as e:
                ok = False
                lines.append(f"seed={seed} status=fail {e}")
        Path(spec.out, "bounds.txt").write_text("\n".join(lines) + "\n")
        print("\n".join(lines))
        if not ok:
            return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
