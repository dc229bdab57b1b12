"""Run both micro scenarios over several seeds with static and runtime partitioning."""

import argparse
from pathlib import Path

from uwfq_sim.experiment import ExperimentSpec, format_table, run_experiment

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out", type=Path, default=Path("results/scenarios"))
ap.add_argument("--seeds", type=int, default=5)
ap.add_argument("--atr", type=float, default=1.0)
ap.add_argument("--force", action="store_true")
args = ap.parse_args()

for scenario in (1, 2):
    for part, atr in (("static", None), ("runtime", args.atr)):
        out = args.out / f"scenario{scenario}-{part}"
        seeds = list(range(args.seeds)) if scenario == 1 else [0]
        rows = run_experiment(ExperimentSpec(["fair", "ujf", "cfq", "uwfq"], scenario=scenario, partitioner=part,
                                             atr=atr, seeds=seeds, out=str(out), force=args.force))
        print(f"== scenario {scenario}, {part} partitioning -> {out}")
        print(format_table(rows))
