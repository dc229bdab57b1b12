"""Check the practical-vs-fluid lag bound on random single-stage workloads."""

import argparse
import random

from uwfq_sim.experiment import BoundViolation, verify_bounds
from uwfq_sim.model import make_job
from uwfq_sim.partitioning import Partitioner


def workload(rng, users=8, jobs=8):
    out = []
    for u in range(rng.randint(1, users)):
        for n in range(rng.randint(1, jobs)):
            L = rng.uniform(0.5, 20)
            k = rng.randint(1, 8)
            out.append(make_job(f"u{u}-j{n}", f"u{u}", rng.uniform(0, 60), [[L / k] * k]))
    return out


ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--n", type=int, default=200)
ap.add_argument("--seed", type=int, default=0)
ap.add_argument("--grace", type=float, default=0.0, help="UWFQ grace; the fluid reference has none")
args = ap.parse_args()

rng = random.Random(args.seed)
worst = {}
failures = 0
for _ in range(args.n):
    jobs = workload(rng)
    for R in (4, 32):
        for part in (Partitioner("static"), Partitioner("runtime", 1.0)):
            key = (R, part.name)
            try:
                rep = verify_bounds(jobs, R, part, grace=args.grace)
                worst[key] = max(worst.get(key, -1e9), rep.max_excess_practical)
            except BoundViolation as e:
                failures += 1
                print("violation:", e)
for (R, name), w in sorted(worst.items()):
    print(f"R={R:2d} {name:7s} max excess over bound {w:+.4f}")
print(f"{failures} violations")
raise SystemExit(1 if failures else 0)
