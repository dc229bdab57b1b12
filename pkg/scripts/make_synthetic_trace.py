"""Regenerate the bundled synthetic trace (src/uwfq_sim/data/synthetic_trace.csv).

Inside the default window: 121 jobs from 8 users with heavy-tailed per-user
volume, one of which is an outlier whose total work is exactly 20x the
windowed median.  Six more jobs sit outside the window.  With the default
refinement (cutoff 10x median) the outlier is the only job dropped.
"""

import argparse
import random
import statistics
from pathlib import Path

from uwfq_sim.workloads import TraceRefinement, write_trace

OUT = Path(__file__).resolve().parents[1] / "src" / "uwfq_sim" / "data" / "synthetic_trace.csv"


def build(seed: int = 7):
    rng = random.Random(seed)
    ref = TraceRefinement()
    users = [f"u{i}" for i in range(8)]
    volume = [0.35, 0.2, 0.15, 0.1, 0.08, 0.05, 0.04, 0.03]
    rows, works = [], []
    for n in range(120):
        user = rng.choices(users, volume)[0]
        submit = rng.randrange(int(ref.window_start), int(ref.window_end) - 60_000)
        tasks = [rng.randrange(200, 20_000) for _ in range(rng.randint(1, 24))]
        jid = f"j{n:03d}"
        works.append(sum(tasks))
        rows += [{"job_id": jid, "user_id": user, "submit_ms": submit, "runtime_ms": t} for t in tasks]
    # with the outlier as the largest of 121 values the median is the 61st value
    median = sorted(works)[60]
    assert median == statistics.median(works + [20 * median])
    outlier = 20 * median
    rows += [{"job_id": "j-outlier", "user_id": "u1", "submit_ms": int(ref.window_start) + 250_000,
              "runtime_ms": outlier // 4} for _ in range(4)]
    for k, submit in enumerate((ref.window_start - 5_000, ref.window_start - 1, ref.window_end,
                                ref.window_end + 1, ref.window_end + 90_000, 1_000_000_000)):
        rows.append({"job_id": f"x{k}", "user_id": users[k % 3], "submit_ms": int(submit), "runtime_ms": 5_000})
    rows.sort(key=lambda r: (r["submit_ms"], r["job_id"]))
    return rows, median, sum(works)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args()
    rows, median, kept_ms = build(args.seed)
    write_trace(rows, args.out)
    print(f"wrote {args.out}: {len(rows)} rows, median work {median} ms, kept work {kept_ms} ms")


if __name__ == "__main__":
    main()
