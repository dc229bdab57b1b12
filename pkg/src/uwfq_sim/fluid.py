"""Idealised fluid schedules used as fairness oracles.

Jobs are treated as infinitely divisible work of size ``slot_time``.  Both
schedules give every active user the same share ``R / N_users``; they differ in
how a user's share is spent on its own jobs:

* user-job fair (UJF): split evenly across the user's active jobs;
* two-level virtual (2-LV): spent entirely on the user's active job with the
  earliest user deadline, which is the job that would finish first under UJF.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from .model import EPS, Job


@dataclass
class FluidSchedule:
    finish_times: dict[str, float]
    # per-job list of (t_start, t_end, rate) pieces, only filled when requested
    rates: dict[str, list[tuple[float, float, float]]] = field(default_factory=dict)

    def served(self, job_id: str) -> float:
        return sum((b - a) * r for a, b, r in self.rates.get(job_id, ()))

    def write_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["job_id", "finish_time"])
            for jid, f in self.finish_times.items():
                w.writerow([jid, repr(f)])
        return path


def _simulate(jobs: list[Job], R: float, pick, record: bool) -> FluidSchedule:
    """Event-driven fluid simulation.

    ``pick(user_jobs)`` returns {job_id: fraction of the user's share}.
    """
    pending = sorted(jobs, key=lambda j: (j.arrival, j.job_id))
    remaining: dict[str, float] = {}
    owner: dict[str, str] = {}
    by_user: dict[str, list[Job]] = {}
    finish: dict[str, float] = {}
    rates: dict[str, list] = {}
    t = 0.0
    i = 0
    while i < len(pending) or remaining:
        if not remaining:
            t = max(t, pending[i].arrival)
        while i < len(pending) and pending[i].arrival <= t + EPS:
            j = pending[i]
            remaining[j.job_id] = j.slot_time
            owner[j.job_id] = j.user_id
            by_user.setdefault(j.user_id, []).append(j)
            i += 1
        share = R / len(by_user)
        rate: dict[str, float] = {}
        for ujobs in by_user.values():
            for jid, frac in pick(ujobs).items():
                rate[jid] = share * frac
        dt = min((remaining[jid] / r for jid, r in rate.items() if r > 0), default=math.inf)
        if i < len(pending):
            dt = min(dt, pending[i].arrival - t)
        for jid, r in rate.items():
            remaining[jid] -= r * dt
            if record and r > 0 and dt > 0:
                rates.setdefault(jid, []).append((t, t + dt, r))
        t += dt
        for jid in [jid for jid, rem in remaining.items() if rem <= EPS * max(1.0, R)]:
            del remaining[jid]
            finish[jid] = t
            ujobs = by_user[owner[jid]]
            ujobs[:] = [j for j in ujobs if j.job_id != jid]
            if not ujobs:
                del by_user[owner[jid]]
    return FluidSchedule(finish, rates)


def _even_split(ujobs):
    n = len(ujobs)
    return {j.job_id: 1.0 / n for j in ujobs}


def ujf_fluid(jobs, R: float, record: bool = False) -> FluidSchedule:
    """User-job fair fluid schedule: R/N_u per user, split evenly over its jobs."""
    return _simulate(list(jobs), float(R), _even_split, record)


def two_level_virtual_fluid(jobs, R: float, record: bool = False) -> FluidSchedule:
    """Two-level virtual-time fluid schedule.

    Inside a user, jobs run one at a time at the user's full share, in order of
    their user-level virtual deadlines.  Those deadlines order jobs exactly as
    their UJF finish times do, so the UJF schedule supplies the ranking; ties
    fall back to arrival time and then job id.
    """
    jobs = list(jobs)
    hat = ujf_fluid(jobs, R).finish_times
    rank = {j.job_id: (round(hat[j.job_id], 9), j.arrival, j.job_id) for j in jobs}

    def first_deadline(ujobs):
        return {min(ujobs, key=lambda j: rank[j.job_id]).job_id: 1.0}

    return _simulate(jobs, float(R), first_deadline, record)


def brute_force_fluid(jobs, R: float, dt: float) -> FluidSchedule:
    """Fixed-step forward-Euler integration of the UJF rate rules.

    Slow and only first-order accurate; used to cross-check ``ujf_fluid``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    jobs = sorted(jobs, key=lambda j: j.arrival)
    remaining = {j.job_id: j.slot_time for j in jobs}
    finish: dict[str, float] = {}
    step = 0
    while len(finish) < len(jobs):
        t = step * dt
        active: dict[str, list[str]] = {}
        for j in jobs:
            if j.arrival <= t and j.job_id not in finish:
                active.setdefault(j.user_id, []).append(j.job_id)
        if active:
            share = R / len(active)
            for ids in active.values():
                r = share / len(ids)
                for jid in ids:
                    if remaining[jid] <= r * dt:
                        finish[jid] = t + remaining[jid] / r
                    remaining[jid] -= r * dt
        step += 1
    return FluidSchedule(finish)
