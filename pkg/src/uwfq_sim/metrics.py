"""Response-time, slowdown and deadline-ratio metrics over execution traces."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from statistics import fmean

from .model import ExecutionTrace


class IncompleteJob(KeyError):
    pass


def _span(trace: ExecutionTrace, job_id: str):
    span = trace.jobs.get(job_id)
    if span is None or math.isnan(span.end):
        raise IncompleteJob(job_id)
    return span


def response_time(trace: ExecutionTrace, job_id: str) -> float:
    """Last stage end minus first stage submission."""
    return _span(trace, job_id).response_time


def slowdown(trace: ExecutionTrace, job_id: str, rt_idle: float) -> float:
    if not rt_idle > 0:
        raise ValueError(f"idle runtime must be > 0, got {rt_idle!r}")
    return response_time(trace, job_id) / rt_idle


def deadline_ratio(target: ExecutionTrace, ujf: ExecutionTrace, job_id: str) -> float:
    """End-time difference to the UJF run, normalised by the job's UJF response time."""
    t, u = _span(target, job_id), _span(ujf, job_id)
    return (t.end - u.end) / u.response_time


def dvr(ratios, strict: bool = False) -> tuple[float, int]:
    """Mean positive deadline ratio and the violation count.

    With ``strict`` the indicator counts ratios above 1 while the numerator
    still sums every positive ratio.
    """
    ratios = list(ratios)
    count = sum(1 for r in ratios if (r > 1 if strict else r > 0))
    if count == 0:
        return 0.0, 0
    return math.fsum(max(0.0, r) for r in ratios) / count, count


def dsr(ratios, strict: bool = False) -> tuple[float, int]:
    ratios = list(ratios)
    count = sum(1 for r in ratios if (r <= 1 if strict else r <= 0))
    if count == 0:
        return 0.0, 0
    return math.fsum(max(0.0, -r) for r in ratios) / count, count


def mean_rt_by_user(trace: ExecutionTrace) -> dict[str, float]:
    groups: dict[str, list[float]] = {}
    for jid, span in trace.jobs.items():
        groups.setdefault(span.user_id, []).append(response_time(trace, jid))
    return {u: fmean(v) for u, v in sorted(groups.items())}


def per_user_ratios(target: ExecutionTrace, ujf: ExecutionTrace) -> dict[str, float]:
    """Per-user ratio computed from mean response times instead of job end times."""
    t, u = mean_rt_by_user(target), mean_rt_by_user(ujf)
    return {k: (t[k] - u[k]) / u[k] for k in u if k in t}


def ecdf(values) -> list[tuple[float, float]]:
    vals = sorted(values)
    n = len(vals)
    out: list[tuple[float, float]] = []
    for i, v in enumerate(vals, 1):
        if out and out[-1][0] == v:
            out[-1] = (v, i / n)
        else:
            out.append((v, i / n))
    return out


def ecdf_export(values, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for v, p in ecdf(values):
            w.writerow([repr(v), repr(p)])
    return path


def percentile_bands(rts: dict[str, float], edges=(0.8, 0.95)) -> list[list[str]]:
    """Split job ids into RT-rank bands (0-80 %, 80-95 %, 95-100 % by default)."""
    ranked = sorted(rts, key=lambda j: (rts[j], j))
    n = len(ranked)
    cuts = [0] + [math.floor(e * n) for e in edges] + [n]
    return [ranked[a:b] for a, b in zip(cuts, cuts[1:])]


def _mean(xs) -> float:
    xs = list(xs)
    return fmean(xs) if xs else float("nan")


@dataclass
class MetricsReport:
    policy: str
    partitioner: str
    rt: dict[str, float]
    sl: dict[str, float] = field(default_factory=dict)
    ratios: dict[str, float] = field(default_factory=dict)
    user_ratios: dict[str, float] = field(default_factory=dict)
    user_mean_rt: dict[str, float] = field(default_factory=dict)
    makespan: float = 0.0
    strict: bool = False

    @property
    def mean_rt(self) -> float:
        return _mean(self.rt.values())

    @property
    def worst10_rt(self) -> float:
        vals = sorted(self.rt.values(), reverse=True)
        return _mean(vals[:max(1, math.ceil(0.1 * len(vals)))]) if vals else float("nan")

    @property
    def bands(self) -> list[float]:
        return [_mean(self.rt[j] for j in band) for band in percentile_bands(self.rt)]

    @property
    def mean_sl(self) -> float:
        return _mean(self.sl.values())

    def fairness(self):
        if not self.ratios:
            return (float("nan"), 0, float("nan"), 0)
        return dvr(self.ratios.values(), self.strict) + dsr(self.ratios.values(), self.strict)

    def user_fairness(self):
        if not self.user_ratios:
            return (float("nan"), 0, float("nan"), 0)
        return dvr(self.user_ratios.values(), self.strict) + dsr(self.user_ratios.values(), self.strict)

    def summary(self) -> dict:
        d, vc, s, sc = self.fairness()
        b = self.bands
        return {
            "policy": self.policy,
            "partitioner": self.partitioner,
            "jobs": len(self.rt),
            "makespan": self.makespan,
            "mean_rt": self.mean_rt,
            "worst10_rt": self.worst10_rt,
            "rt_0_80": b[0],
            "rt_80_95": b[1],
            "rt_95_100": b[2],
            "mean_sl": self.mean_sl,
            "dvr": d,
            "violations": vc,
            "dsr": s,
            "slack": sc,
        }

    def write(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / "metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["job_id", "response_time", "slowdown", "deadline_ratio"])
            for jid in self.rt:
                w.writerow([jid, _fmt(self.rt[jid]), _fmt(self.sl.get(jid, float("nan"))),
                            _fmt(self.ratios.get(jid, float("nan")))])
        with open(directory / "summary.txt", "w") as fh:
            for k, v in self.summary().items():
                fh.write(f"{k}={_fmt(v)}\n")
            for u, v in self.user_mean_rt.items():
                fh.write(f"user_mean_rt.{u}={_fmt(v)}\n")


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def build_report(trace: ExecutionTrace, ujf: ExecutionTrace | None = None,
                 idle: dict[str, float] | None = None, strict: bool = False) -> MetricsReport:
    rt = {jid: response_time(trace, jid) for jid in trace.jobs}
    rep = MetricsReport(trace.policy, trace.partitioner, rt, makespan=trace.makespan, strict=strict,
                        user_mean_rt=mean_rt_by_user(trace))
    if idle:
        rep.sl = {jid: rt[jid] / idle[jid] for jid in rt if jid in idle}
    if ujf is not None:
        rep.ratios = {jid: deadline_ratio(trace, ujf, jid) for jid in rt}
        rep.user_ratios = per_user_ratios(trace, ujf)
    return rep
