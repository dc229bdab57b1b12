"""Workload generators for the micro-benchmark scenarios and trace ingestion.

Job templates are three-stage chains (load -> compute -> collect).  On 32 cores
with static partitioning a *short* job takes 2.25 s in an idle cluster and a
*tiny* job 0.90 s.
"""

from __future__ import annotations

import csv
import math
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from .model import Job, make_job, validate_workload

SHORT = ((0.2,) * 32, (2.0,) * 32, (0.05,))
TINY = ((0.1,) * 32, (0.75,) * 32, (0.05,))
TEMPLATES = {"short": SHORT, "tiny": TINY}


@dataclass
class UserSpec:
    user_id: str
    kind: str  # "poisson" | "burst" | "batch"
    template: str = "short"
    rate: float = 0.05  # poisson: jobs per second
    period: float = 30.0  # burst: seconds between bursts
    burst_size: int = 6  # burst / batch: jobs per burst
    start_delay: float = 0.0


@dataclass
class ScenarioConfig:
    seed: int = 0
    horizon: float = 300.0
    users: list[UserSpec] = field(default_factory=list)
    # relative std-dev of a per-job multiplicative runtime jitter (0 = none)
    jitter: float = 0.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be > 0")
        for u in self.users:
            if u.kind == "poisson" and not u.rate > 0:
                raise ValueError(f"user {u.user_id}: poisson rate must be > 0")
            if u.kind == "burst" and not u.period > 0:
                raise ValueError(f"user {u.user_id}: burst period must be > 0")


def _job(rng, cfg, user, n, arrival):
    stages = TEMPLATES[user.template]
    if cfg.jitter:
        f = max(0.1, rng.gauss(1.0, cfg.jitter))
        stages = [[u * f for u in s] for s in stages]
    return make_job(f"{user.user_id}-{n:04d}", user.user_id, round(arrival, 6), stages)


def generate(cfg: ScenarioConfig) -> list[Job]:
    """Build a workload; a pure function of the config (including its seed)."""
    rng = random.Random(cfg.seed)
    jobs = []
    for user in cfg.users:
        urng = random.Random(f"{cfg.seed}/{user.user_id}")
        n = 0
        if user.kind == "poisson":
            t = user.start_delay + urng.expovariate(user.rate)
            while t < cfg.horizon:
                jobs.append(_job(rng, cfg, user, n, t))
                n += 1
                t += urng.expovariate(user.rate)
        elif user.kind == "burst":
            t = user.start_delay
            while t < cfg.horizon:
                for _ in range(user.burst_size):
                    jobs.append(_job(rng, cfg, user, n, t))
                    n += 1
                t += user.period
        elif user.kind == "batch":
            for _ in range(user.burst_size):
                jobs.append(_job(rng, cfg, user, n, user.start_delay))
                n += 1
        else:
            raise ValueError(f"unknown user kind {user.kind!r}")
    return validate_workload(jobs)


# Bursts of 6 short jobs per frequent user (2 x 6 x 70.4 core-s every 30 s) keep
# 32 cores saturated for most of each period.
def scenario1_config(seed: int = 0, horizon: float = 300.0, burst_size: int = 6,
                     infrequent_rate: float = 1 / 20) -> ScenarioConfig:
    return ScenarioConfig(seed=seed, horizon=horizon, users=[
        UserSpec("infrequent-1", "poisson", "short", rate=infrequent_rate),
        UserSpec("infrequent-2", "poisson", "short", rate=infrequent_rate),
        UserSpec("frequent-1", "burst", "short", period=30.0, burst_size=burst_size),
        UserSpec("frequent-2", "burst", "short", period=30.0, burst_size=burst_size),
    ])


def scenario1(seed: int = 0, **kw) -> list[Job]:
    """Two Poisson-driven infrequent users and two users bursting every 30 s."""
    return generate(scenario1_config(seed, **kw))


# 50 jobs per user: large enough that stage-level CFQ runs every queued load
# stage before any compute stage.
def scenario2_config(seed: int = 0, jobs_per_user: int = 50,
                     delays=(0.0, 0.1, 0.2, 0.3)) -> ScenarioConfig:
    return ScenarioConfig(seed=seed, horizon=max(delays) + 1.0, users=[
        UserSpec(f"user-{i + 1}", "batch", "tiny", burst_size=jobs_per_user, start_delay=d)
        for i, d in enumerate(delays)
    ])


def scenario2(seed: int = 0, **kw) -> list[Job]:
    """Four users each submitting a batch of tiny jobs at staggered start delays."""
    return generate(scenario2_config(seed, **kw))


def user_class(user_id: str) -> str:
    return user_id.rsplit("-", 1)[0] if "-" in user_id else user_id


# -- trace ingestion ----------------------------------------------------------
#
# Trace CSV, one row per task (header required, column order free):
#
#   job_id,user_id,submit_ms,runtime_ms
#
# ``submit_ms`` is the job submission timestamp in integer or float
# milliseconds and must agree across a job's rows; ``runtime_ms`` is one task
# runtime in milliseconds, or several separated by ';'.


class ParseError(ValueError):
    pass


class EmptyWindow(ValueError):
    pass


@dataclass
class TraceRefinement:
    window_start: float = 1_473_800_000.0
    window_end: float = 1_474_300_000.0
    median_multiplier_cutoff: float = 10.0
    target_utilization: float = 1.0

    def __post_init__(self):
        if not self.window_end > self.window_start:
            raise ValueError("window_end must be > window_start")
        if not self.median_multiplier_cutoff > 1:
            raise ValueError("cutoff must be > 1")
        if not self.target_utilization > 0:
            raise ValueError("target_utilization must be > 0")

    @property
    def window_seconds(self) -> float:
        return (self.window_end - self.window_start) / 1000.0


@dataclass
class TraceReport:
    jobs_in_window: int
    jobs_dropped: int
    jobs_kept: int
    median_work: float
    scale: float
    utilization: float
    users: int
    large_user_share: float


def read_trace(path: str | Path) -> dict[str, dict]:
    """Parse a trace CSV into {job_id: {user, submit_ms, tasks_ms}}."""
    required = ("job_id", "user_id", "submit_ms", "runtime_ms")
    out: dict[str, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in required if c not in (reader.fieldnames or [])]
        if missing:
            raise ParseError(f"{path}:1: missing column(s) {', '.join(missing)}")
        for row in reader:
            line = reader.line_num
            try:
                submit = float(row["submit_ms"])
                runtimes = [float(x) for x in row["runtime_ms"].split(";") if x.strip()]
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{line}: bad number in {row!r}") from None
            if not runtimes or any(not r > 0 for r in runtimes):
                raise ParseError(f"{path}:{line}: task runtimes must be > 0")
            jid, uid = row["job_id"], row["user_id"]
            if not jid or not uid:
                raise ParseError(f"{path}:{line}: empty job_id or user_id")
            rec = out.setdefault(jid, {"user": uid, "submit_ms": submit, "tasks_ms": []})
            if rec["user"] != uid or rec["submit_ms"] != submit:
                raise ParseError(f"{path}:{line}: job {jid!r} has inconsistent user/submit time")
            rec["tasks_ms"].extend(runtimes)
    return out


def ingest_trace(path: str | Path, refinement: TraceRefinement | None = None, R: int = 32,
                 top_users: int = 5) -> tuple[list[Job], TraceReport]:
    """Window, filter and rescale a trace into a single-stage-job workload.

    Jobs whose total work exceeds ``cutoff`` times the median of the windowed
    set are dropped (one pass against that initial median); the survivors' task
    runtimes are scaled uniformly so that total work equals
    ``target_utilization * R * window_seconds``.
    """
    ref = refinement or TraceRefinement()
    raw = read_trace(path)
    windowed = {jid: r for jid, r in raw.items() if ref.window_start <= r["submit_ms"] < ref.window_end}
    if not windowed:
        raise EmptyWindow(f"no jobs between {ref.window_start} and {ref.window_end} ms")
    work = {jid: sum(r["tasks_ms"]) / 1000.0 for jid, r in windowed.items()}
    median = statistics.median(work.values())
    kept = {jid: r for jid, r in windowed.items() if work[jid] <= ref.median_multiplier_cutoff * median}
    if not kept:
        raise EmptyWindow("every job in the window was filtered out")
    total = math.fsum(work[jid] for jid in kept)
    scale = ref.target_utilization * R * ref.window_seconds / total
    t0 = min(r["submit_ms"] for r in kept.values())
    jobs = [
        make_job(jid, r["user"], (r["submit_ms"] - t0) / 1000.0, [[x / 1000.0 * scale for x in r["tasks_ms"]]])
        for jid, r in sorted(kept.items(), key=lambda kv: (kv[1]["submit_ms"], kv[0]))
    ]
    per_user: dict[str, float] = {}
    for j in jobs:
        per_user[j.user_id] = per_user.get(j.user_id, 0.0) + j.slot_time
    new_total = math.fsum(per_user.values())
    big = sorted(per_user.values(), reverse=True)[:top_users]
    report = TraceReport(
        jobs_in_window=len(windowed),
        jobs_dropped=len(windowed) - len(kept),
        jobs_kept=len(kept),
        median_work=median,
        scale=scale,
        utilization=new_total / (R * ref.window_seconds),
        users=len(per_user),
        large_user_share=math.fsum(big) / new_total,
    )
    return validate_workload(jobs), report


# WTA (Workflow Trace Archive) tasks table -> trace CSV rows.
WTA_FIELDS = {"workflow_id": "job_id", "user_id": "user_id", "ts_submit": "submit_ms", "runtime": "runtime_ms"}


def wta_rows(tasks) -> list[dict]:
    """Map WTA task records (dicts with workflow_id, user_id, ts_submit, runtime)
    to trace CSV rows; a workflow's submit time is its earliest task submit."""
    submit: dict = {}
    for t in tasks:
        wid = t["workflow_id"]
        submit[wid] = min(submit.get(wid, math.inf), float(t["ts_submit"]))
    return [{"job_id": str(t["workflow_id"]), "user_id": str(t["user_id"]),
             "submit_ms": submit[t["workflow_id"]], "runtime_ms": float(t["runtime"])}
            for t in tasks if float(t["runtime"]) > 0]


def write_trace(rows, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["job_id", "user_id", "submit_ms", "runtime_ms"], lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return path
