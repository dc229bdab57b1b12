"""Deterministic discrete-event execution of a workload on a flat pool of cores."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .model import Cluster, ExecutionTrace, Job, JobSpan, Stage, TaskRecord, validate_workload
from .partitioning import Partitioner
from .policies import Policy, PolicyContext, make_policy

_FINISH, _ARRIVAL = 0, 1


class Deadlock(RuntimeError):
    pass


@dataclass
class _StageRun:
    job: Job
    stage: Stage
    pending: deque = field(default_factory=deque)
    left: int = 0

    @property
    def key(self):
        return (self.job.job_id, self.stage.index)


def run(jobs, policy: Policy | str, partitioner: Partitioner | None = None,
        cluster: Cluster | None = None) -> ExecutionTrace:
    """Simulate ``jobs`` to completion and return the execution trace.

    Whenever a job arrives or a task finishes, every free core is filled, one at
    a time, with the next task of the highest-priority runnable stage; the
    policy is asked afresh for each core.  Tasks are never preempted and a
    stage's tasks are handed out longest first.
    """
    cluster = cluster or Cluster()
    partitioner = partitioner or Partitioner("static")
    jobs = validate_workload(jobs, cluster)
    if isinstance(policy, str):
        policy = make_policy(policy, cluster.total_cores)
    R = cluster.total_cores

    events: list = []
    seq = 0
    for job in jobs:
        heapq.heappush(events, (job.arrival, _ARRIVAL, seq, job))
        seq += 1

    free = list(range(R))
    heapq.heapify(free)
    runnable: dict[tuple[str, int], _StageRun] = {}
    ctx = PolicyContext(now=0.0)
    trace = ExecutionTrace(policy=policy.name, partitioner=partitioner.name)
    stage_end: dict[tuple[str, int], float] = {}

    def submit(job: Job, index: int, now: float):
        stage = job.stages[index]
        durations = sorted(partitioner(stage, R), reverse=True)
        sr = _StageRun(job, stage, deque(enumerate(durations)), len(durations))
        runnable[sr.key] = sr
        ctx.stage_running[sr.key] = 0
        policy.on_stage_submit(job, stage, now)

    def dispatch(now: float):
        nonlocal seq
        while free:
            ready = [sr for sr in runnable.values() if sr.pending]
            if not ready:
                return
            best = min(ready, key=lambda sr: policy.priority(ctx, sr.job, sr.stage)
                       + (sr.job.arrival, sr.job.job_id, sr.stage.index))
            task_index, duration = best.pending.popleft()
            core = heapq.heappop(free)
            job = best.job
            rec = TaskRecord(job.job_id, job.user_id, best.stage.stage_id, best.stage.index,
                             task_index, now, now + duration, core)
            ctx.stage_running[best.key] += 1
            ctx.user_running[job.user_id] = ctx.user_running.get(job.user_id, 0) + 1
            heapq.heappush(events, (rec.end, _FINISH, seq, (best, rec)))
            seq += 1

    while events:
        now = events[0][0]
        ctx.now = now
        while events and events[0][0] == now:
            _, kind, _, payload = heapq.heappop(events)
            if kind == _ARRIVAL:
                job = payload
                ctx.user_arrival.setdefault(job.user_id, job.arrival)
                trace.jobs[job.job_id] = JobSpan(job.job_id, job.user_id, job.arrival, now, float("nan"))
                policy.on_job_arrival(job, now)
                submit(job, 0, now)
                continue
            sr, rec = payload
            trace.tasks.append(rec)
            heapq.heappush(free, rec.core)
            ctx.stage_running[sr.key] -= 1
            ctx.user_running[rec.user_id] -= 1
            sr.left -= 1
            if sr.left:
                continue
            del runnable[sr.key]
            del ctx.stage_running[sr.key]
            stage_end[sr.key] = now
            job = sr.job
            if sr.stage.index + 1 < len(job.stages):
                submit(job, sr.stage.index + 1, now)
            else:
                trace.jobs[job.job_id].end = now
                policy.on_job_finish(job, now)
        dispatch(now)

    if runnable:
        raise Deadlock(f"{len(runnable)} stages never completed: {sorted(runnable)[:5]}")
    trace.tasks.sort(key=lambda t: (t.start, t.core))
    return trace


def idle_runtime(job: Job, cluster: Cluster | None = None, partitioner: Partitioner | None = None) -> float:
    """Response time of ``job`` when it has the cluster to itself."""
    trace = run([job], "fifo", partitioner, cluster)
    return trace.jobs[job.job_id].response_time


def idle_runtimes(jobs, cluster: Cluster | None = None, partitioner: Partitioner | None = None) -> dict[str, float]:
    cache: dict = {}
    out = {}
    for job in jobs:
        shape = tuple((s.units, s.error_factor) for s in job.stages)
        if shape not in cache:
            cache[shape] = idle_runtime(job, cluster, partitioner)
        out[job.job_id] = cache[shape]
    return out
