"""Scheduling policies: map a runnable stage to a priority (lower runs first).

The engine appends a deterministic tie-break (job arrival, job id, stage index)
to whatever a policy returns, so policies only encode their own ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import Job, Stage
from .virtual_time import VirtualClock

POLICY_NAMES = ("fifo", "fair", "ujf", "cfq", "uwfq")


class MissingDeadline(KeyError):
    pass


@dataclass
class PolicyContext:
    now: float
    # running (core-occupying) task counts
    stage_running: dict[tuple[str, int], int] = field(default_factory=dict)
    user_running: dict[str, int] = field(default_factory=dict)
    user_arrival: dict[str, float] = field(default_factory=dict)


class Policy:
    name = "base"

    def on_job_arrival(self, job: Job, now: float) -> None:
        pass

    def on_stage_submit(self, job: Job, stage: Stage, now: float) -> None:
        pass

    def on_job_finish(self, job: Job, now: float) -> None:
        pass

    def priority(self, ctx: PolicyContext, job: Job, stage: Stage) -> tuple:
        raise NotImplementedError


class Fifo(Policy):
    name = "fifo"

    def priority(self, ctx, job, stage):
        return (job.arrival,)


class Fair(Policy):
    """Fewest running tasks per stage first."""

    name = "fair"

    def priority(self, ctx, job, stage):
        return (ctx.stage_running.get((job.job_id, stage.index), 0),)


class Ujf(Policy):
    """Practical user-job fairness: pick the user with the fewest running tasks
    (earlier-arriving user on ties), then Fair among that user's stages."""

    name = "ujf"

    def priority(self, ctx, job, stage):
        return (ctx.user_running.get(job.user_id, 0),
                ctx.user_arrival.get(job.user_id, job.arrival),
                job.user_id,
                ctx.stage_running.get((job.job_id, stage.index), 0))


class Cfq(Policy):
    """Single-level virtual-time fair queuing.

    The virtual clock integrates ``R / N`` over time, N being the number of
    jobs currently in the system; a deadline is ``V + L`` with unit weights.
    With ``stage_granularity`` each stage gets its own deadline at submission
    using the stage's runtime, otherwise the job's deadline is fixed at arrival.
    """

    name = "cfq"

    def __init__(self, total_cores: int, stage_granularity: bool = True):
        self.R = float(total_cores)
        self.stage_granularity = stage_granularity
        self.v = 0.0
        self.t_prev = 0.0
        self.active = 0
        self.deadlines: dict = {}

    def advance(self, now: float) -> None:
        if self.active:
            self.v += (now - self.t_prev) * self.R / self.active
        self.t_prev = max(self.t_prev, now)

    def on_job_arrival(self, job, now):
        self.advance(now)
        self.active += 1
        if not self.stage_granularity:
            self.deadlines[job.job_id] = self.v + job.estimated_slot_time

    def on_stage_submit(self, job, stage, now):
        if self.stage_granularity:
            self.advance(now)
            self.deadlines[(job.job_id, stage.index)] = self.v + stage.estimated_runtime

    def on_job_finish(self, job, now):
        self.advance(now)
        self.active -= 1

    def deadline(self, job, stage) -> float:
        key = (job.job_id, stage.index) if self.stage_granularity else job.job_id
        return self.deadlines[key]

    def priority(self, ctx, job, stage):
        return (self.deadline(job, stage),)


class Uwfq(Policy):
    """Every stage inherits its job's global virtual deadline."""

    name = "uwfq"

    def __init__(self, total_cores: int, grace: float = 2.0, weights: dict | None = None):
        self.clock = VirtualClock(total_cores, grace=grace)
        self.weights = weights or {}

    def on_job_arrival(self, job, now):
        self.clock.assign_deadline(job.user_id, job.job_id, now, job.estimated_slot_time,
                                   weight=self.weights.get(job.user_id), arrival=job.arrival)

    def priority(self, ctx, job, stage):
        try:
            return (self.clock.deadlines[job.job_id],)
        except KeyError:
            raise MissingDeadline(job.job_id) from None


def make_policy(name: str, total_cores: int, cfq_stage_granularity: bool = True,
                grace: float = 2.0, weights: dict | None = None) -> Policy:
    name = name.lower()
    if name == "fifo":
        return Fifo()
    if name == "fair":
        return Fair()
    if name == "ujf":
        return Ujf()
    if name == "cfq":
        return Cfq(total_cores, stage_granularity=cfq_stage_granularity)
    if name == "uwfq":
        return Uwfq(total_cores, grace=grace, weights=weights)
    raise ValueError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")
