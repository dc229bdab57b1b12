"""Domain types shared by the simulator: jobs, stages, clusters and execution records.

A work unit is represented as a plain positive float (seconds on one core).
Jobs are linear chains of stages; stage ``i + 1`` only becomes runnable after
every task of stage ``i`` completed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

# Absolute tie tolerance for simulated time, in seconds.
EPS = 1e-9


class ValidationError(ValueError):
    """Raised when a workload or one of its jobs is malformed."""


@dataclass(frozen=True)
class Stage:
    stage_id: str
    units: tuple[float, ...]
    index: int = 0
    # Multiplicative estimation error applied to the stage runtime estimate.
    error_factor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(float(u) for u in self.units))

    @property
    def work(self) -> float:
        return float(sum(self.units))

    @property
    def estimated_runtime(self) -> float:
        return self.work * self.error_factor


@dataclass(frozen=True)
class Job:
    job_id: str
    user_id: str
    arrival: float
    stages: tuple[Stage, ...]

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def slot_time(self) -> float:
        return job_slot_time(self)

    @property
    def estimated_slot_time(self) -> float:
        return float(sum(s.estimated_runtime for s in self.stages))

    @property
    def longest_unit(self) -> float:
        return max(max(s.units) for s in self.stages)


@dataclass(frozen=True)
class Cluster:
    total_cores: int = 32

    def __post_init__(self):
        if int(self.total_cores) != self.total_cores or self.total_cores < 1:
            raise ValidationError(f"total_cores must be a positive integer, got {self.total_cores!r}")


@dataclass(frozen=True)
class TaskRecord:
    job_id: str
    user_id: str
    stage_id: str
    stage_index: int
    task_index: int
    start: float
    end: float
    core: int

    @property
    def duration(self) -> float:
        return self.end - self.start


TASK_COLUMNS = ("job_id", "user_id", "stage_id", "stage_index", "task_index", "start", "end", "core")
JOB_COLUMNS = ("job_id", "user_id", "arrival", "submit", "end", "response_time")


@dataclass
class JobSpan:
    job_id: str
    user_id: str
    arrival: float
    submit: float
    end: float

    @property
    def response_time(self) -> float:
        return self.end - self.submit


@dataclass
class ExecutionTrace:
    tasks: list[TaskRecord] = field(default_factory=list)
    jobs: dict[str, JobSpan] = field(default_factory=dict)
    policy: str = ""
    partitioner: str = ""

    def tasks_of(self, job_id: str) -> list[TaskRecord]:
        return [t for t in self.tasks if t.job_id == job_id]

    @property
    def makespan(self) -> float:
        return max((s.end for s in self.jobs.values()), default=0.0)

    @property
    def busy_core_seconds(self) -> float:
        return float(sum(t.duration for t in self.tasks))

    def write_csv(self, directory: str | Path) -> tuple[Path, Path]:
        """Write ``tasks.csv`` and ``jobs.csv`` into ``directory``.

        Floats are written with ``repr`` so files round-trip exactly and two
        identical runs produce byte-identical output.
        """
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        task_path = directory / "tasks.csv"
        job_path = directory / "jobs.csv"
        with open(task_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TASK_COLUMNS)
            for t in self.tasks:
                w.writerow([t.job_id, t.user_id, t.stage_id, t.stage_index, t.task_index,
                            repr(t.start), repr(t.end), t.core])
        with open(job_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(JOB_COLUMNS)
            for s in self.jobs.values():
                w.writerow([s.job_id, s.user_id, repr(s.arrival), repr(s.submit), repr(s.end),
                            repr(s.response_time)])
        return task_path, job_path


def job_slot_time(job: Job) -> float:
    """Total single-core work of a job: the sum of every work unit of every stage."""
    return float(sum(u for s in job.stages for u in s.units))


def validate_workload(jobs: Iterable[Job], cluster: Cluster | None = None) -> list[Job]:
    """Check a workload and return it sorted by (arrival, job_id)."""
    jobs = list(jobs)
    if cluster is not None and cluster.total_cores < 1:
        raise ValidationError("cluster must have at least one core")
    seen: set[str] = set()
    for job in jobs:
        if job.job_id in seen:
            raise ValidationError(f"duplicate job_id {job.job_id!r}")
        seen.add(job.job_id)
        if not job.arrival >= 0:
            raise ValidationError(f"job {job.job_id!r}: arrival must be >= 0, got {job.arrival!r}")
        if not job.stages:
            raise ValidationError(f"job {job.job_id!r}: needs at least one stage")
        for stage in job.stages:
            if not stage.units:
                raise ValidationError(f"job {job.job_id!r} stage {stage.stage_id!r}: no work units")
            for u in stage.units:
                if not u > 0:
                    raise ValidationError(
                        f"job {job.job_id!r} stage {stage.stage_id!r}: work unit duration must be > 0, got {u!r}")
            if not stage.error_factor > 0:
                raise ValidationError(f"job {job.job_id!r} stage {stage.stage_id!r}: error_factor must be > 0")
    return sorted(jobs, key=lambda j: (j.arrival, j.job_id))


def make_job(job_id, user_id, arrival, stages, error_factor=1.0) -> Job:
    """Build a job from a list of per-stage unit lists."""
    return Job(
        job_id=str(job_id),
        user_id=str(user_id),
        arrival=float(arrival),
        stages=tuple(
            Stage(stage_id=f"{job_id}/s{i}", units=tuple(units), index=i, error_factor=error_factor)
            for i, units in enumerate(stages)
        ),
    )


# Workload file (JSON or YAML):
#
#   cores: 32                       # optional
#   users:
#     - id: alice
#       weight: 1.0                 # optional, UWFQ user weight
#       jobs:
#         - id: a1
#           arrival: 0.0
#           error_factor: 1.0       # optional
#           stages: [[2.0, 2.0], [1.0]]
def load_workload_file(path: str | Path) -> tuple[list[Job], dict]:
    """Read a workload file; returns (validated jobs, extras) where extras holds
    ``cores`` (if given) and per-user ``weights``."""
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict) or "users" not in doc:
        raise ValidationError(f"{path}: expected a mapping with a 'users' list")
    jobs = []
    weights = {}
    for user in doc["users"]:
        uid = str(user["id"])
        if "weight" in user:
            weights[uid] = float(user["weight"])
        for j in user.get("jobs", []):
            try:
                jobs.append(make_job(j["id"], uid, j.get("arrival", 0.0), j["stages"],
                                     error_factor=float(j.get("error_factor", 1.0))))
            except KeyError as exc:
                raise ValidationError(f"{path}: job of user {uid!r} is missing field {exc}") from None
    extras = {"weights": weights}
    if "cores" in doc:
        extras["cores"] = int(doc["cores"])
    return validate_workload(jobs), extras


def dump_workload(jobs: Iterable[Job], weights: dict | None = None, cores: int | None = None) -> dict:
    users: dict[str, list] = {}
    for job in jobs:
        users.setdefault(job.user_id, []).append({
            "id": job.job_id,
            "arrival": job.arrival,
            "error_factor": job.stages[0].error_factor,
            "stages": [list(s.units) for s in job.stages],
        })
    doc: dict = {"users": []}
    if cores is not None:
        doc["cores"] = cores
    for uid, ujobs in users.items():
        entry = {"id": uid, "jobs": ujobs}
        if weights and uid in weights:
            entry["weight"] = weights[uid]
        doc["users"].append(entry)
    return doc
