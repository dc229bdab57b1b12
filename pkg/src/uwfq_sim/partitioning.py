"""Grouping a stage's work units into tasks.

``static_partition`` mimics size-based splitting across the available cores: a
skewed unit stays atomic.  ``runtime_partition`` targets tasks of roughly one
advisory task runtime (ATR) each, splitting oversized units.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .model import Stage


@dataclass(frozen=True)
class PartitionPlan:
    tasks: tuple[tuple[float, ...], ...]

    @property
    def partition_count(self) -> int:
        return len(self.tasks)

    @property
    def task_durations(self) -> list[float]:
        return [sum(t) for t in self.tasks]

    @property
    def max_task(self) -> float:
        return max(self.task_durations)


@dataclass(frozen=True)
class AtrConfig:
    atr: float

    def __post_init__(self):
        if not self.atr > 0:
            raise ValueError(f"atr must be > 0, got {self.atr!r}")


def _lpt(pieces, n: int) -> PartitionPlan:
    """Longest-processing-time packing of ``pieces`` into ``n`` bins."""
    bins: list[list[float]] = [[] for _ in range(n)]
    heap = [(0.0, i) for i in range(n)]
    for p in sorted(pieces, reverse=True):
        load, i = heapq.heappop(heap)
        bins[i].append(p)
        heapq.heappush(heap, (load + p, i))
    return PartitionPlan(tuple(tuple(b) for b in bins))


def static_partition(stage: Stage, cores: int) -> PartitionPlan:
    if cores < 1:
        raise ValueError("cores must be >= 1")
    return _lpt(stage.units, min(cores, len(stage.units)))


def partition_target(stage: Stage, atr: float) -> int:
    return max(1, math.ceil(stage.estimated_runtime / atr - 1e-12))


def runtime_partition(stage: Stage, cfg: AtrConfig | float) -> PartitionPlan:
    atr = cfg.atr if isinstance(cfg, AtrConfig) else AtrConfig(cfg).atr
    n = partition_target(stage, atr)
    pieces = []
    for u in stage.units:
        k = max(1, math.ceil(u * stage.error_factor / atr - 1e-12))
        pieces.extend([u / k] * k)
    return _lpt(pieces, min(n, len(pieces)))


def coalesce_floor(stage: Stage, cfg: AtrConfig | float, initial: int = 200) -> int:
    """Smallest partition count that shuffle-partition coalescing may shrink to."""
    if initial < 1:
        raise ValueError("initial must be >= 1")
    atr = cfg.atr if isinstance(cfg, AtrConfig) else AtrConfig(cfg).atr
    return min(initial, partition_target(stage, atr))


class Partitioner:
    """Callable turning a stage into task durations, bound to a cluster size."""

    name = "static"

    def __init__(self, kind: str = "static", atr: float | None = None, overhead: float = 0.0):
        if kind not in ("static", "runtime"):
            raise ValueError(f"unknown partitioner {kind!r}")
        if kind == "runtime" and atr is None:
            raise ValueError("runtime partitioning needs an atr")
        self.name = kind
        self.atr = atr
        self.overhead = float(overhead)

    def plan(self, stage: Stage, cores: int) -> PartitionPlan:
        if self.name == "static":
            return static_partition(stage, cores)
        return runtime_partition(stage, self.atr)

    def __call__(self, stage: Stage, cores: int) -> list[float]:
        return [d + self.overhead for d in self.plan(stage, cores).task_durations]

    def __repr__(self):
        return f"Partitioner({self.name!r}, atr={self.atr!r})"
