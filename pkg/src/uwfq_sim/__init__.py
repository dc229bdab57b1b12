"""Discrete-event simulator for user-then-job fair scheduling on a multi-user cluster."""

from .engine import idle_runtime, run
from .fluid import brute_force_fluid, two_level_virtual_fluid, ujf_fluid
from .model import Cluster, ExecutionTrace, Job, Stage, make_job
from .partitioning import Partitioner, runtime_partition, static_partition
from .policies import POLICY_NAMES, make_policy
from .virtual_time import VirtualClock, replay_kernel

__all__ = [
    "Cluster", "ExecutionTrace", "Job", "Stage", "make_job",
    "Partitioner", "runtime_partition", "static_partition",
    "POLICY_NAMES", "make_policy", "VirtualClock", "replay_kernel",
    "run", "idle_runtime", "ujf_fluid", "two_level_virtual_fluid", "brute_force_fluid",
]
