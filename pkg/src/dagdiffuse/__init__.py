"""Linear propagation over directed acyclic graphs with learned affinities."""

from .graph import Dag, GroupSchedule, MultiDagSet, check_bidirectional_symmetry, schedule_groups, validate_acyclic
from .kernels import KernelConfig, edge_weights, kernel_backward
from .propagate import propagate_all, propagate_backward, propagate_grouped, propagate_sequential

__version__ = "0.1.0"

__all__ = [
    "Dag",
    "GroupSchedule",
    "KernelConfig",
    "MultiDagSet",
    "check_bidirectional_symmetry",
    "edge_weights",
    "kernel_backward",
    "propagate_all",
    "propagate_backward",
    "propagate_grouped",
    "propagate_sequential",
    "schedule_groups",
    "validate_acyclic",
]
