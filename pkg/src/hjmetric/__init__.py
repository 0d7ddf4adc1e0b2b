"""Metric analysis of stationary ergodic Hamilton-Jacobi equations.

Intrinsic distances, stable norms, free and stationary critical values,
effective Hamiltonians and Lax-formula subsolutions/correctors computed on
quasi-periodic torus realizations, with numerical verification of the
identities tying them together.
"""

from .environment import GOLDEN_RATIO, OmegaPoint, TorusEnvironment
from .hamiltonian import HamiltonianSpec, PotentialSpec, TrigSum
from .convex import LagrangianTable, SublevelGeometry, support_from_lagrangian
from .metric import (
    CriticalBracket,
    DistanceField,
    MetricGraph,
    SourceSets,
    build_graph,
    coprime_offsets,
    detect_sources,
    free_critical_value,
    has_negative_cycle,
    multi_source_values,
    reverse_graph,
    shortest_distances,
)
from . import errors

__version__ = "0.1.0"

__all__ = [
    "GOLDEN_RATIO",
    "OmegaPoint",
    "TorusEnvironment",
    "HamiltonianSpec",
    "PotentialSpec",
    "TrigSum",
    "LagrangianTable",
    "SublevelGeometry",
    "support_from_lagrangian",
    "CriticalBracket",
    "DistanceField",
    "MetricGraph",
    "SourceSets",
    "build_graph",
    "coprime_offsets",
    "detect_sources",
    "free_critical_value",
    "has_negative_cycle",
    "multi_source_values",
    "reverse_graph",
    "shortest_distances",
    "errors",
]
