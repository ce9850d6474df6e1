"""Topology changes of evolving domains given by a space-time level set, and
the heat equation solved across them on a fixed background grid."""

__version__ = "0.1.0"

from .errors import ArgumentError, ConvergenceError, DegeneratePointError, EmptyDomainError
from .levelset import (LevelSetField, SpaceTimeBox, analytic_field, field_from_expression,
                       linear_chart, make_normal_form, scenario, SCENARIOS)
from .morse import CriticalPoint, classify, find_critical_points
from .flowmap import Trajectory, advect, velocity_field
from .geometry import BackgroundGrid, DomainSlice, build_slice
from .inequalities import ConstantEstimate, hardy_constant, poincare_constant, trace_constant
from .cutoff import CutoffProfile, hole_counterexample
from .solver import BilinearFormSpec, SpaceTimeSolution, solve

__all__ = [
    "ArgumentError", "ConvergenceError", "DegeneratePointError", "EmptyDomainError",
    "LevelSetField", "SpaceTimeBox", "analytic_field", "field_from_expression", "linear_chart",
    "make_normal_form", "scenario", "SCENARIOS", "CriticalPoint", "classify",
    "find_critical_points", "Trajectory", "advect", "velocity_field", "BackgroundGrid",
    "DomainSlice", "build_slice", "ConstantEstimate", "hardy_constant", "poincare_constant",
    "trace_constant", "CutoffProfile", "hole_counterexample", "BilinearFormSpec",
    "SpaceTimeSolution", "solve",
]
