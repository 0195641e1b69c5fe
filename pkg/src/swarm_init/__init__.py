"""Chance-constrained design of sequential satellite-release schedules."""

from .drag import DragForcing, DragIncrements, drag_increments, forcing_series
from .errors import SwarmInitError
from .graph import StageGraph, build_row_ladder
from .orbit import DriftCenterState, OrbitModel, derive_coefficients
from .propagation import ConsensusModel, InjectedMismatch, StageMoments, propagate_moments
from .safety import DeploymentProblem, ReleasePolicy, SafetyConfig, Spacecraft, max_allowable_factor, sweep_interval

__version__ = "0.1.0"

__all__ = [
    "ConsensusModel", "DeploymentProblem", "DragForcing", "DragIncrements", "DriftCenterState",
    "InjectedMismatch", "OrbitModel", "ReleasePolicy", "SafetyConfig", "Spacecraft", "StageGraph",
    "StageMoments", "SwarmInitError", "build_row_ladder", "derive_coefficients", "drag_increments",
    "forcing_series", "max_allowable_factor", "propagate_moments", "sweep_interval",
]
