"""Quantum-trajectory simulator for a particle monitored by a phase-space
lattice of Gaussian meters, with renewal-theory analysis tools."""

__version__ = "0.1.0"

from .engine import InitialState, RunConfig, TrajectoryRecord, run_ensemble, run_trajectory
from .lattice import DetectorIndex, DetectorLattice, UnitsConfig
from .propagator import Potential

__all__ = [
    "DetectorIndex",
    "DetectorLattice",
    "InitialState",
    "Potential",
    "RunConfig",
    "TrajectoryRecord",
    "UnitsConfig",
    "run_ensemble",
    "run_trajectory",
    "__version__",
]
