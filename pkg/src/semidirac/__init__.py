"""Semiclassical electron dynamics with a spin-dependent effective mass."""
from .fields import BesselBeam, BesselBeamParams, FieldSample, NoField, PlaneWave, StaticMagnet
from .invariants import Convention, effective_mass, eigenvalues, field_invariants
from .dynamics import SimulationConfig, SpinRule, Trajectory, TrajectoryState, integrate

__all__ = [
    "BesselBeam", "BesselBeamParams", "FieldSample", "NoField", "PlaneWave", "StaticMagnet",
    "Convention", "effective_mass", "eigenvalues", "field_invariants",
    "SimulationConfig", "SpinRule", "Trajectory", "TrajectoryState", "integrate",
]
__version__ = "0.1.0"
