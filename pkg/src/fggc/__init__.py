"""Frozen Gaussian grid-point correction for semiclassical Schrodinger problems."""

from .core import MeshError, MeshSpec, NeighborStrategy, PhaseIndex, named_strategy, validate_mesh
from .kernels import BACKEND

__all__ = [
    "BACKEND",
    "MeshError",
    "MeshSpec",
    "NeighborStrategy",
    "PhaseIndex",
    "named_strategy",
    "validate_mesh",
]

__version__ = "0.1.0"
