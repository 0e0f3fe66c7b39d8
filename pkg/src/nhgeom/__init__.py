"""Quantum geometry of non-Hermitian systems.

Submodules
----------
biortho
    Bi-orthogonal eigen-decomposition, projectors and band tracking.
qgt
    Berry connection, geometric tensor, metric and curvature for all four
    left/right flavors.
adiabatic
    Full two-component and effective single-band slow dynamics.
wannier
    Bloch bundles, smooth gauges and bi-orthogonal Wannier functions.
response
    Driven evolution, first-order transition theory and metric extraction.
cli
    The ``nhgeom`` experiment runner.
"""
from .biortho import BiorthogonalSystem, decompose, petermann, projector
from .errors import NHGeomError
from .models import BUILTIN_MODELS, builtin_model
from .qgt import GeometryResult, ParamHamiltonian, berry_connection, qgt_tensor

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_MODELS",
    "BiorthogonalSystem",
    "GeometryResult",
    "NHGeomError",
    "ParamHamiltonian",
    "berry_connection",
    "builtin_model",
    "decompose",
    "petermann",
    "projector",
    "qgt_tensor",
]
