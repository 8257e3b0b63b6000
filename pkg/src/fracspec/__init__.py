"""Dirichlet eigenvalues of the fractional Laplacian on annuli and eccentric annuli.

Modules:
  special_fn        Gamma-function constants and the sphere-average functions psi, Psi, f, g
  radial_kernel     kernels and killing potentials of the radially reduced quadratic form
  spectral_1d       1D Galerkin eigensolver for the reduced and interval problems
  annulus_spectrum  full spectra by dimension shifting, nonradiality and sign predicates, sweeps
  eccentric_2d      2D Galerkin eigensolver on B_1 minus an off-centre disc, shape derivative
  cli               command-line front end (python -m fracspec)
"""

from .errors import (
    AssemblyDefectError,
    DomainError,
    FracSpecError,
    InvariantViolation,
    ParameterError,
    ResolutionError,
    ResourceError,
    SingularEvaluationError,
    UnsupportedDimensionError,
)
from .special_fn import FractionalParams

__version__ = "0.1.0"

__all__ = [
    "AssemblyDefectError",
    "DomainError",
    "FracSpecError",
    "FractionalParams",
    "InvariantViolation",
    "ParameterError",
    "ResolutionError",
    "ResourceError",
    "SingularEvaluationError",
    "UnsupportedDimensionError",
]
