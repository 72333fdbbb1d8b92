"""Numerical constructor and verifier for multi-bubble states of a singular
Liouville problem -Delta u = |x-p|^{2a} k(x) e^{-t phi1} e^u on the unit disk."""

from .domain import DiskDomain, EigenPair, HSpec, PotentialData, bessel_j0, bessel_j1, lambda_1
from .errors import (
    ConfigurationError,
    DomainError,
    QuadratureError,
    ResolutionError,
    SolverError,
)

__version__ = "0.1.0"
