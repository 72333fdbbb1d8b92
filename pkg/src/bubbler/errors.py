"""Exception types shared across the package."""


class DomainError(ValueError):
    """Evaluation point violates a geometric precondition (outside disk, coincident, ...)."""


class ConfigurationError(ValueError):
    """Problem data is inadmissible (alpha near an integer, coincident centers, bad h, ...)."""


class QuadratureError(RuntimeError):
    """An integrand produced a non-finite value at a node, or a scheme could not be built."""


class ResolutionError(RuntimeError):
    """A grid is too coarse to resolve the narrowest bubble; message names the required size."""


class SolverError(RuntimeError):
    """A linear or nonlinear solve failed to converge; carries the residual history."""
