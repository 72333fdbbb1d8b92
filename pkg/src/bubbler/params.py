"""Problem specification, configuration space, and concentration-parameter algebra.

The bubble heights mu and all derived scales are explicit functions of the
centers xi: the selection identities are logarithmic and couple only through
Green's-function values, so no iteration is ever needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import DiskDomain
from .errors import ConfigurationError

__all__ = [
    "beta_of",
    "default_alpha_hat",
    "ProblemSpec",
    "make_spec",
    "BubbleConfig",
    "concentration_params",
    "build_config",
    "ConfigSpaceReport",
    "in_configuration_space",
    "theorem_bounds_check",
]

_INT_GUARD = 1e-9


def beta_of(m: int, alpha: float) -> float:
    """Separation exponent (m+1)(m+1+alpha)/2."""
    return 0.5 * (m + 1) * (m + 1 + alpha)


def default_alpha_hat(alpha: float) -> float:
    """Midpoint of the admissible interval (-1, min(alpha, -2/3))."""
    return 0.5 * (-1.0 + min(alpha, -2.0 / 3.0))


@dataclass(frozen=True)
class ProblemSpec:
    """Scalar problem data; immutable. Build through :func:`make_spec`."""

    alpha: float
    m: int
    t: float
    p: tuple = (0.0, 0.0)
    d: float = 0.3
    alpha_hat: float = field(default=None)  # filled by make_spec
    R0: float = 10.0

    @property
    def beta(self) -> float:
        return beta_of(self.m, self.alpha)

    @property
    def s(self) -> float:
        """Original eigenvalue-scaled parameter s = t * lambda1."""
        from .domain import lambda_1

        return self.t * lambda_1()


def make_spec(
    alpha: float,
    m: int,
    t: float,
    *,
    p=(0.0, 0.0),
    d: float = 0.3,
    alpha_hat: float | None = None,
    R0: float = 10.0,
) -> ProblemSpec:
    alpha = float(alpha)
    if alpha <= -1.0:
        raise ConfigurationError("alpha must exceed -1")
    # Positive integers (and anything within the guard of one) are rejected:
    # the linearized bubble operator picks up extra kernel there.  Exactly
    # alpha = 0 is admitted as the classical regular case; near-zero values
    # are rejected as ambiguous.
    if alpha != 0.0 and alpha > -_INT_GUARD and abs(alpha - round(alpha)) < _INT_GUARD:
        raise ConfigurationError(
            f"alpha={alpha} is within {_INT_GUARD} of a nonnegative integer; "
            "alpha must lie in (-1, inf) excluding the positive integers "
            "(exactly 0 selects the regular case)"
        )
    if m < 0 or int(m) != m:
        raise ConfigurationError("m must be a nonnegative integer")
    if t <= 0:
        raise ConfigurationError("t must be positive")
    if tuple(np.asarray(p, dtype=float)) != (0.0, 0.0):
        raise ConfigurationError(
            "the singular point is pinned to the origin (the unique maximum of phi1 on the disk)"
        )
    if alpha_hat is None:
        alpha_hat = default_alpha_hat(alpha)
    if not (-1.0 < alpha_hat < min(alpha, -2.0 / 3.0)):
        raise ConfigurationError("alpha_hat must satisfy -1 < alpha_hat < min(alpha, -2/3)")
    if not (0 < d < 1):
        raise ConfigurationError("d must lie in (0, 1)")
    if R0 <= 1:
        raise ConfigurationError("cutoff radius R0 must exceed 1")
    return ProblemSpec(alpha=alpha, m=int(m), t=float(t), p=(0.0, 0.0), d=float(d),
                       alpha_hat=float(alpha_hat), R0=float(R0))


def _xi_array(xi, m: int) -> np.ndarray:
    xi = np.asarray(xi, dtype=float).reshape(-1, 2)
    if xi.shape[0] != m:
        raise ConfigurationError(f"expected {m} centers, got {xi.shape[0]}")
    return xi


@dataclass(frozen=True)
class BubbleConfig:
    """Centers and every derived concentration scale; definitional identities:

    eps0 = e^{-t/2}, eps_i = e^{-t phi1(xi_i)/2}, rho0 = eps0^{1/(1+a)},
    v0 = mu0^{1/(1+a)}, gamma_i = eps_i mu_i / eps0.
    """

    spec: ProblemSpec
    xi: np.ndarray  # (m, 2)
    mu0: float
    mu: np.ndarray  # (m,)
    eps0: float
    eps: np.ndarray  # (m,)
    rho0: float
    v0: float
    gamma: np.ndarray  # (m,)

    @property
    def widths(self) -> np.ndarray:
        """Physical core widths: rho0*v0 for the singular bubble, eps_i*mu_i else."""
        return np.concatenate([[self.rho0 * self.v0], self.eps * self.mu])

    def to_dict(self) -> dict:
        return {
            "alpha": self.spec.alpha,
            "m": self.spec.m,
            "t": self.spec.t,
            "xi": self.xi.tolist(),
            "mu0": self.mu0,
            "mu": self.mu.tolist(),
            "eps0": self.eps0,
            "eps": self.eps.tolist(),
            "rho0": self.rho0,
            "v0": self.v0,
            "gamma": self.gamma.tolist(),
        }


def concentration_params(spec: ProblemSpec, xi, dom: DiskDomain):
    """Explicit bubble heights from the logged selection identities.

    mu0 solves  log(8 mu0^2 (1+a)^2 / k(p)) = (1+a) H(p,p) + sum_j G(p, xi_j);
    mu_i solves log(8 mu_i^2 / (k(xi_i) |xi_i - p|^{2a}))
               = H(xi_i, xi_i) + (1+a) G(xi_i, p) + sum_{j != i} G(xi_i, xi_j).
    Both right sides depend only on xi, so the solve is closed form.
    """
    a = spec.alpha
    xi = _xi_array(xi, spec.m)
    p = np.asarray(spec.p)
    if spec.m:
        dists = np.linalg.norm(xi - p, axis=1)
        if np.any(dists < 1e-14):
            raise ConfigurationError("a center coincides with the singular point")
        diff = xi[:, None, :] - xi[None, :, :]
        pair = np.linalg.norm(diff, axis=-1)
        if np.any(pair[np.triu_indices(spec.m, 1)] < 1e-14):
            raise ConfigurationError("two centers coincide")

    rhs0 = (1.0 + a) * float(dom.regular_part(p, p))
    for j in range(spec.m):
        rhs0 += float(dom.green(p, xi[j]))
    mu0 = np.sqrt(float(dom.k(p)) / (8.0 * (1.0 + a) ** 2)) * np.exp(0.5 * rhs0)

    mu = np.empty(spec.m)
    for i in range(spec.m):
        rhs = float(dom.regular_part(xi[i], xi[i])) + (1.0 + a) * float(dom.green(xi[i], p))
        for j in range(spec.m):
            if j != i:
                rhs += float(dom.green(xi[i], xi[j]))
        ki = float(dom.k(xi[i]))
        ri = float(np.linalg.norm(xi[i] - p))
        mu[i] = np.sqrt(ki * ri ** (2.0 * a) / 8.0) * np.exp(0.5 * rhs)
    return float(mu0), mu


def build_config(spec: ProblemSpec, xi, dom: DiskDomain) -> BubbleConfig:
    """Assemble all derived scales for a given set of centers."""
    xi = _xi_array(xi, spec.m)
    mu0, mu = concentration_params(spec, xi, dom)
    ep = dom.eigenpair()
    eps0 = np.exp(-0.5 * spec.t)
    eps = np.exp(-0.5 * spec.t * ep.phi1(xi)) if spec.m else np.empty(0)
    rho0 = eps0 ** (1.0 / (1.0 + spec.alpha))
    v0 = mu0 ** (1.0 / (1.0 + spec.alpha))
    gamma = eps * mu / eps0
    return BubbleConfig(spec=spec, xi=xi, mu0=mu0, mu=np.asarray(mu), eps0=float(eps0),
                        eps=np.asarray(eps), rho0=float(rho0), v0=float(v0),
                        gamma=np.asarray(gamma))


@dataclass
class ConfigSpaceReport:
    accepted: bool
    on_boundary: bool
    violations: list
    slacks: dict

    def __bool__(self):
        return self.accepted


def in_configuration_space(spec: ProblemSpec, xi, dom: DiskDomain,
                           boundary_tol: float = 1e-12) -> ConfigSpaceReport:
    """Membership test for the admissible center set (closure accepted).

    Constraints: each center in the closed ball of radius d about p; center
    separation from p and pairwise separation at least t^{-beta}; eigenfunction
    level within 1/sqrt(t) of the maximum.  Equality within ``boundary_tol``
    (relative) is accepted and flagged.
    """
    xi = _xi_array(xi, spec.m)
    p = np.asarray(spec.p)
    ep = dom.eigenpair()
    sep = spec.t ** (-spec.beta)
    violations = []
    slacks = {}
    on_boundary = False

    def register(name, slack, scale):
        nonlocal on_boundary
        slacks[name] = slack
        if slack < -boundary_tol * scale:
            violations.append(name)
        elif slack <= boundary_tol * scale:
            on_boundary = True

    for i in range(spec.m):
        ri = float(np.linalg.norm(xi[i] - p))
        register(f"|xi_{i}-p| <= d", spec.d - ri, spec.d)
        register(f"|xi_{i}-p| >= 1/t^beta", ri - sep, max(sep, 1e-300))
        lev = 1.0 / np.sqrt(spec.t) - (1.0 - float(ep.phi1(xi[i])))
        register(f"1-phi1(xi_{i}) <= 1/sqrt(t)", lev, 1.0 / np.sqrt(spec.t))
    for i in range(spec.m):
        for j in range(i + 1, spec.m):
            dij = float(np.linalg.norm(xi[i] - xi[j]))
            register(f"|xi_{i}-xi_{j}| >= 1/t^beta", dij - sep, max(sep, 1e-300))

    return ConfigSpaceReport(accepted=not violations, on_boundary=on_boundary,
                             violations=violations, slacks=slacks)


def theorem_bounds_check(cfg: BubbleConfig, spec: ProblemSpec) -> dict:
    """Ratios whose boundedness along a t-ladder reflects the height bounds.

    No pass/fail here: the constants in 1/C <= mu0 <= C t^{2 m beta} and
    1/C <= mu_i <= C t^{(2m+alpha) beta} are not specified, so a ladder run
    inspects these ratios for boundedness instead.
    """
    t, b = spec.t, spec.beta
    return {
        "mu0_over_t2mbeta": cfg.mu0 / t ** (2 * spec.m * b),
        "mu_over_t_2m_plus_alpha_beta": (cfg.mu / t ** ((2 * spec.m + spec.alpha) * b)).tolist(),
        "mu_min": float(min([cfg.mu0, *cfg.mu.tolist()])),
        "t": t,
    }
