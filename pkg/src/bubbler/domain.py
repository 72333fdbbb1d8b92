"""Analytic geometry and potentials of the unit disk.

Everything here is closed form: the Green's function of -Delta with the 8*pi
normalization and zero Dirichlet data, its regular part, the first Dirichlet
eigenpair (Bessel J0), and the lifts rho = (-Delta)^{-1} h for h in the
supported family (constants and radial polynomials), from which the weight
k = exp(-rho - (alpha/2) H(., p)) is assembled.

Points are numpy arrays of shape (..., 2); all evaluators are vectorized and
pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

__all__ = [
    "bessel_j0",
    "bessel_j1",
    "j0_first_zero",
    "lambda_1",
    "EigenPair",
    "HSpec",
    "PotentialData",
    "DiskDomain",
]


# ---------------------------------------------------------------------------
# Bessel J0 / J1: power series for |x| <= 12, Hankel asymptotics beyond.
# Absolute accuracy ~1e-13 on [0, 12] (covers [0, j01] with margin, where it
# is ~1e-15), ~1e-12 beyond; only the series branch is exercised by phi1.
# ---------------------------------------------------------------------------

_SERIES_CUT = 12.0


def _j0_series(x2):
    # sum_k (-1)^k (x^2/4)^k / (k!)^2, term recurrence in the quarter-square
    q = x2 / 4.0
    term = np.ones_like(q)
    acc = np.ones_like(q)
    for k in range(1, 60):
        term = term * (-q) / (k * k)
        acc = acc + term
        if np.all(np.abs(term) < 1e-20):
            break
    return acc


def _j1_series(x):
    q = x * x / 4.0
    term = np.full_like(q, 0.5)
    acc = np.full_like(q, 0.5)
    for k in range(1, 60):
        term = term * (-q) / (k * (k + 1))
        acc = acc + term
        if np.all(np.abs(term) < 1e-20):
            break
    return x * acc


def _hankel_ab(nu: int, n_terms: int = 10):
    # a_k = prod_{j<2k or odd} (4 nu^2 - (2j-1)^2) / (k! 8^k); split even/odd
    mu = 4.0 * nu * nu
    a = [1.0]
    for k in range(1, 2 * n_terms):
        a.append(a[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return a


_A0 = _hankel_ab(0)
_A1 = _hankel_ab(1)


def _j_asym(x, a, phase):
    ix = 1.0 / x
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    sign = 1.0
    for k in range(0, len(a) // 2):
        p = p + sign * a[2 * k] * ix ** (2 * k)
        q = q + sign * a[2 * k + 1] * ix ** (2 * k + 1)
        sign = -sign
    chi = x - phase
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def bessel_j0(x):
    """Bessel function of the first kind, order zero."""
    x = np.abs(np.asarray(x, dtype=float))
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.empty_like(x)
    small = x <= _SERIES_CUT
    if small.any():
        out[small] = _j0_series(x[small] ** 2)
    if (~small).any():
        out[~small] = _j_asym(x[~small], _A0, np.pi / 4.0)
    return out[0] if scalar else out


def bessel_j1(x):
    """Bessel function of the first kind, order one (odd in x)."""
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    s = np.sign(xa)
    x = np.abs(xa)
    out = np.empty_like(x)
    small = x <= _SERIES_CUT
    if small.any():
        out[small] = _j1_series(x[small])
    if (~small).any():
        out[~small] = _j_asym(x[~small], _A1, 3.0 * np.pi / 4.0)
    out = s * out
    return out[0] if scalar else out


@lru_cache(maxsize=1)
def j0_first_zero() -> float:
    """First positive zero of J0, by bisection on the power series."""
    lo, hi = 2.0, 3.0
    flo = float(bessel_j0(lo))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = float(bessel_j0(mid))
        if flo * fm <= 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
        if hi - lo < 1e-16:
            break
    return 0.5 * (lo + hi)


@lru_cache(maxsize=1)
def lambda_1() -> float:
    """First Dirichlet eigenvalue of -Delta on the unit disk: j01 squared."""
    z = j0_first_zero()
    return z * z


# ---------------------------------------------------------------------------
# Point utilities
# ---------------------------------------------------------------------------


def _pts(x) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.shape[-1] != 2:
        raise DomainError(f"points must have trailing dimension 2, got shape {a.shape}")
    return a


def _norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(x[..., 0] ** 2 + x[..., 1] ** 2)


# ---------------------------------------------------------------------------
# Eigenpair
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EigenPair:
    """First Dirichlet eigenpair, normalized so phi1(0) = 1 (J0(0) = 1)."""

    lambda1: float
    phi1: Callable[[np.ndarray], np.ndarray]
    phi1_grad: Callable[[np.ndarray], np.ndarray]


def _phi1(x):
    r = _norm(_pts(x))
    return bessel_j0(math.sqrt(lambda_1()) * r)


def _phi1_grad(x):
    x = _pts(x)
    r = _norm(x)
    root = math.sqrt(lambda_1())
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = -root * bessel_j1(root * r) / np.where(r > 0, r, 1.0)
    radial = np.where(r > 0, radial, -0.5 * lambda_1())  # J1(z)/z -> 1/2
    return x * radial[..., None]


# ---------------------------------------------------------------------------
# Forcing lifts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HSpec:
    """Supported forcing family: h = sum_i coeffs[i] |x|^{2i} (kind fixes arity)."""

    kind: str = "zero"  # "zero" | "constant" | "radial_poly"
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind == "zero":
            if self.coeffs:
                raise ConfigurationError("h kind 'zero' takes no coefficients")
        elif self.kind == "constant":
            if len(self.coeffs) != 1:
                raise ConfigurationError("h kind 'constant' takes exactly one coefficient")
        elif self.kind == "radial_poly":
            if not self.coeffs:
                raise ConfigurationError("h kind 'radial_poly' needs at least one coefficient")
        else:
            raise ConfigurationError(f"unsupported h kind {self.kind!r}")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    @property
    def poly(self) -> tuple:
        return () if self.kind == "zero" else self.coeffs


@dataclass(frozen=True)
class PotentialData:
    """Forcing h, its Dirichlet lift rho = (-Delta)^{-1} h, and the weight k."""

    h_spec: HSpec
    alpha: float
    p: tuple = (0.0, 0.0)

    def h(self, x):
        r2 = _norm(_pts(x)) ** 2
        out = np.zeros_like(r2)
        for i, a in enumerate(self.h_spec.poly):
            out = out + a * r2**i
        return out

    def rho(self, x):
        # -Delta[(1 - r^{2i+2}) / (2i+2)^2] = r^{2i}, vanishing on r=1
        r2 = _norm(_pts(x)) ** 2
        out = np.zeros_like(r2)
        for i, a in enumerate(self.h_spec.poly):
            out = out + a * (1.0 - r2 ** (i + 1)) / (2 * i + 2) ** 2
        return out

    def k(self, x):
        # H(., p) vanishes identically for p at the origin; kept for fidelity
        expo = -self.rho(x)
        if self.alpha != 0.0:
            expo = expo - 0.5 * self.alpha * _regular_part(_pts(x), np.asarray(self.p))
        return np.exp(expo)

    def log_k(self, x):
        expo = -self.rho(x)
        if self.alpha != 0.0:
            expo = expo - 0.5 * self.alpha * _regular_part(_pts(x), np.asarray(self.p))
        return expo


# ---------------------------------------------------------------------------
# Green's function (8 pi normalization) and regular part
# ---------------------------------------------------------------------------


def _check_source(y: np.ndarray, strict_interior: bool = True):
    ry = _norm(y)
    if strict_interior and np.any(ry >= 1.0):
        raise DomainError("source point must lie strictly inside the unit disk")


def _regular_part(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # H(x,y) = 4 log(|y| |x - y/|y|^2|) = 2 log(|x|^2 |y|^2 - 2 x.y + 1),
    # regular through y = 0 in this form.
    rx2 = x[..., 0] ** 2 + x[..., 1] ** 2
    ry2 = y[..., 0] ** 2 + y[..., 1] ** 2
    dot = x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]
    return 2.0 * np.log(rx2 * ry2 - 2.0 * dot + 1.0)


@dataclass(frozen=True)
class DiskDomain:
    """Unit disk centered at the origin, with potential data attached.

    The default potential is h = 0 (so rho = 0 and k = 1). Use
    ``DiskDomain.with_h(h_spec, alpha)`` to attach a nonzero forcing.
    """

    radius: float = 1.0
    center: tuple = (0.0, 0.0)
    pot: PotentialData = field(default_factory=lambda: PotentialData(HSpec(), 0.0))

    @staticmethod
    def with_h(h_spec: HSpec, alpha: float, p=(0.0, 0.0)) -> "DiskDomain":
        return DiskDomain(pot=PotentialData(h_spec, float(alpha), tuple(p)))

    # -- geometry ----------------------------------------------------------

    def contains(self, x, strict: bool = False):
        r = _norm(_pts(x))
        return r < 1.0 if strict else r <= 1.0 + 1e-12

    # -- Green's function ---------------------------------------------------

    def green(self, x, y):
        """G(x,y) with -Delta_x G = 8 pi delta_y, G = 0 on the boundary."""
        x = _pts(x)
        y = _pts(np.asarray(y, dtype=float))
        _check_source(y)
        if np.any(_norm(x) > 1.0 + 1e-12):
            raise DomainError("evaluation point outside the closed unit disk")
        d2 = (x[..., 0] - y[..., 0]) ** 2 + (x[..., 1] - y[..., 1]) ** 2
        if np.any(d2 == 0.0):
            raise DomainError("green: coincident evaluation and source points")
        return _regular_part(x, y) - 2.0 * np.log(d2)

    def green_grad_x(self, x, y):
        """Gradient in x of green(x, y); closed form."""
        x = _pts(x)
        y = _pts(np.asarray(y, dtype=float))
        _check_source(y)
        rx2 = x[..., 0] ** 2 + x[..., 1] ** 2
        ry2 = y[..., 0] ** 2 + y[..., 1] ** 2
        dot = x[..., 0] * y[..., 0] + x[..., 1] * y[..., 1]
        denom = (rx2 * ry2 - 2.0 * dot + 1.0)[..., None]
        gh = 2.0 * (2.0 * x * ry2[..., None] - 2.0 * y) / denom
        d = x - y
        d2 = (d[..., 0] ** 2 + d[..., 1] ** 2)[..., None]
        if np.any(d2 == 0.0):
            raise DomainError("green_grad_x: coincident points")
        return gh - 4.0 * d / d2

    def regular_part(self, x, y):
        """H(x,y) = G(x,y) - 4 log(1/|x-y|); smooth through x = y."""
        x = _pts(x)
        y = _pts(np.asarray(y, dtype=float))
        _check_source(y)
        return _regular_part(x, y)

    # -- eigenpair -----------------------------------------------------------

    def eigenpair(self) -> EigenPair:
        return EigenPair(lambda1=lambda_1(), phi1=_phi1, phi1_grad=_phi1_grad)

    # -- potential shortcuts -------------------------------------------------

    def k(self, x):
        return self.pot.k(x)

    def log_k(self, x):
        return self.pot.log_k(x)

    def rho(self, x):
        return self.pot.rho(x)

    def lift_h(self, h_spec: HSpec, alpha: float, p=(0.0, 0.0)) -> PotentialData:
        """Closed-form rho for the supported h family, with k assembled."""
        if not isinstance(h_spec, HSpec):
            h_spec = HSpec(**h_spec) if isinstance(h_spec, dict) else HSpec(*h_spec)
        return PotentialData(h_spec, float(alpha), tuple(p))
