"""Bubble profiles, harmonic corrections, the full ansatz, density and residual
fields, approximate-kernel functions, cutoffs, and the weighted sup norm.

All fields are evaluated in the original variables x on the unit disk; the
rescaled picture y = x / eps0 (domain of diameter e^{t/2}) is reached through
the exact substitution rules

    W(y) = eps0^2 What(eps0 y),   E(y) = eps0^2 Ehat(eps0 y),
    V(y) = U(eps0 y) - 2 t,

never through arithmetic in the large domain.  Bubble core widths reach
e^{-t/2} ~ 1e-35 on the ladders used here, so every profile is assembled in
log space (logaddexp) and the residual subtracts its dominant density through
expm1 to dodge cancellation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .domain import DiskDomain
from .errors import DomainError
from .params import BubbleConfig, ProblemSpec

__all__ = [
    "AnsatzFields",
    "KernelSet",
    "chi_ramp",
    "calZ_p",
    "calZ_0",
    "calZ_j",
    "kernel_orthogonality_constant",
    "star_weight_y",
    "star_norm",
    "StarNormSamples",
]


def _pts(x):
    a = np.asarray(x, dtype=float)
    if a.shape[-1] != 2:
        raise DomainError(f"points must have trailing dimension 2, got {a.shape}")
    return a


# ---------------------------------------------------------------------------
# Ansatz fields
# ---------------------------------------------------------------------------


class AnsatzFields:
    """Evaluators for u_i, H_i, U, the density What, and the residual Ehat.

    ``mode`` selects the harmonic correction: "exact" is the Fourier harmonic
    extension of the boundary trace -u_i (spectrally accurate, default);
    "closed" is the leading closed form H(x, c_i) - C_i, itself exactly
    harmonic, used in hot loops.
    """

    def __init__(self, spec: ProblemSpec, dom: DiskDomain, cfg: BubbleConfig,
                 n_boundary: int = 512, boundary_tol: float = 1e-10,
                 n_boundary_cap: int = 4096):
        self.spec = spec
        self.dom = dom
        self.cfg = cfg
        a = spec.alpha
        m = spec.m
        self.centers = np.vstack([np.asarray(spec.p)[None, :], cfg.xi]) if m else np.asarray(spec.p)[None, :]
        # per-bubble core scales eps_i mu_i (i = 0 is the singular bubble)
        self.core = np.concatenate([[cfg.eps0 * cfg.mu0], cfg.eps * cfg.mu])
        self.log_core_sq = 2.0 * np.log(self.core)
        # |x - c|^power inside the profile denominator
        self.power = np.concatenate([[2.0 * (1.0 + a)], np.full(m, 2.0)])
        # additive constants C_i of the profiles
        c0 = math.log(8.0 * cfg.mu0**2 * (1.0 + a) ** 2) - float(dom.log_k(spec.p))
        cs = [c0]
        for i in range(m):
            ri = float(np.linalg.norm(cfg.xi[i] - np.asarray(spec.p)))
            cs.append(math.log(8.0 * cfg.mu[i] ** 2) - float(dom.log_k(cfg.xi[i]))
                      - 2.0 * a * math.log(ri))
        self.const = np.asarray(cs)
        self._ep = dom.eigenpair()
        self._fourier = [self._boundary_fourier(i, n_boundary, boundary_tol, n_boundary_cap)
                         for i in range(m + 1)]

    # -- profiles ------------------------------------------------------------

    def _log_denom(self, i: int, X):
        """log(core_i^2 + |x - c_i|^{power_i}) without under/overflow."""
        X = _pts(X)
        d = X - self.centers[i]
        s2 = d[..., 0] ** 2 + d[..., 1] ** 2
        with np.errstate(divide="ignore"):
            return np.logaddexp(self.log_core_sq[i], 0.5 * self.power[i] * np.log(s2))

    def u(self, i: int, X):
        """Bubble profile u_i (i = 0 is the singular one); globally finite."""
        return self.const[i] - 2.0 * self._log_denom(i, X)

    def log_density(self, i: int, X):
        """log of the exact bubble density -Delta u_i."""
        X = _pts(X)
        d = X - self.centers[i]
        s2 = d[..., 0] ** 2 + d[..., 1] ** 2
        out = math.log(8.0) + self.log_core_sq[i] - 2.0 * self._log_denom(i, X)
        if i == 0:
            a = self.spec.alpha
            out = out + 2.0 * math.log1p(a)
            if a != 0.0:
                with np.errstate(divide="ignore"):
                    out = out + a * np.log(s2)
        return out

    def density(self, i: int, X):
        return np.exp(self.log_density(i, X))

    def laplacian_U(self, X):
        """Analytic Delta U = -sum_i density_i (the H_i are harmonic)."""
        X = _pts(X)
        acc = np.zeros(X.shape[:-1])
        for i in range(self.spec.m + 1):
            acc = acc + self.density(i, X)
        return -acc

    # -- harmonic corrections --------------------------------------------

    def _boundary_fourier(self, i: int, n_boundary: int, tol: float, cap: int):
        nb = n_boundary
        while True:
            th = 2.0 * np.pi * np.arange(nb) / nb
            bpts = np.stack([np.cos(th), np.sin(th)], axis=-1)
            coef = np.fft.rfft(-self.u(i, bpts)) / nb
            # keep modes above rounding noise
            mag = np.abs(coef)
            keep = np.nonzero(mag > 1e-17 * (mag[0] + 1.0))[0]
            n_eff = int(keep.max()) if keep.size else 0
            mid = th + np.pi / nb
            mpts = np.stack([np.cos(mid), np.sin(mid)], axis=-1)
            resid = np.abs(self._eval_fourier(coef[: n_eff + 1], mpts) + self.u(i, mpts)).max()
            if resid <= tol or nb >= cap:
                if resid > tol:
                    warnings.warn(
                        f"harmonic correction {i}: boundary residual {resid:.2e} above "
                        f"{tol:.0e} at the {nb}-node cap", RuntimeWarning)
                return coef[: n_eff + 1]
            nb *= 2

    @staticmethod
    def _eval_fourier(coef, X):
        X = _pts(X)
        w = X[..., 0] + 1j * X[..., 1]
        acc = np.full(w.shape, coef[0].real)
        wn = np.ones_like(w)
        for n in range(1, len(coef)):
            wn = wn * w
            acc = acc + 2.0 * (coef[n] * wn).real
        return acc

    def H(self, i: int, X, mode: str = "exact"):
        """Harmonic correction H_i: exact Fourier extension or leading closed form."""
        if mode == "exact":
            return self._eval_fourier(self._fourier[i], X)
        if mode == "closed":
            a = self.spec.alpha
            weight = (1.0 + a) if i == 0 else 1.0
            return weight * self.dom.regular_part(X, self.centers[i]) - self.const[i]
        raise ValueError(f"unknown correction mode {mode!r}")

    def boundary_residual(self, i: int, n_check: int = 733) -> float:
        th = 2.0 * np.pi * (np.arange(n_check) + 0.37) / n_check
        bpts = np.stack([np.cos(th), np.sin(th)], axis=-1)
        return float(np.abs(self.H(i, bpts) + self.u(i, bpts)).max())

    # -- assembled fields --------------------------------------------------

    def U(self, X, mode: str = "exact"):
        X = _pts(X)
        acc = np.zeros(X.shape[:-1])
        for i in range(self.spec.m + 1):
            acc = acc + self.u(i, X) + self.H(i, X, mode=mode)
        return acc

    def log_W(self, X, mode: str = "exact"):
        """log of What(x) = |x-p|^{2a} k(x) e^{-t phi1(x)} e^{U(x)}."""
        X = _pts(X)
        a = self.spec.alpha
        out = self.dom.log_k(X) - self.spec.t * self._ep.phi1(X) + self.U(X, mode=mode)
        if a != 0.0:
            d = X - np.asarray(self.spec.p)
            s2 = d[..., 0] ** 2 + d[..., 1] ** 2
            if a < 0.0 and np.any(s2 == 0.0):
                raise DomainError("density is infinite exactly at the singular point for alpha < 0")
            with np.errstate(divide="ignore"):
                out = out + a * np.log(s2)
        return out

    def W(self, X, mode: str = "exact"):
        return np.exp(self.log_W(X, mode=mode))

    def E(self, X, mode: str = "exact"):
        """Residual Ehat = Delta U + What with Delta U analytic.

        Near each core What and the local density agree to leading order;
        subtracting the dominant density through expm1 keeps the relative
        accuracy of the small difference.
        """
        X = _pts(X)
        logw = self.log_W(X, mode=mode)
        logd = np.stack([self.log_density(i, X) for i in range(self.spec.m + 1)])
        dom_idx = np.argmax(logd, axis=0)
        logd_dom = np.take_along_axis(logd, dom_idx[None], axis=0)[0]
        with np.errstate(over="ignore"):
            main = np.exp(logd_dom) * np.expm1(logw - logd_dom)
        # the non-dominant densities are exponentially smaller; subtract directly
        other = np.zeros_like(main)
        for i in range(self.spec.m + 1):
            other = other + np.where(dom_idx == i, 0.0, np.exp(logd[i]))
        return main - other

    def nonlin(self, X, phi, mode: str = "exact"):
        """N(phi) = What (e^phi - 1 - phi), pointwise."""
        return self.W(X, mode=mode) * (np.expm1(phi) - phi)

    # -- rescaled picture ---------------------------------------------------

    def V_y(self, Y, mode: str = "exact"):
        return self.U(self.cfg.eps0 * _pts(Y), mode=mode) - 2.0 * self.spec.t

    def W_y(self, Y, mode: str = "exact"):
        return self.cfg.eps0**2 * self.W(self.cfg.eps0 * _pts(Y), mode=mode)

    def E_y(self, Y, mode: str = "exact"):
        return self.cfg.eps0**2 * self.E(self.cfg.eps0 * _pts(Y), mode=mode)


# ---------------------------------------------------------------------------
# Kernels of the linearized bubble operators and cutoffs
# ---------------------------------------------------------------------------


def calZ_p(z, alpha: float):
    """(|z|^{2(1+a)} - 1) / (|z|^{2(1+a)} + 1); bounded by 1."""
    z = _pts(z)
    s2 = z[..., 0] ** 2 + z[..., 1] ** 2
    with np.errstate(divide="ignore"):
        q = np.exp((1.0 + alpha) * np.log(s2, where=s2 > 0, out=np.full_like(s2, -np.inf)))
    return (q - 1.0) / (q + 1.0)


def calZ_0(z):
    z = _pts(z)
    s2 = z[..., 0] ** 2 + z[..., 1] ** 2
    return (s2 - 1.0) / (s2 + 1.0)


def calZ_j(z, j: int):
    """4 z_j / (|z|^2 + 1) for j in {1, 2}; bounded by 2."""
    z = _pts(z)
    s2 = z[..., 0] ** 2 + z[..., 1] ** 2
    return 4.0 * z[..., j - 1] / (s2 + 1.0)


def chi_ramp(r, R0: float):
    """Radial C^2 cutoff: 1 on [0, R0], quintic smoothstep down to 0 at R0+1."""
    r = np.asarray(r, dtype=float)
    s = np.clip(r - R0, 0.0, 1.0)
    return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


@lru_cache(maxsize=8)
def kernel_orthogonality_constant(R0: float) -> float:
    """C = int chi(|z|) Z_j(z)^2 dz (j = 1, 2), by graded radial quadrature.

    The angular integral of z_j^2 is pi r^2, so C = 16 pi int chi r^3/(1+r^2)^2 dr.
    """
    from numpy.polynomial.legendre import leggauss
    xg, wg = leggauss(32)
    # panel edges at the cutoff kinks R0, R0+1 where chi loses smoothness
    edges = np.concatenate([np.linspace(0.0, R0, 33), np.linspace(R0, R0 + 1.0, 5)[1:]])
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * xg + 0.5 * (a + b)
        w = 0.5 * (b - a) * wg
        total += float(np.sum(w * chi_ramp(r, R0) * r**3 / (1.0 + r * r) ** 2))
    return 16.0 * math.pi * total


class KernelSet:
    """Approximate-kernel evaluators Z and cutoffs chi, in both pictures.

    y-picture: Z_p(y) = (eps0/(rho0 v0)) calZ_p((eps0 y - p)/(rho0 v0)),
    Z_ij(y) = (1/gamma_i) calZ_j((y - xi'_i)/gamma_i).  The x-picture columns
    used by the grid corrector carry the extra eps0^{-2} from the substitution
    of the rescaled equation.
    """

    def __init__(self, spec: ProblemSpec, cfg: BubbleConfig):
        self.spec = spec
        self.cfg = cfg
        self.R0 = spec.R0

    # rescaled centers
    @property
    def p_prime(self):
        return np.asarray(self.spec.p) / self.cfg.eps0

    @property
    def xi_prime(self):
        return self.cfg.xi / self.cfg.eps0

    def Z_p(self, Y):
        sc = self.cfg.rho0 * self.cfg.v0 / self.cfg.eps0
        z = (_pts(Y) - self.p_prime) / sc
        return calZ_p(z, self.spec.alpha) / sc

    def Z(self, i: int, j: int, Y):
        """Z_{ij}(y), i in 1..m, j in {0, 1, 2}."""
        g = self.cfg.gamma[i - 1]
        z = (_pts(Y) - self.xi_prime[i - 1]) / g
        val = calZ_0(z) if j == 0 else calZ_j(z, j)
        return val / g

    def chi_p(self, Y):
        sc = self.cfg.rho0 * self.cfg.v0 / self.cfg.eps0
        r = np.linalg.norm(_pts(Y) - self.p_prime, axis=-1) / sc
        return chi_ramp(r, self.R0)

    def chi(self, i: int, Y):
        g = self.cfg.gamma[i - 1]
        r = np.linalg.norm(_pts(Y) - self.xi_prime[i - 1], axis=-1) / g
        return chi_ramp(r, self.R0)

    def column_x(self, i: int, j: int, X):
        """chi_i Z_ij transported to the x-picture equation (factor eps0^{-2})."""
        w = self.cfg.eps0 * self.cfg.gamma[i - 1]  # = eps_i mu_i
        z = (_pts(X) - self.cfg.xi[i - 1]) / w
        r = np.linalg.norm(z, axis=-1)
        val = calZ_0(z) if j == 0 else calZ_j(z, j)
        return chi_ramp(r, self.R0) * val / (self.cfg.gamma[i - 1] * self.cfg.eps0**2)

    def orthogonality_constant(self) -> float:
        return kernel_orthogonality_constant(self.R0)


# ---------------------------------------------------------------------------
# Weighted sup norm
# ---------------------------------------------------------------------------


def star_weight_y(Y, spec: ProblemSpec, cfg: BubbleConfig):
    """The bracketed weight of the *-norm, evaluated in the y-picture."""
    Y = _pts(Y)
    a, ah = spec.alpha, spec.alpha_hat
    eps0 = cfg.eps0
    sc_p = cfg.rho0 * cfg.v0 / eps0
    zp = np.linalg.norm(Y - np.asarray(spec.p) / eps0, axis=-1) / sc_p
    with np.errstate(divide="ignore"):
        wp = (1.0 / sc_p**2) * np.exp(
            2.0 * a * np.log(zp, where=zp > 0, out=np.full_like(zp, -np.inf))
            - (4.0 + 2.0 * ah + 2.0 * a) * np.log1p(zp)
        )
    if a < 0:
        wp = np.where(zp == 0.0, np.inf, wp)
    out = eps0**2 + wp
    for i in range(spec.m):
        zi = np.linalg.norm(Y - cfg.xi[i] / eps0, axis=-1) / cfg.gamma[i]
        out = out + (1.0 / cfg.gamma[i] ** 2) / np.exp((4.0 + 2.0 * ah) * np.log1p(zi))
    return out


@dataclass(frozen=True)
class StarNormSamples:
    """Deterministic y-picture sample set: log-radial shells around each center
    plus a seeded far-field net; regenerated from (cfg, seed)."""

    Y: np.ndarray

    @staticmethod
    def build(spec: ProblemSpec, cfg: BubbleConfig, n_angles: int = 64,
              n_shells: int = 80, n_far: int = 2048, seed: int = 0) -> "StarNormSamples":
        eps0 = cfg.eps0
        centers = np.vstack([np.asarray(spec.p)[None, :], cfg.xi]) if spec.m else np.asarray(spec.p)[None, :]
        widths = cfg.widths  # x-picture core widths
        th = 2.0 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
        ring = np.stack([np.cos(th), np.sin(th)], axis=-1)
        pieces = []
        for c, w in zip(centers, widths):
            rmax = 0.98 * (1.0 - np.linalg.norm(c))
            radii = np.geomspace(max(1e-3 * w, 1e-290), rmax, n_shells)
            pieces.append((c + radii[:, None, None] * ring[None, :, :]).reshape(-1, 2))
        rng = np.random.default_rng(seed)
        rr = 0.999 * np.sqrt(rng.uniform(0, 1, n_far))
        aa = rng.uniform(0, 2 * np.pi, n_far)
        pieces.append(np.stack([rr * np.cos(aa), rr * np.sin(aa)], axis=-1))
        X = np.vstack(pieces)
        return StarNormSamples(Y=X / eps0)


def star_norm(f_y: Callable, spec: ProblemSpec, cfg: BubbleConfig,
              samples: StarNormSamples | None = None, seed: int = 0):
    """sup over the structured sample set of |f(y)| / weight(y).

    Returns (value, argmax point in y).  Non-finite samples are reported as
    failures naming the offending location.
    """
    if samples is None:
        samples = StarNormSamples.build(spec, cfg, seed=seed)
    vals = np.asarray(f_y(samples.Y), dtype=float)
    if not np.all(np.isfinite(vals)):
        idx = int(np.nonzero(~np.isfinite(vals))[0][0])
        raise ValueError(f"star_norm: non-finite sample at y={samples.Y[idx]} (x={samples.Y[idx]*cfg.eps0})")
    ratio = np.abs(vals) / star_weight_y(samples.Y, spec, cfg)
    k = int(np.argmax(ratio))
    return float(ratio[k]), samples.Y[k]


def star_norm_x(f_x: Callable, spec: ProblemSpec, cfg: BubbleConfig,
                samples: StarNormSamples | None = None, seed: int = 0):
    """Same norm with the argument supplied in the x-picture (exact substitution)."""
    return star_norm(lambda Y: cfg.eps0**2 * np.asarray(f_x(cfg.eps0 * _pts(Y))),
                     spec, cfg, samples=samples, seed=seed)
