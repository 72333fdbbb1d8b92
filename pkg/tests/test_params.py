import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubbler.domain import DiskDomain
from bubbler.errors import ConfigurationError
from bubbler.params import (
    BubbleConfig,
    beta_of,
    build_config,
    concentration_params,
    default_alpha_hat,
    in_configuration_space,
    make_spec,
    theorem_bounds_check,
)

DOM = DiskDomain()


def test_beta_examples():
    assert beta_of(1, 0.0) == 2.0
    assert beta_of(2, 0.5) == 5.25
    assert beta_of(1, -0.5) == 1.5


def test_alpha_validation():
    for bad in [2.0, 1.0, 3.0 + 1e-10, -1.0, -1.3, 1e-10, -1e-10]:
        with pytest.raises(ConfigurationError):
            make_spec(bad, 1, 10.0)
    # fine: non-integers, negatives in (-1, 0), and exactly 0 (regular case)
    for ok in [0.5, -0.5, 1.5, 2.5, -0.99, 7.3, 0.0]:
        make_spec(ok, 1, 10.0)


def test_alpha_hat_default_in_interval():
    for a in [-0.9, -0.7, -0.5, 0.5, 3.2]:
        ah = default_alpha_hat(a)
        assert -1.0 < ah < min(a, -2.0 / 3.0)


def test_off_center_p_rejected():
    with pytest.raises(ConfigurationError):
        make_spec(0.5, 1, 10.0, p=(0.1, 0.0))


def test_concentration_m0():
    # mu0 = 1 / (2 sqrt(2) (1+alpha)) when H(p,p)=0 and k(p)=1
    for a in [-0.5, 0.5, 1.5]:
        spec = make_spec(a, 0, 10.0)
        mu0, mu = concentration_params(spec, np.empty((0, 2)), DOM)
        assert abs(mu0 - 1.0 / (2.0 * math.sqrt(2.0) * (1.0 + a))) < 1e-14
        assert mu.size == 0


def test_concentration_m1_derived_values():
    # 8 mu0^2 = e^{G(0,xi)} = |xi|^{-4} = 16 for |xi| = 0.5, alpha = 0
    spec = make_spec(0.0, 1, 10.0)
    xi = np.array([[0.5, 0.0]])
    mu0, mu = concentration_params(spec, xi, DOM)
    assert abs(mu0 - math.sqrt(2.0)) < 1e-12
    assert abs(mu[0] - 0.795495) < 1e-6
    assert abs(8 * mu[0] ** 2 - 5.0625) < 1e-10


def test_concentration_m1_exact_alpha0_formula():
    # same numbers through the closed forms with alpha = 0 substituted by hand
    G = DOM.green((0.0, 0.0), (0.5, 0.0))
    H = DOM.regular_part((0.5, 0.0), (0.5, 0.0))
    mu0 = math.sqrt(1.0 / 8.0) * math.exp(0.5 * G)
    mu1 = math.sqrt(1.0 / 8.0) * math.exp(0.5 * (H + G))
    assert abs(mu0 - math.sqrt(2)) < 1e-12
    assert abs(mu1 - 0.7954951288348661) < 1e-12


def test_coincident_centers_rejected():
    spec = make_spec(0.5, 2, 10.0)
    with pytest.raises(ConfigurationError):
        concentration_params(spec, [[0.1, 0.0], [0.1, 0.0]], DOM)
    with pytest.raises(ConfigurationError):
        concentration_params(spec, [[0.0, 0.0], [0.1, 0.0]], DOM)


def test_build_config_identities():
    spec = make_spec(0.5, 2, 12.0)
    xi = np.array([[0.15, 0.02], [-0.1, 0.11]])
    cfg = build_config(spec, xi, DOM)
    ep = DOM.eigenpair()
    assert abs(cfg.eps0 - math.exp(-6.0)) < 1e-18
    for i in range(2):
        assert abs(cfg.eps[i] - math.exp(-6.0 * ep.phi1(xi[i]))) <= 1e-14 * cfg.eps[i]
        assert abs(cfg.gamma[i] - cfg.eps[i] * cfg.mu[i] / cfg.eps0) <= 1e-14 * cfg.gamma[i]
    assert abs(cfg.rho0 - cfg.eps0 ** (1 / 1.5)) <= 1e-14 * cfg.rho0
    assert abs(cfg.v0 - cfg.mu0 ** (1 / 1.5)) <= 1e-14 * cfg.v0
    # definitional scale identity eps0^2 mu0^2 = (rho0 v0)^{2(1+alpha)}
    lhs = cfg.eps0**2 * cfg.mu0**2
    rhs = (cfg.rho0 * cfg.v0) ** (2.0 * 1.5)
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)


def test_build_config_t10_eps0():
    spec = make_spec(0.5, 0, 10.0)
    cfg = build_config(spec, np.empty((0, 2)), DOM)
    assert abs(cfg.eps0 - 6.737947e-3) < 1e-9


def test_alpha0_exponent_degeneracy():
    # alpha = 0: rho0 = eps0 and v0 = mu0 (exponent 1/(1+alpha) = 1)
    spec = make_spec(0.0, 0, 8.0)
    cfg = build_config(spec, np.empty((0, 2)), DOM)
    assert cfg.rho0 == cfg.eps0
    assert cfg.v0 == cfg.mu0


def test_serialization_roundtrip_idempotent():
    spec = make_spec(0.5, 1, 20.0)
    xi = np.array([[0.2, 0.05]])
    cfg = build_config(spec, xi, DOM)
    blob = json.dumps(cfg.to_dict())
    back = json.loads(blob)
    cfg2 = build_config(make_spec(back["alpha"], back["m"], back["t"]), np.asarray(back["xi"]), DOM)
    assert abs(cfg2.mu0 - cfg.mu0) <= 1e-14 * cfg.mu0
    assert np.all(np.abs(cfg2.mu - cfg.mu) <= 1e-14 * cfg.mu)


def test_config_space_boundary_equality_flag():
    spec = make_spec(0.0, 1, 100.0)  # beta = 2 so the threshold is 1e-4
    sep = 100.0 ** (-spec.beta)
    assert sep == 1e-4
    rep = in_configuration_space(spec, [[sep, 0.0]], DOM)
    assert rep.accepted and rep.on_boundary


def test_config_space_eigen_level_violation():
    spec = make_spec(0.5, 1, 100.0)
    # pick xi with 1 - phi1(xi) ~ 2/sqrt(t) > 1/sqrt(t)
    ep = DOM.eigenpair()
    target = 1.0 - 2.0 / math.sqrt(100.0)
    from scipy.optimize import brentq

    r = brentq(lambda rr: ep.phi1((rr, 0.0)) - target, 1e-6, 0.99)
    rep = in_configuration_space(spec, [[r, 0.0]], DOM)
    assert not rep.accepted
    assert any("1-phi1" in v for v in rep.violations)


def test_config_space_pairwise_monotone():
    spec = make_spec(0.5, 2, 40.0)
    sep = 40.0 ** (-spec.beta)
    base = np.array([[0.1, 0.0], [-0.1, 0.0]])
    ok = in_configuration_space(spec, base, DOM)
    assert ok.accepted
    tight = np.array([[0.1, 0.0], [0.1 - 0.5 * sep, 0.0]])
    bad = in_configuration_space(spec, tight, DOM)
    assert not bad.accepted
    assert all("xi_0-xi_1" in v for v in bad.violations)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.28), st.floats(0.0, 2 * math.pi))
def test_config_space_m1_radial_property(r, th):
    spec = make_spec(0.5, 1, 200.0)
    xi = [[r * math.cos(th), r * math.sin(th)]]
    rep = in_configuration_space(spec, xi, DOM)
    ep = DOM.eigenpair()
    expect = (
        r <= spec.d
        and r >= 200.0 ** (-spec.beta)
        and 1.0 - float(ep.phi1(xi[0])) <= 1.0 / math.sqrt(200.0)
    )
    assert rep.accepted == expect


def test_theorem_bounds_m0_t_independent():
    vals = []
    for t in [25.0, 50.0, 100.0, 200.0]:
        spec = make_spec(0.5, 0, t)
        cfg = build_config(spec, np.empty((0, 2)), DOM)
        vals.append(theorem_bounds_check(cfg, spec)["mu0_over_t2mbeta"])
    assert np.ptp(vals) < 1e-14
    assert all(v > 0 for v in vals)
