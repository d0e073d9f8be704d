import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plaplab.counterexample import (
    DEFAULT_EPS,
    blowup_report,
    check_hypotheses,
    g_eps,
    l2_norm_g,
    l2_norm_g_simpson,
    phi,
    phi_pow_products,
    phi_prime,
    resolve_cutoff,
    sphere_area,
    tail_integral,
    tail_integral_quad,
    v_eps,
)


@pytest.mark.parametrize("cutoff", ["quintic", "smooth"])
def test_phi_values(cutoff):
    assert phi(0.5, cutoff) == 0.0 and phi(1.0, cutoff) == 0.0
    assert phi(2.0, cutoff) == 1.0 and phi(3.0, cutoff) == 1.0
    assert phi(1.5, cutoff) == pytest.approx(0.5, abs=1e-15)
    s = np.linspace(0, 3, 30001)
    v = phi(s, cutoff)
    assert np.all((v >= 0) & (v <= 1)) and np.all(np.diff(v) >= 0)
    with pytest.raises(ValueError):
        phi(-0.1, cutoff)


def test_phi_slope_bounds():
    s = np.linspace(0, 3, 300001)
    assert np.max(np.abs(phi_prime(s, "quintic"))) == pytest.approx(1.875, abs=1e-9)
    assert np.max(np.abs(phi_prime(s, "smooth"))) == pytest.approx(2.0, abs=1e-6)


@pytest.mark.parametrize("cutoff", ["quintic", "smooth"])
def test_phi_prime_matches_differences(cutoff):
    s = np.linspace(0.9, 2.1, 241)
    d = 1e-6
    fd = (phi(s + d, cutoff) - phi(s - d, cutoff)) / (2 * d)
    assert np.max(np.abs(fd - phi_prime(s, cutoff))) < 1e-6


def test_phi_pow_products_match_direct_powers():
    s = np.linspace(1.05, 1.95, 50)
    for cutoff in ("quintic", "smooth"):
        a, b = phi_pow_products(s, 0.7, cutoff)
        assert np.allclose(a, phi(s, cutoff) ** 0.7 * phi_prime(s, cutoff), rtol=1e-12)
        assert np.allclose(b, phi(s, cutoff) ** 1.7, rtol=1e-12)


def test_resolve_cutoff():
    assert resolve_cutoff("auto", 0.0) == "quintic"
    assert resolve_cutoff("auto", -0.8) == "smooth"
    with pytest.raises(ValueError):
        resolve_cutoff("quintic", -0.7)
    with pytest.raises(ValueError):
        resolve_cutoff("cubic", 0.0)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(4) == pytest.approx(2 * math.pi**2)


def test_v_eps_closed_form_and_core():
    eps = 1e-3
    assert v_eps(0.5, eps) == pytest.approx(math.log(2.0), abs=1e-15)
    assert v_eps(2 * eps, eps) == pytest.approx(-math.log(2 * eps), abs=1e-12)
    core = v_eps(eps, eps)
    assert v_eps(0.0, eps) == core and v_eps(0.3 * eps, eps) == core
    for e in DEFAULT_EPS:
        assert v_eps(0.0, e) >= -math.log(2 * e)
    with pytest.raises(ValueError):
        v_eps(1.5, eps)
    with pytest.raises(ValueError):
        v_eps(0.1, 0.5)


@pytest.mark.parametrize("cutoff", ["quintic", "smooth"])
def test_v_eps_nonincreasing_and_continuous(cutoff):
    eps = 1e-2
    r = np.linspace(0, 1, 2001)
    v = v_eps(r, eps, cutoff)
    assert np.all(np.diff(v) <= 1e-13)
    rr = np.array([eps, 2 * eps])
    assert np.allclose(v_eps(rr - 1e-10, eps, cutoff), v_eps(rr + 1e-10, eps, cutoff), atol=1e-8)


def test_g_eps_tail_values():
    eps, r = 1e-3, np.array([2e-3, 0.01, 0.5, 1.0])
    assert np.allclose(g_eps(r, eps, 5, 3.0, 0.25), 3 * r ** (-2.25), rtol=1e-14)
    assert np.all(g_eps(r, eps, 2, 3.0, 0.25) == 0.0)
    assert np.all(g_eps(np.linspace(0, eps, 11), eps, 5, 3.0, 0.25) == 0.0)


@pytest.mark.parametrize("gamma,cutoff", [(-0.5, "quintic"), (-0.9, "smooth"), (-0.3, "smooth")])
def test_g_eps_finite_for_negative_gamma(gamma, cutoff):
    eps = 1e-2
    r = np.linspace(eps, 2 * eps, 100001)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        g = g_eps(r, eps, 4, 2.5, gamma, cutoff)
    assert np.all(np.isfinite(g))


@pytest.mark.parametrize("gamma", [0.0, 0.5])
def test_g_eps_continuous_at_band_edges(gamma):
    eps = 1e-2
    for edge in (eps, 2 * eps):
        a, b = g_eps(np.array([edge * (1 - 1e-12), edge * (1 + 1e-12)]), eps, 5, 2.0, gamma)
        assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


@pytest.mark.parametrize("n,gamma", [(4, 0.0), (5, 0.0), (6, 0.7), (5, -0.4)])
def test_tail_quadrature_matches_closed_form(n, gamma):
    for eps in (1e-2, 1e-4):
        closed = tail_integral(eps, n, gamma)
        assert tail_integral_quad(eps, n, 2.0, gamma) == pytest.approx(closed, rel=1e-8)


def test_simpson_matches_quadrature():
    for eps in (1e-1, 1e-2):
        assert l2_norm_g_simpson(eps, 5, 2.0, 0.0) == pytest.approx(l2_norm_g(eps, 5, 2.0, 0.0), rel=1e-6)


def test_critical_norm_grows_like_log():
    c = [l2_norm_g(e, 4, 2.0, 0.0) ** 2 / math.log(1 / e) for e in DEFAULT_EPS]
    assert max(c) / min(c) <= 3


def test_subcritical_norm_bounded():
    vals = [l2_norm_g(e, 5, 2.0, 0.0) for e in DEFAULT_EPS]
    assert max(vals) / min(vals) <= 1.5


@pytest.mark.parametrize("n,gamma", [(3, -0.5), (3, 0.0), (2, -0.5), (4, 0.1), (5, -1.0)])
def test_hypotheses_rejected(n, gamma):
    with pytest.raises(ValueError):
        check_hypotheses(n, gamma)
    with pytest.raises(ValueError):
        blowup_report(n, 2.0, gamma)


def test_blowup_critical_n4():
    rep = blowup_report(4, 2.0, 0.0)
    assert rep.critical and rep.expected_exponent == 0.5
    assert 0.4 <= rep.fit_exponent <= 0.6
    assert rep.sup_increasing and rep.passed
    assert math.isnan(rep.rows[0].fit_exponent) and rep.rows[-1].fit_exponent == rep.fit_exponent
    lines = rep.csv().splitlines()
    assert lines[0] == "eps,l2_g,sup_v,sup_u_scaled,fit_exponent" and len(lines) == 6


def test_blowup_subcritical_n5():
    rep = blowup_report(5, 2.0, 0.0)
    assert not rep.critical and rep.passed
    for row in rep.rows:
        assert row.sup_v >= -math.log(2 * row.eps)
    with pytest.raises(ValueError):
        blowup_report(5, 2.0, 0.0, [1e-3, 1e-2])


@settings(max_examples=30, deadline=None)
@given(eps=st.floats(1e-6, 0.4), r=st.floats(0.0, 1.0))
def test_v_eps_lower_bound_property(eps, r):
    assert v_eps(r, eps) >= -math.log(max(r, 2 * eps)) - 1e-12
