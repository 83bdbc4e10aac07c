import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covar_evt.empirical import LossPairSample, compute_ranks, r_hat
from covar_evt.exceptions import DomainError
from covar_evt.generative import GenerativeModel, sample
from covar_evt.mestimator import (
    DEFAULT_G,
    DEFAULT_M,
    Poly,
    TestFunctionSet,
    default_g,
    empirical_phi,
    fit_moments,
    fit_tdf,
    phi,
)
from covar_evt.tdf import Family, TdfModel, eval_r

from conftest import MODELS


def test_poly_parse():
    p = Poly.parse("2x+2y")
    assert dict(p.terms) == {(1, 0): 2.0, (0, 1): 2.0}
    q = Poly.parse("x*y^2 - 0.5")
    assert q(2.0, 3.0) == pytest.approx(17.5)
    assert Poly.parse("1")(0.3, 0.4) == 1.0
    with pytest.raises(DomainError):
        Poly.parse("sin(x)")


def test_defaults_cover_all_families():
    for fam in Family:
        assert TestFunctionSet.parse(DEFAULT_G[fam]).q == fam.arity
        assert DEFAULT_M[fam] > 0


def test_phi_independence_is_zero():
    g = TestFunctionSet.parse(["1", "x", "x*y"])
    np.testing.assert_allclose(phi(TdfModel.of("logistic", 1.0), g), 0.0, atol=1e-15)


def test_phi_comonotone_limit():
    # R -> min(x, y) as theta -> 0 with gap at most theta*log(2)*max(x, y); int int min = 1/3
    v = phi(TdfModel.of("logistic", 0.01), TestFunctionSet.parse("1"))[0]
    assert 1 / 3 - 0.01 * np.log(2) < v < 1 / 3


def _simpson_2d(f, n=2001):
    x = np.linspace(0.0, 1.0, n)
    w = np.ones(n)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    w /= 3 * (n - 1)
    X, Y = np.meshgrid(x, x, indexing="ij")
    return float(w @ f(X, Y) @ w)


@pytest.mark.parametrize("model", MODELS, ids=str)
def test_phi_matches_simpson_oracle(model):
    g = TestFunctionSet.parse(["1", "x", "2x+2y", "x*y^2"])
    oracle = [
        _simpson_2d(lambda X, Y, f=f: f(X, Y) * eval_r(model, X, Y)) for f in g.funcs
    ]
    # Simpson on the kinked integrand converges slowly; 2001^2 nodes reach ~1e-7
    np.testing.assert_allclose(phi(model, g), oracle, atol=2e-6)


def test_phi_logistic_closed_oracle():
    g = TestFunctionSet.parse("1")
    oracle = 1 - _simpson_2d(lambda X, Y: (X ** (5 / 3) + Y ** (5 / 3)) ** 0.6)
    assert phi(TdfModel.of("logistic", 0.6), g)[0] == pytest.approx(oracle, abs=1e-7)


def _midpoint_empirical(s, m, g, n=500):
    u = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(u, u, indexing="ij")
    rh = r_hat(s, m, X, Y, compute_ranks(s))
    return np.array([np.mean(f(X, Y) * rh) for f in g.funcs])


def test_empirical_phi_matches_midpoint_grid():
    s = LossPairSample(np.arange(50.0), np.arange(50.0))
    g = TestFunctionSet.parse(["1", "x", "2x+2y"])
    np.testing.assert_allclose(empirical_phi(s, 50, g), _midpoint_empirical(s, 50, g), atol=1e-3)
    s2 = sample(GenerativeModel.of("hr", 2.5), 400, 9)
    np.testing.assert_allclose(empirical_phi(s2, 40, g), _midpoint_empirical(s2, 40, g), atol=2 / 40)


def test_empirical_phi_hand_example():
    # n=4, m=2: ranks equal, corners a_i = (4.5 - i)/2 -> (1.75, 1.25, 0.75, 0.25)
    s = LossPairSample([1, 2, 3, 4], [1, 2, 3, 4])
    # rectangles [0.75,1]^2 and [0.25,1]^2: areas 1/16 and 9/16, divided by m
    assert empirical_phi(s, 2, TestFunctionSet.parse("1"))[0] == pytest.approx((1 / 16 + 9 / 16) / 2, abs=1e-15)


@pytest.mark.parametrize(
    "family, theta",
    [
        ("logistic", (0.6,)),
        ("husler_reiss", (2.5,)),
        ("bilogistic", (0.4, 0.7)),
        ("asym_logistic", (0.6, 0.5, 0.8)),
    ],
)
def test_self_consistency(family, theta):
    fam = Family.parse(family)
    g = TestFunctionSet.parse(DEFAULT_G[fam])
    target = phi(TdfModel(fam, theta), g)
    fit = fit_moments(target, fam, g, init=[0.9 * v for v in theta])
    assert fit.objective_value < 1e-12
    np.testing.assert_allclose(fit.theta_hat, theta, rtol=1e-3)
    assert fit.objective_value <= min(fit.restarts) * (1 + 1e-6) + 1e-14


def test_student_t_default_moments_are_collinear():
    # x and x+y integrate to phi_2 = 2 phi_1 by symmetry, so only one
    # direction of (nu, rho) is identified; the fit must still match the moments
    g = default_g("t")
    target = phi(TdfModel.of("t", 5.0, 0.6), g)
    assert target[1] == pytest.approx(2 * target[0], rel=1e-10)
    fit = fit_moments(target, "t", g, init=(4.0, 0.5))
    np.testing.assert_allclose(phi(fit.model, g), target, atol=1e-6)


def test_self_consistency_from_default_start():
    g = TestFunctionSet.parse("1")
    target = phi(TdfModel.of("logistic", 0.35), g)
    fit = fit_moments(target, "logistic", g)
    assert fit.theta_hat[0] == pytest.approx(0.35, abs=1e-5)


def test_fit_requires_matching_arity():
    s = sample(GenerativeModel.of("logistic", 0.6), 500, 1)
    with pytest.raises(DomainError):
        fit_tdf(s, 50, "bilogistic", TestFunctionSet.parse("1"))


def test_unattainable_moments_flag_boundary():
    g = TestFunctionSet.parse("1")
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        fit = fit_moments(np.array([0.5]), "logistic", g)  # above the comonotone 1/3
    assert fit.at_boundary
    assert any("boundary" in str(w.message) for w in rec)


def test_logistic_fit_monte_carlo():
    hits = 0
    for seed in range(20):
        s = sample(GenerativeModel.of("logistic", 0.6), 2000, 100 + seed)
        hits += 0.5 < fit_tdf(s, 180, "logistic").theta_hat[0] < 0.7
    assert hits >= 19


def test_student_t_fit_monte_carlo():
    s = sample(GenerativeModel.of("t", 5.0, 0.6), 3000, 11)
    nu, rho = fit_tdf(s, 100, "t").theta_hat
    assert abs(nu - 5.0) < 2.0 and abs(rho - 0.6) < 0.15


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.95), st.floats(-1e-4, 1e-4))
def test_phi_continuous(theta, d):
    g = TestFunctionSet.parse(["1", "x"])
    a = phi(TdfModel.of("logistic", theta), g)
    b = phi(TdfModel.of("logistic", theta + d), g)
    assert np.max(np.abs(a - b)) < 1e-3
