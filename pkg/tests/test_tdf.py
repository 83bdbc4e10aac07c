import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covar_evt.exceptions import DomainError, NumericError
from covar_evt.tdf import (
    Family,
    TdfModel,
    bilogistic_crossing,
    eval_r,
    eval_r_partial2,
    mirror,
    r_one_eta_curve,
)

from conftest import MODELS, mp_t_cdf


def test_family_parsing_and_arity():
    assert Family.parse("HR") is Family.HUSLER_REISS
    assert Family.parse("t") is Family.STUDENT_T
    assert [f.arity for f in Family] == [1, 1, 2, 3, 2]
    with pytest.raises(DomainError):
        Family.parse("gumbel")


@pytest.mark.parametrize(
    "family, params",
    [
        ("logistic", (0.0,)),
        ("logistic", (1.2,)),
        ("husler_reiss", (-1.0,)),
        ("bilogistic", (1.0, 0.5)),
        ("asym_logistic", (0.5, 1.1, 0.5)),
        ("student_t", (5.0, -0.2)),
        ("student_t", (0.0, 0.5)),
        ("logistic", (0.5, 0.5)),
    ],
)
def test_invalid_parameters_rejected(family, params):
    with pytest.raises(DomainError):
        TdfModel.of(family, *params)


def test_negative_arguments_rejected():
    with pytest.raises(DomainError):
        eval_r(TdfModel.of("logistic", 0.5), -1.0, 1.0)


def test_logistic_independence_is_zero():
    assert eval_r(TdfModel.of("logistic", 1.0), 0.3, 0.7) == 0.0


def test_logistic_tdc_closed_form():
    assert eval_r(TdfModel.of("logistic", 0.6), 1, 1) == pytest.approx(2 - 2**0.6, abs=1e-14)


def test_husler_reiss_small_theta_vanishes():
    for x, y in [(1.0, 1.0), (0.2, 3.0)]:
        assert eval_r(TdfModel.of("hr", 1e-3), x, y) == pytest.approx(0.0, abs=1e-300)


def test_husler_reiss_known_value():
    # R(1,1) = 2 (1 - Phi(1/theta))
    theta = 2.5
    expected = 2 * (1 - float(mpmath.ncdf(1 / theta)))
    assert eval_r(TdfModel.of("hr", theta), 1, 1) == pytest.approx(expected, abs=1e-14)


def test_bilogistic_equal_parameters_match_logistic():
    r = eval_r(TdfModel.of("bilogistic", 0.6, 0.6), 1, 1)
    assert r == pytest.approx(2 - 2**0.6, abs=1e-10)


def _bilog_quadrature(x, y, a, b):
    """R from the integral form l = int_0^1 max(branch1, branch2) dw, in mpmath.

    The branches cross once at q. Each piece has an integrable endpoint
    singularity, smoothed by the power substitution w = q u^20 (and its mirror).
    """
    q = float(bilogistic_crossing(x, y, a, b))
    k = 20
    with mpmath.workdps(30):
        left = mpmath.quad(lambda u: (1 - a) * (q * u**k) ** (-a) * x * q * k * u ** (k - 1), [0, 1])
        right = mpmath.quad(
            lambda u: (1 - b) * ((1 - q) * u**k) ** (-b) * y * (1 - q) * k * u ** (k - 1), [0, 1]
        )
        return x + y - float(left + right)


@pytest.mark.parametrize("x, y", [(1.0, 1.0), (0.3, 1.7), (2.0, 0.1)])
@pytest.mark.parametrize("a, b", [(0.4, 0.7), (0.6, 0.6), (0.9, 0.2)])
def test_bilogistic_closed_form_matches_quadrature(x, y, a, b):
    assert eval_r(TdfModel.of("bilogistic", a, b), x, y) == pytest.approx(
        _bilog_quadrature(x, y, a, b), abs=1e-9
    )


def test_student_t_symmetric_value_against_incomplete_beta():
    nu, rho = 5.0, 0.6
    expected = 2 * mp_t_cdf(-math.sqrt((nu + 1) * (1 - rho) / (1 + rho)), nu + 1)
    assert eval_r(TdfModel.of("t", nu, rho), 1, 1) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("x, y", [(1.0, 0.5), (0.2, 2.0), (3.0, 3.0)])
def test_student_t_general_point_against_incomplete_beta(x, y):
    nu, rho = 5.0, 0.6
    c = math.sqrt((nu + 1) / (1 - rho * rho))
    expected = x * mp_t_cdf(c * (rho - (y / x) ** (-1 / nu)), nu + 1) + y * mp_t_cdf(
        c * (rho - (y / x) ** (1 / nu)), nu + 1
    )
    assert eval_r(TdfModel.of("t", nu, rho), x, y) == pytest.approx(expected, abs=1e-12)


def test_asym_logistic_collapses_to_logistic():
    x = np.linspace(0, 3, 31)
    y = np.linspace(0.1, 2, 31)[:, None]
    a = eval_r(TdfModel.of("alog", 0.45, 1.0, 1.0), x, y)
    b = eval_r(TdfModel.of("logistic", 0.45), x, y)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_asym_logistic_zero_psi_is_independent():
    assert eval_r(TdfModel.of("alog", 0.5, 0.0, 0.7), 1.0, 1.0) == 0.0


def test_scalar_in_scalar_out_and_broadcasting():
    m = TdfModel.of("logistic", 0.6)
    assert isinstance(eval_r(m, 1.0, 0.5), float)
    out = eval_r(m, np.ones((2, 3)), np.array([0.1, 0.2, 0.3]))
    assert out.shape == (2, 3)


def test_partial2_logistic_at_axis():
    assert eval_r_partial2(TdfModel.of("logistic", 0.6), 1.0, 0.0) == pytest.approx(1.0)
    assert eval_r_partial2(TdfModel.of("logistic", 1.0), 0.7, 0.4) == 0.0


def test_partial2_student_t_at_axis():
    nu, rho = 5.0, 0.6
    c = math.sqrt((nu + 1) / (1 - rho * rho))
    expected = mp_t_cdf(c * rho, nu + 1)
    assert eval_r_partial2(TdfModel.of("t", nu, rho), 1.0, 0.0) == pytest.approx(expected, abs=1e-12)


def _richardson_partial2(model, x, y, h=1e-3):
    """Fourth-order central difference refined by one Richardson step."""

    def d(step):
        return (
            -eval_r(model, x, y + 2 * step)
            + 8 * eval_r(model, x, y + step)
            - 8 * eval_r(model, x, y - step)
            + eval_r(model, x, y - 2 * step)
        ) / (12 * step)

    return (16 * d(h / 2) - d(h)) / 15


def test_partial2_bilogistic_matches_richardson_oracle():
    m = TdfModel.of("bilogistic", 0.4, 0.7)
    assert eval_r_partial2(m, 1.0, 0.5) == pytest.approx(_richardson_partial2(m, 1.0, 0.5), abs=1e-6)


@pytest.mark.parametrize("model", MODELS, ids=str)
@pytest.mark.parametrize("x, y", [(1.0, 0.3), (0.5, 1.5), (2.0, 2.0), (1.0, 0.02)])
def test_partial2_matches_finite_differences(model, x, y):
    assert eval_r_partial2(model, x, y) == pytest.approx(_richardson_partial2(model, x, y, 1e-3 * y), abs=1e-5)


def test_partial2_requires_positive_x():
    with pytest.raises(NumericError):
        eval_r_partial2(TdfModel.of("logistic", 0.6), 0.0, 0.5)


def test_curve_endpoints_and_monotone():
    curve = r_one_eta_curve(TdfModel.of("logistic", 0.6), [0.0, 1.0])
    assert curve[0] == (0.0, 0.0)
    assert curve[1][1] == pytest.approx(2 - 2**0.6)
    grid = np.linspace(0, 1, 101)
    vals = [v for _, v in r_one_eta_curve(TdfModel.of("hr", 2.5), grid)]
    assert np.all(np.diff(vals) >= 0)
    direct = eval_r(TdfModel.of("hr", 2.5), 1.0, grid)
    np.testing.assert_allclose(vals, direct, rtol=0, atol=0)


def test_mirror_swaps_arguments():
    for m in MODELS:
        np.testing.assert_allclose(eval_r(m, 0.3, 1.4), eval_r(mirror(m), 1.4, 0.3), atol=1e-12)


# --- property suites -------------------------------------------------------

coords = st.floats(min_value=0.0, max_value=10.0, allow_nan=False)
model_idx = st.integers(min_value=0, max_value=len(MODELS) - 1)


@settings(max_examples=300, deadline=None)
@given(model_idx, coords, coords)
def test_bounds(i, x, y):
    r = eval_r(MODELS[i], x, y)
    assert 0.0 <= r <= min(x, y)


@settings(max_examples=300, deadline=None)
@given(model_idx, coords, coords, st.sampled_from([0.5, 2.0, 7.0]))
def test_homogeneity(i, x, y, t):
    m = MODELS[i]
    assert abs(eval_r(m, t * x, t * y) - t * eval_r(m, x, y)) <= 1e-10 * t * max(1.0, x + y)


@settings(max_examples=100, deadline=None)
@given(model_idx, coords)
def test_monotone_in_each_argument(i, x):
    grid = np.linspace(0, 10, 201)
    m = MODELS[i]
    assert np.all(np.diff(eval_r(m, x, grid)) >= -1e-12)
    assert np.all(np.diff(eval_r(m, grid, x)) >= -1e-12)
