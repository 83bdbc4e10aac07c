import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from covar_evt.exceptions import DomainError
from covar_evt.univariate import (
    BootstrapConfig,
    bootstrap_k_selection,
    hill,
    hill_curve,
    select_k_bootstrap,
    var_sensitivity,
    weissman_quantile,
)


def test_hill_log_spacing_identity():
    ys = np.exp(np.arange(1, 11))
    # logs 10..6 minus log 5 -> mean of 5,4,3,2,1 = 3
    assert hill(ys, 5) == pytest.approx(3.0, abs=1e-14)


def test_hill_exact_pareto_grid():
    # on quantiles (i/n)^-gamma the Hill average is gamma * (log(k+1) - log(k!)/k)
    n, gamma, k = 100_000, 0.5, 1000
    ys = (np.arange(1, n + 1) / n) ** -gamma
    exact = gamma * (math.log(k + 1) - math.lgamma(k + 1) / k)
    assert hill(ys, k) == pytest.approx(exact, rel=1e-12)


def test_hill_bad_k():
    with pytest.raises(DomainError):
        hill([1.0, 2.0, 3.0], 3)
    with pytest.raises(DomainError):
        hill([-3.0, -2.0, -1.0, 5.0], 2)


def test_weissman_closed_form():
    ys = np.arange(1.0, 101.0)
    # Y_(n-k) for k=10 is the 11th largest = 90
    assert weissman_quantile(ys, 10, 0.5, 0.01) == pytest.approx(90 * math.sqrt(10), rel=1e-15)
    assert weissman_quantile(ys, 10, 0.0, 0.01) == 90.0


def test_weissman_exact_on_pareto_grid():
    n, gamma = 10_000, 0.4
    ys = (np.arange(1, n + 1) / n) ** -gamma
    p = 1e-4 * 3
    assert weissman_quantile(ys, 500, gamma, p) == pytest.approx(p**-gamma, rel=1e-3)


def test_weissman_validation():
    ys = np.arange(1.0, 50.0)
    for args in [(0, 0.5, 0.1), (10, -0.1, 0.1), (10, 0.5, 1.0)]:
        with pytest.raises(DomainError):
            weissman_quantile(ys, *args)


def test_curves_shapes():
    ys = np.random.default_rng(1).pareto(2.0, 2000) + 1
    hc = hill_curve(ys, range(10, 101, 10))
    assert [k for k, _ in hc] == list(range(10, 101, 10))
    vs = var_sensitivity(ys, 0.5, 0.01, [20, 40])
    assert vs[0] == (20, weissman_quantile(ys, 20, 0.5, 0.01))
    with pytest.raises(DomainError):
        var_sensitivity(ys, 0.5, 0.01, [0, 10])


def test_bootstrap_pareto_recovers_gamma():
    rng = np.random.default_rng(2024)
    ys = rng.pareto(2.0, 5000) + 1.0  # gamma = 0.5
    k = select_k_bootstrap(ys)
    assert 10 <= k <= 2500
    assert abs(hill(ys, k) - 0.5) < 0.15 * 0.5


def test_bootstrap_deterministic_and_seeded():
    ys = np.random.default_rng(3).standard_t(4, 2000)
    a = bootstrap_k_selection(ys, BootstrapConfig(seed=5))
    b = bootstrap_k_selection(ys, BootstrapConfig(seed=5))
    assert a == b
    assert not a.fallback


def test_bootstrap_needs_large_sample():
    with pytest.raises(DomainError):
        select_k_bootstrap(np.arange(1.0, 400.0))


def test_bootstrap_degenerate_falls_back():
    with pytest.warns(RuntimeWarning, match="fell back"):
        sel = bootstrap_k_selection(-np.ones(1000))
    assert sel.fallback and sel.k == 50


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(0.01, 1e6), min_size=20, max_size=200),
    st.integers(1, 15),
    st.floats(0.01, 1000.0),
    st.randoms(use_true_random=False),
)
def test_hill_scale_and_permutation_invariance(ys, k, c, rnd):
    ys = np.array(ys)
    assume_ok = np.sort(ys)[::-1][k] > 0
    assert assume_ok
    h = hill(ys, k)
    assert hill(c * ys, k) == pytest.approx(h, abs=1e-9)
    perm = list(ys)
    rnd.shuffle(perm)
    assert hill(perm, k) == h


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 2.0), st.floats(0.01, 1.0), st.floats(1e-4, 0.004))
def test_weissman_monotone(g, dg, p):
    ys = np.arange(1.0, 1001.0)
    k = 50  # k/(n p) > 1 for p < 0.05
    q = weissman_quantile(ys, k, g, p)
    assert weissman_quantile(ys, k, g + dg, p) > q
    assert weissman_quantile(ys, k, g, p * 1.5) < q


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.2, 1.0))
def test_bootstrap_range(seed, gamma):
    rng = np.random.default_rng(seed)
    ys = rng.pareto(1 / gamma, 600) + 1.0
    k = select_k_bootstrap(ys, BootstrapConfig(replicates=50, seed=seed))
    assert 10 <= k <= 300
