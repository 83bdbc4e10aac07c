import numpy as np
import pytest
from scipy import stats

from covar_evt import simulation
from covar_evt.empirical import tdc_hat
from covar_evt.exceptions import DomainError, NoSolutionError
from covar_evt.generative import GenerativeModel, sample, sample_bivariate_evd
from covar_evt.simulation import McStudyConfig, compute_truth, mc_study
from covar_evt.tdf import eval_r
from covar_evt.univariate import BootstrapConfig

EVD = [
    ("logistic", (0.6,)),
    ("hr", (2.5,)),
    ("bilogistic", (0.4, 0.7)),
    ("alog", (0.6, 0.5, 0.8)),
]


def _frechet_cdf(v):
    return np.exp(-1.0 / np.maximum(v, 1e-300))


@pytest.mark.parametrize("fam, pars", EVD, ids=[f for f, _ in EVD])
def test_margins_are_unit_frechet(fam, pars):
    d = GenerativeModel.of(fam, *pars)
    crit = 1.628 / np.sqrt(10_000)  # asymptotic 1% critical value
    ok = 0
    for seed in range(20):
        s = sample(d, 10_000, seed)
        ok += stats.kstest(s.xs, _frechet_cdf).statistic < crit
        ok += stats.kstest(s.ys, _frechet_cdf).statistic < crit
    assert ok >= 38  # 95% of 40 margin checks


def test_t_margins():
    s = sample(GenerativeModel.of("t", 5.0, 0.6), 10_000, 4)
    assert stats.kstest(s.xs, stats.t(5).cdf).pvalue > 0.01
    assert stats.kstest(s.ys, stats.t(5).cdf).pvalue > 0.01
    assert stats.pearsonr(s.xs, s.ys)[0] == pytest.approx(0.6, abs=0.03)


def test_independence_limit():
    s = sample(GenerativeModel.of("logistic", 1.0), 20_000, 8)
    assert abs(stats.spearmanr(s.xs, s.ys)[0]) < 0.03


@pytest.mark.parametrize("fam, pars", EVD, ids=[f for f, _ in EVD])
def test_joint_exceedance_frequency(fam, pars):
    d = GenerativeModel.of(fam, *pars)
    s = sample(d, 50_000, 21)
    a, b = d.var(0.1), d.var(0.2)
    p = d.joint_survival(a, b)
    freq = np.mean((s.xs > a) & (s.ys > b))
    assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / 50_000)


@pytest.mark.parametrize("fam, pars", EVD, ids=[f for f, _ in EVD])
def test_tdc_consistency(fam, pars):
    d = GenerativeModel.of(fam, *pars)
    s = sample(d, 100_000, 5)
    assert abs(tdc_hat(s, 1000) - eval_r(d.tdf, 1.0, 1.0)) < 0.05


def test_sampler_is_seeded():
    d = GenerativeModel.of("hr", 2.5)
    a, b = sample(d, 300, 9), sample(d, 300, 9)
    assert np.array_equal(a.xs, b.xs) and np.array_equal(a.ys, b.ys)
    with pytest.raises(DomainError):
        sample_bivariate_evd(GenerativeModel.of("t", 4.0, 0.2), 10)


def test_truth_logistic():
    t = compute_truth(GenerativeModel.of("logistic", 0.6), 0.05)
    assert t.covar == pytest.approx(367.3063, rel=1e-6)
    assert t.gamma == 1.0
    # the finite-level eta is close to, but not equal to, its limit
    assert t.eta == pytest.approx(t.eta_star, rel=0.1) and t.eta != t.eta_star


def _small(**kw):
    return McStudyConfig.default(
        "logistic", n=600, reps=3, bootstrap=BootstrapConfig(replicates=50), master_seed=11, **kw
    )


def test_mc_study_deterministic():
    a, b = mc_study(_small()), mc_study(_small())
    assert a.summary() == b.summary()
    assert a.summary_csv() == b.summary_csv()
    assert a.failure_count == 0
    assert set(a.summary()) == set(simulation.VARIANTS)


def test_mc_study_parallel_matches_serial():
    assert mc_study(_small(workers=2)).summary() == mc_study(_small()).summary()


def test_mc_study_outputs():
    res = mc_study(_small(variants=("full", "true_gamma")))
    lines = res.summary_csv().splitlines()
    assert lines[0] == "variant,statistic,logistic"
    assert lines[-1] == "all,failures,0"
    dens = res.density_csv().splitlines()
    assert dens[0] == "replication,quantity,value"
    assert len(dens) == 1 + 3 * 5


def test_mc_study_counts_failures(monkeypatch):
    real = simulation.run_replication

    def flaky(config, truth, rep, seed):
        if rep == 1:
            raise NoSolutionError("planted")
        return real(config, truth, rep, seed)

    monkeypatch.setattr(simulation, "run_replication", flaky)
    res = mc_study(_small(variants=("full",)))
    assert res.failure_count == 1 and "planted" in res.failures[0][1]
    assert res.summary()["full"]["count"] == 2


def test_config_validation():
    with pytest.raises(ValueError):
        _small(variants=("true_gamma",))
    with pytest.raises(ValueError):
        McStudyConfig.default("hr", p=1.5)
