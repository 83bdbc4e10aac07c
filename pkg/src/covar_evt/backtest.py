"""Backtests for VaR/CoVaR forecasts: coverage tests, quantile scores and
comparative traffic-light tests."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special, stats

from .exceptions import DomainError


def quantile_score(r, x, p2: float):
    """``(p2 - 1{x > r}) r + 1{x > r} x``; ties count as no exceedance."""
    r = np.asarray(r, dtype=float)
    x = np.asarray(x, dtype=float)
    hit = (x > r).astype(float)
    out = (p2 - hit) * r + hit * x
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CoverageResult:
    observed: int
    expected: float
    p_value: float
    statistic: float
    trials: int


def _binomial_lr(k: int, n: int, p: float) -> CoverageResult:
    if not 0 < p < 1:
        raise DomainError(f"probability must lie in (0, 1), got {p}")
    if not (0 <= k <= n) or n < 1:
        raise DomainError(f"need 0 <= count <= trials and trials >= 1, got {k}, {n}")
    q = k / n
    ll_null = special.xlogy(k, p) + special.xlog1py(n - k, -p)
    ll_alt = special.xlogy(k, q) + special.xlog1py(n - k, -q)
    stat = max(0.0, -2.0 * (ll_null - ll_alt))
    return CoverageResult(int(k), n * p, float(stats.chi2.sf(stat, 1)), float(stat), int(n))


def uc_test_var(exceed_count: int, n: int, p1: float) -> CoverageResult:
    """Unconditional coverage likelihood-ratio test of VaR exceedances."""
    return _binomial_lr(exceed_count, n, p1)


def uc_test_covar(joint_exceed: int, var_exceed: int, p2: float) -> CoverageResult:
    """Coverage test of CoVaR exceedances among the VaR-violation days."""
    if var_exceed == 0:
        raise DomainError("no VaR violations: the CoVaR coverage test is undefined")
    if joint_exceed > var_exceed:
        raise DomainError("joint exceedances cannot outnumber VaR violations")
    return _binomial_lr(joint_exceed, var_exceed, p2)


@dataclass
class ScoreSeries:
    scores: np.ndarray
    days: np.ndarray | None = None
    method: str = ""

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float).ravel()
        if not np.all(np.isfinite(self.scores)):
            raise DomainError("scores must be finite")
        if self.days is not None:
            self.days = np.asarray(self.days).ravel()
            if self.days.shape != self.scores.shape:
                raise DomainError("days and scores differ in length")


def _align(a: ScoreSeries, b: ScoreSeries) -> tuple[np.ndarray, np.ndarray]:
    if a.days is None or b.days is None:
        if a.scores.size != b.scores.size:
            raise DomainError("score series differ in length and carry no day index")
        return a.scores, b.scores
    common, ia, ib = np.intersect1d(a.days, b.days, return_indices=True)
    return a.scores[ia], b.scores[ib]


def hac_variance(d: np.ndarray, lag: int | None = None) -> float:
    """Newey-West long-run variance with Bartlett weights."""
    d = np.asarray(d, dtype=float)
    T = d.size
    lag = int(T ** (1 / 3)) if lag is None else lag
    e = d - d.mean()
    v = float(e @ e) / T
    for j in range(1, min(lag, T - 1) + 1):
        v += 2.0 * (1 - j / (lag + 1)) * float(e[j:] @ e[:-j]) / T
    return v


@dataclass(frozen=True)
class ComparisonResult:
    classification: str
    statistic: float
    mean_difference: float
    days: int


def compare_scores(scores_a: ScoreSeries, scores_b: ScoreSeries, level: float = 0.10) -> ComparisonResult:
    """Two one-sided studentized tests on mean(score_a - score_b).

    ``worse`` means method a has significantly higher (worse) scores than b.
    """
    sa, sb = _align(scores_a, scores_b)
    d = sa - sb
    T = d.size
    if T < 30:
        warnings.warn(f"only {T} aligned days; comparison reported inconclusive", RuntimeWarning, stacklevel=2)
        return ComparisonResult("inconclusive", float("nan"), float(d.mean()) if T else float("nan"), T)
    mean = float(d.mean())
    var = hac_variance(d)
    crit = stats.norm.isf(level)
    if var <= 1e-14 * max(1.0, mean * mean):
        # zero variance: the ordering is deterministic
        cls = "worse" if mean > 0 else "better" if mean < 0 else "inconclusive"
        stat = math.copysign(math.inf, mean) if mean else 0.0
        return ComparisonResult(cls, stat, mean, T)
    stat = mean / math.sqrt(var / T)
    cls = "worse" if stat > crit else "better" if stat < -crit else "inconclusive"
    return ComparisonResult(cls, float(stat), mean, T)


def comparative_backtest(scores_a: ScoreSeries, scores_b: ScoreSeries, level: float = 0.10) -> str:
    return compare_scores(scores_a, scores_b, level).classification


TRAFFIC_LIGHT = {"worse": "green", "better": "red", "inconclusive": "yellow"}


def traffic_light(classification: str) -> str:
    """Colour for the reference method: green when it is significantly worse
    than the competitor, red when significantly better."""
    return TRAFFIC_LIGHT[classification]


def pool_normalized_scores(pairs) -> tuple[ScoreSeries, ScoreSeries]:
    """Concatenate (reference, competitor) score pairs over institutions after
    dividing each institution's scores by its reference mean score."""
    pairs = list(pairs)
    if not pairs:
        raise DomainError("need at least one institution to pool")
    pooled_a, pooled_b = [], []
    for a, b in pairs:
        sa, sb = _align(a, b)
        scale = float(np.mean(sa))
        if not abs(scale) > 0:
            raise DomainError("reference mean score is zero; cannot normalize")
        pooled_a.append(sa / scale)
        pooled_b.append(sb / scale)
    return (ScoreSeries(np.concatenate(pooled_a), method=pairs[0][0].method),
            ScoreSeries(np.concatenate(pooled_b), method=pairs[0][1].method))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class MethodForecasts:
    """Aligned daily forecasts and realized losses for one method."""

    var_i: np.ndarray
    covar: np.ndarray
    x_i: np.ndarray
    x_s: np.ndarray
    valid: np.ndarray | None = None
    days: np.ndarray | None = None

    def __post_init__(self):
        for name in ("var_i", "covar", "x_i", "x_s"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.var_i.size
        if any(getattr(self, k).size != n for k in ("covar", "x_i", "x_s")):
            raise DomainError("forecast columns differ in length")
        self.valid = (np.ones(n, bool) if self.valid is None else np.asarray(self.valid, bool)) & np.isfinite(
            self.var_i) & np.isfinite(self.covar)
        self.days = np.arange(n) if self.days is None else np.asarray(self.days)


def covar_scores(f: MethodForecasts, p2: float, method: str = "") -> ScoreSeries:
    """Daily CoVaR score on every valid day: the quantile score on VaR-violation
    days and zero otherwise, which keeps methods aligned day by day."""
    v = f.valid
    viol = f.x_i[v] > f.var_i[v]
    s = np.where(viol, quantile_score(f.covar[v], f.x_s[v], p2), 0.0)
    return ScoreSeries(s, f.days[v], method)


@dataclass
class InstitutionReport:
    n: int
    var_coverage: CoverageResult
    covar_coverage: CoverageResult | None
    average_score: float
    violation_days: int
    extras: dict = field(default_factory=dict)


def evaluate_method(f: MethodForecasts, p1: float, p2: float) -> InstitutionReport:
    v = f.valid
    n = int(v.sum())
    viol = f.x_i[v] > f.var_i[v]
    e_n = int(viol.sum())
    joint = int(np.sum(viol & (f.x_s[v] > f.covar[v])))
    var_cov = uc_test_var(e_n, n, p1)
    covar_cov = uc_test_covar(joint, e_n, p2) if e_n else None
    scores = quantile_score(f.covar[v][viol], f.x_s[v][viol], p2)
    avg = float(np.mean(scores)) if e_n else float("nan")
    return InstitutionReport(n, var_cov, covar_cov, avg, e_n)


def backtest_report(forecasts: dict, p1: float, p2: float, level: float = 0.10) -> dict:
    """JSON-ready report from ``{institution: {method: MethodForecasts}}``.

    Contains coverage tests and average scores per cell, a traffic-light
    matrix per institution and one pooled over institutions.
    """
    report = {"levels": {"p1": p1, "p2": p2}, "test_level": level, "institutions": {}}
    methods = sorted({m for per in forecasts.values() for m in per})
    pooled_pairs = {(a, b): [] for a in methods for b in methods if a != b}
    for inst, per in forecasts.items():
        cells = {}
        series = {}
        for meth, f in per.items():
            rep = evaluate_method(f, p1, p2)
            cells[meth] = {
                "evaluated_days": rep.n,
                "E_n": rep.var_coverage.observed,
                "e_n": rep.var_coverage.expected,
                "var_p_value": rep.var_coverage.p_value,
                "E_n_b": rep.covar_coverage.observed if rep.covar_coverage else 0,
                "e_n_b": rep.covar_coverage.expected if rep.covar_coverage else 0.0,
                "covar_p_value": rep.covar_coverage.p_value if rep.covar_coverage else None,
                "average_score": rep.average_score,
            }
            series[meth] = covar_scores(f, p2, meth)
        matrix = {}
        for a in series:
            matrix[a] = {}
            for b in series:
                if a == b:
                    continue
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    matrix[a][b] = comparative_backtest(series[a], series[b], level)
                pooled_pairs[(a, b)].append((series[a], series[b]))
        report["institutions"][inst] = {"methods": cells, "traffic_light": matrix}
    pooled = {a: {} for a in methods}
    for (a, b), pairs in pooled_pairs.items():
        if not pairs:
            continue
        try:
            pa, pb = pool_normalized_scores(pairs)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                pooled[a][b] = comparative_backtest(pa, pb, level)
        except DomainError as exc:
            pooled[a][b] = f"error: {exc}"
    report["pooled_traffic_light"] = pooled
    return report


def coverage_as_dict(c: CoverageResult) -> dict:
    return asdict(c)
