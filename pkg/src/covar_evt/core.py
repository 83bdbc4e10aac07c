"""Adjustment-factor solve, the composed CoVaR estimator, and exact oracles.

CoVaR at levels (p1, p2) is the (1 - p2)-quantile of Y given X exceeds its
p1-exceedance VaR. The estimator extrapolates the system's VaR at p2 by the
adjustment factor: ``VaR_Y(p2) * eta^-gamma`` where eta solves
``R(1, eta * p2 / p1) = p2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._numerics import bisect
from .empirical import LossPairSample
from .exceptions import BracketExceededError, DomainError, NoSolutionError
from .generative import GenerativeModel
from .mestimator import DEFAULT_M, MEstimatorFit, TestFunctionSet, default_g, fit_tdf
from .tdf import Family, TdfModel, eval_r
from .univariate import BootstrapConfig, bootstrap_k_selection, hill, weissman_quantile


@dataclass(frozen=True)
class RiskLevel:
    """Exceedance probabilities: p1 for the conditioning event, p2 for CoVaR."""

    p1: float
    p2: float

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{name} must lie in (0, 1), got {v}")

    @classmethod
    def single(cls, p: float) -> "RiskLevel":
        return cls(p, p)


def solve_eta_star(model: TdfModel, levels: RiskLevel, tol: float = 1e-12) -> float:
    """Approximate adjustment factor: the root of R(1, eta * p2 / p1) = p2."""
    p1, p2 = levels.p1, levels.p2
    ratio = p2 / p1
    upper = min(1.0, p1 / p2) * (1.0 + 1e-9)

    def f(eta):
        return eval_r(model, 1.0, eta * ratio) - p2

    if f(upper) < 0.0:
        if eval_r(model, 1.0, 1.0) <= p2:
            raise NoSolutionError(
                f"R(1,1) = {eval_r(model, 1.0, 1.0):.6g} <= p2 = {p2}: dependence is "
                "too close to tail independence for the adjustment factor to exist"
            )
        raise BracketExceededError(
            f"R(1, eta p2/p1) = p2 has no root with eta <= {min(1.0, p1 / p2)}"
        )
    eta = bisect(f, 0.0, upper, xtol=tol)
    if eta * ratio > 1.0:
        raise BracketExceededError(f"solved tail-function argument {eta * ratio} exceeds 1")
    return eta


@dataclass
class CovarConfig:
    """Estimator settings; ``None`` k's are picked by the bootstrap and
    ``k2`` defaults to ``k1``. ``gamma``, ``eta_star`` and ``theta`` freeze the
    corresponding ingredient instead of estimating it."""

    m: int | None = None
    k1: int | None = None
    k2: int | None = None
    g: TestFunctionSet | str | None = None
    init: tuple[float, ...] | None = None
    bootstrap: BootstrapConfig = field(default_factory=BootstrapConfig)
    restarts: int = 5
    fit_seed: int = 0
    gamma: float | None = None
    eta_star: float | None = None
    theta: tuple[float, ...] | None = None


@dataclass
class CovarEstimate:
    value: float
    eta_star_hat: float
    gamma_hat: float
    var_component: float
    k1: int
    k2: int
    m: int
    tdf_fit: MEstimatorFit | None
    p1: float = 0.05
    p2: float = 0.05
    family: str = ""
    theta_hat: tuple[float, ...] = ()

    def as_record(self) -> dict:
        rec = {k: v for k, v in asdict(self).items() if k != "tdf_fit"}
        rec["theta_hat"] = list(self.theta_hat)
        if self.tdf_fit is not None:
            rec["tdf_objective"] = self.tdf_fit.objective_value
            rec["tdf_iterations"] = self.tdf_fit.iterations
            rec["tdf_at_boundary"] = self.tdf_fit.at_boundary
        return rec

    def to_json(self, **kw) -> str:
        return json.dumps(self.as_record(), **kw)


def compose_covar(var_component: float, eta_star: float, gamma: float) -> float:
    return var_component * eta_star ** (-gamma)


def estimate_covar(
    sample: LossPairSample,
    family: "str | Family",
    levels: RiskLevel,
    config: CovarConfig | None = None,
) -> CovarEstimate:
    """CoVaR of Y given X: M-fit, eta solve, Hill, Weissman at p2, compose."""
    config = config or CovarConfig()
    family = Family.parse(family)
    n = sample.n
    m = config.m if config.m is not None else min(DEFAULT_M[family], n)

    fit = None
    if config.eta_star is not None:
        eta = float(config.eta_star)
        if not 0.0 < eta <= 1.0:
            raise DomainError(f"frozen eta_star must lie in (0, 1], got {eta}")
        theta = tuple(config.theta or ())
    else:
        if config.theta is not None:
            theta = tuple(config.theta)
        else:
            g = default_g(family) if config.g is None else TestFunctionSet.parse(config.g)
            fit = fit_tdf(sample, m, family, g, init=config.init,
                          restarts=config.restarts, seed=config.fit_seed)
            theta = fit.theta_hat
        eta = solve_eta_star(TdfModel(family, theta), levels)

    k1 = config.k1
    if k1 is None:
        k1 = bootstrap_k_selection(sample.ys, config.bootstrap).k
    k2 = config.k2 if config.k2 is not None else k1
    for name, k in (("k1", k1), ("k2", k2)):
        if not 1 <= k < n:
            raise DomainError(f"{name} = {k} must lie in [1, n - 1] with n = {n}")
    gamma = float(config.gamma) if config.gamma is not None else hill(sample.ys, k1)
    var_y = weissman_quantile(sample.ys, k2, gamma, levels.p2)
    return CovarEstimate(
        value=compose_covar(var_y, eta, gamma),
        eta_star_hat=eta,
        gamma_hat=gamma,
        var_component=var_y,
        k1=int(k1),
        k2=int(k2),
        m=int(m),
        tdf_fit=fit,
        p1=levels.p1,
        p2=levels.p2,
        family=family.value,
        theta_hat=tuple(theta),
    )


# ---------------------------------------------------------------------------
# oracles for known distributions
# ---------------------------------------------------------------------------


def true_covar_oracle(dist: GenerativeModel, p: float, p2: float | None = None,
                      rtol: float = 1e-10) -> float:
    """Exact CoVaR: solves P(X > VaR_X(p), Y > y) = p * p2 (p2 defaults to p)."""
    p2 = p if p2 is None else p2
    a = dist.var(p)
    target = p * p2

    def h(y):
        return dist.joint_survival(a, y) - target

    if dist.margins.value == "unit_frechet":
        # search in log-scale; Frechet support is (0, inf)
        lo, hi = math.log(dist.var(min(0.5, p2))) - 1.0, math.log(dist.var(p * p2))
        while h(math.exp(lo)) < 0:
            lo -= 2.0
        while h(math.exp(hi)) > 0:
            hi += 2.0
        return math.exp(bisect(lambda u: h(math.exp(u)), lo, hi, xtol=0.0, rtol=rtol * 0.1))
    lo, hi = dist.var(min(0.5, p2)) - 1.0, dist.var(p * p2)
    while h(lo) < 0:
        lo -= 2.0 * (abs(lo) + 1.0)
    while h(hi) > 0:
        hi += 2.0 * (abs(hi) + 1.0)
    return bisect(h, lo, hi, xtol=0.0, rtol=rtol)


def exact_eta_p(dist: GenerativeModel, p: float, p2: float | None = None) -> float:
    """Exact adjustment factor P(Y > CoVaR) / p2."""
    p2 = p if p2 is None else p2
    covar = true_covar_oracle(dist, p, p2)
    return float(dist.margin_sf(covar)) / p2


def approximate_covar(dist: GenerativeModel, p: float) -> float:
    """First-order approximation VaR_Y(p * eta*) with the true parameters."""
    eta = solve_eta_star(dist.tdf, RiskLevel.single(p))
    return dist.var(p * eta)
