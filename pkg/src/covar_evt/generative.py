"""Generative bivariate models with known margins and joint tails.

The four extreme-value families carry unit Frechet margins,
``G(x, y) = exp(-l(1/x, 1/y))`` with ``l = x + y - R``; the Student-t model is
the standard bivariate t. Samplers are exact: the extreme-value pairs are drawn
by inverting the conditional distribution of Y given X.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats
from scipy.special import stdtr

from ._numerics import bisect_decreasing
from .empirical import LossPairSample
from .exceptions import DomainError, NumericError
from .tdf import Family, TdfModel, bilogistic_crossing, eval_r, eval_r_partial2, mirror


class Margins(str, enum.Enum):
    UNIT_FRECHET = "unit_frechet"
    STUDENT_T = "student_t"


@dataclass(frozen=True)
class GenerativeModel:
    """A bivariate distribution (X, Y) whose tail dependence function is ``tdf``."""

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        family = Family.parse(self.family)
        params = tuple(float(v) for v in self.params)
        if family is Family.STUDENT_T:
            nu, rho = params
            if not (nu > 0 and -1 < rho < 1):
                raise DomainError(f"bivariate t needs nu > 0, |rho| < 1, got {params}")
        else:
            TdfModel(family, params)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)

    @classmethod
    def of(cls, family: "str | Family", *params: float) -> "GenerativeModel":
        return cls(Family.parse(family), tuple(params))

    @property
    def margins(self) -> Margins:
        return Margins.STUDENT_T if self.family is Family.STUDENT_T else Margins.UNIT_FRECHET

    @property
    def tdf(self) -> TdfModel:
        return TdfModel(self.family, self.params)

    @property
    def true_gamma(self) -> float:
        """Tail index of the Y margin."""
        return 1.0 / self.params[0] if self.family is Family.STUDENT_T else 1.0

    # marginal distribution (identical for X and Y) -------------------------

    def margin_sf(self, v):
        v = np.asarray(v, dtype=float)
        if self.margins is Margins.STUDENT_T:
            return stdtr(self.params[0], -v)
        with np.errstate(divide="ignore"):
            return np.where(v > 0, -np.expm1(-1.0 / np.where(v > 0, v, 1.0)), 1.0)

    def margin_cdf(self, v):
        return 1.0 - self.margin_sf(v)

    def var(self, p: float) -> float:
        """Marginal (1-p)-quantile."""
        if not 0 < p < 1:
            raise DomainError(f"p must lie in (0, 1), got {p}")
        if self.margins is Margins.STUDENT_T:
            return float(stats.t.isf(p, self.params[0]))
        return float(-1.0 / np.log1p(-p))

    # joint tail ------------------------------------------------------------

    def joint_survival(self, a: float, b: float) -> float:
        """P(X > a, Y > b)."""
        if self.margins is Margins.STUDENT_T:
            return _t_joint_survival(a, b, *self.params)
        if a <= 0 or b <= 0:
            return float(self.margin_sf(max(a, b))) if min(a, b) <= 0 else 0.0
        s, t = 1.0 / a, 1.0 / b
        # 1 - F(a) - F(b) + G(a, b) rearranged to avoid cancellation
        r = eval_r(self.tdf, s, t)
        return float(-np.expm1(-s) + np.exp(-t) * np.expm1(r - s))


def _t_joint_survival(a: float, b: float, nu: float, rho: float) -> float:
    """P(X > a, Y > b) for the standard bivariate t by one-dimensional quadrature.

    Given X = x, Y is ``rho x + sqrt((1 - rho^2)(nu + x^2)/(nu + 1)) T`` with
    ``T ~ t_{nu+1}``.
    """

    def integrand(x):
        scale = np.sqrt((1 - rho * rho) * (nu + x * x) / (nu + 1))
        return stats.t.pdf(x, nu) * stdtr(nu + 1, -(b - rho * x) / scale)

    val, err = integrate.quad(integrand, a, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    if err > 1e-10:
        raise NumericError("bivariate t survival quadrature inaccurate", achieved=err)
    return val


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _log_conditional_cdf(model: TdfModel, s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """log P(Y <= 1/t | X = 1/s) for unit Frechet extreme-value pairs.

    Equals ``log l_1(s, t) + s - l(s, t)``; decreasing in t.
    """
    if model.family is Family.BILOGISTIC:
        alpha, beta = model.params
        q = bilogistic_crossing(s, t, alpha, beta)
        with np.errstate(divide="ignore"):
            lq = np.log(q)
            ell = s * np.exp((1 - alpha) * lq) + t * np.exp((1 - beta) * np.log1p(-q))
            return (1 - alpha) * lq + s - ell
    r = np.asarray(eval_r(model, s, t))
    l1 = 1.0 - np.asarray(eval_r_partial2(mirror(model), t, s))
    with np.errstate(divide="ignore"):
        return np.log(l1) + r - t


def sample_bivariate_evd(model: GenerativeModel, n: int, seed=None) -> LossPairSample:
    """n i.i.d. pairs from an extreme-value family with unit Frechet margins."""
    if model.margins is not Margins.UNIT_FRECHET:
        raise DomainError("sample_bivariate_evd needs an extreme-value family")
    rng = _rng(seed)
    u = rng.random(n)
    v = rng.random(n)
    s = -np.log(u)  # 1 / X
    logv = np.log(v)
    tdf = model.tdf
    lo = np.full(n, -200.0)
    hi = np.full(n, 200.0)
    f_lo = _log_conditional_cdf(tdf, s, np.exp(lo)) - logv
    f_hi = _log_conditional_cdf(tdf, s, np.exp(hi)) - logv
    if np.any(f_lo < 0) or np.any(f_hi > 0):
        raise NumericError("conditional inversion bracket does not contain the root")

    def f(logt):
        return _log_conditional_cdf(tdf, s, np.exp(logt)) - logv

    logt = bisect_decreasing(f, lo, hi, iterations=80)
    return LossPairSample(1.0 / s, np.exp(-logt))


def sample_bivariate_t(nu: float, rho: float, n: int, seed=None) -> LossPairSample:
    """n i.i.d. pairs from the standard bivariate t."""
    if not (nu > 0 and -1 < rho < 1):
        raise DomainError(f"bivariate t needs nu > 0, |rho| < 1, got {(nu, rho)}")
    rng = _rng(seed)
    z = rng.standard_normal((n, 2))
    z[:, 1] = rho * z[:, 0] + np.sqrt(1 - rho * rho) * z[:, 1]
    w = np.sqrt(nu / rng.chisquare(nu, size=n))
    return LossPairSample(z[:, 0] * w, z[:, 1] * w)


def sample(model: GenerativeModel, n: int, seed=None) -> LossPairSample:
    if model.margins is Margins.STUDENT_T:
        return sample_bivariate_t(*model.params, n, seed)
    return sample_bivariate_evd(model, n, seed)
