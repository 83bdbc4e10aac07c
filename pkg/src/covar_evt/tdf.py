"""Parametric upper tail dependence functions R(x, y; theta).

Five bivariate families are supported. For the four extreme-value families the
tail dependence function is ``R(x, y) = x + y - l(x, y)`` with ``l`` the stable
tail dependence function; the Student-t form comes from the elliptical
limit. All evaluators broadcast over numpy arrays.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special
from scipy.special import ndtr, stdtr

from .exceptions import DomainError, NumericError


class Family(str, enum.Enum):
    LOGISTIC = "logistic"
    HUSLER_REISS = "husler_reiss"
    BILOGISTIC = "bilogistic"
    ASYM_LOGISTIC = "asym_logistic"
    STUDENT_T = "student_t"

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        key = name.strip().lower().replace("-", "_")
        try:
            return _ALIASES[key]
        except KeyError:
            raise DomainError(f"unknown tail dependence family {name!r}") from None

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def param_names(self) -> tuple[str, ...]:
        return _PARAM_NAMES[self]


_ALIASES = {
    "logistic": Family.LOGISTIC, "log": Family.LOGISTIC,
    "husler_reiss": Family.HUSLER_REISS, "hr": Family.HUSLER_REISS,
    "bilogistic": Family.BILOGISTIC, "bilog": Family.BILOGISTIC,
    "asym_logistic": Family.ASYM_LOGISTIC, "alog": Family.ASYM_LOGISTIC,
    "asymmetric_logistic": Family.ASYM_LOGISTIC,
    "student_t": Family.STUDENT_T, "t": Family.STUDENT_T,
}
_ARITY = {
    Family.LOGISTIC: 1, Family.HUSLER_REISS: 1, Family.BILOGISTIC: 2,
    Family.ASYM_LOGISTIC: 3, Family.STUDENT_T: 2,
}
_PARAM_NAMES = {
    Family.LOGISTIC: ("theta",),
    Family.HUSLER_REISS: ("theta",),
    Family.BILOGISTIC: ("alpha", "beta"),
    Family.ASYM_LOGISTIC: ("theta", "psi1", "psi2"),
    Family.STUDENT_T: ("nu", "rho"),
}


def _check_params(family: Family, params: tuple[float, ...]) -> None:
    if len(params) != family.arity:
        raise DomainError(
            f"{family.value} takes {family.arity} parameter(s), got {len(params)}"
        )
    if not all(np.isfinite(params)):
        raise DomainError(f"non-finite parameters {params}")
    if family is Family.LOGISTIC:
        ok = 0.0 < params[0] <= 1.0
    elif family is Family.HUSLER_REISS:
        ok = params[0] > 0.0
    elif family is Family.BILOGISTIC:
        ok = all(0.0 < v < 1.0 for v in params)
    elif family is Family.ASYM_LOGISTIC:
        theta, psi1, psi2 = params
        ok = 0.0 < theta <= 1.0 and 0.0 <= psi1 <= 1.0 and 0.0 <= psi2 <= 1.0
    else:
        nu, rho = params
        # formula only established for positive correlation
        ok = nu > 0.0 and 0.0 < rho < 1.0
    if not ok:
        names = ", ".join(family.param_names)
        raise DomainError(f"{family.value} parameters ({names}) = {params} out of range")


@dataclass(frozen=True)
class TdfModel:
    """A tail dependence family together with its parameter vector."""

    family: Family
    params: tuple[float, ...]

    def __post_init__(self):
        family = Family.parse(self.family)
        params = tuple(float(v) for v in np.atleast_1d(self.params))
        _check_params(family, params)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)

    @classmethod
    def of(cls, family: "str | Family", *params: float) -> "TdfModel":
        return cls(Family.parse(family), tuple(params))

    def __call__(self, x, y):
        return eval_r(self, x, y)

    def as_dict(self) -> dict:
        return {"family": self.family.value,
                **dict(zip(self.family.param_names, self.params))}


def _scalar_or_array(out: np.ndarray):
    return float(out) if out.ndim == 0 else out


def _prepare(x, y) -> tuple[np.ndarray, np.ndarray]:
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(x < 0) or np.any(y < 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("tail dependence function needs finite nonnegative arguments")
    return x, y


def _logistic_r(a: np.ndarray, b: np.ndarray, theta: float) -> np.ndarray:
    """a + b - (a^(1/theta) + b^(1/theta))^theta, free of cancellation."""
    if theta == 1.0:
        return np.zeros(np.broadcast(a, b).shape)
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(hi > 0, lo / np.where(hi > 0, hi, 1.0), 0.0)
        out = lo - hi * np.expm1(theta * np.log1p(ratio ** (1.0 / theta)))
    return out


def _hr_r(x, y, theta):
    out = np.zeros(x.shape)
    pos = (x > 0) & (y > 0)
    xp, yp = x[pos], y[pos]
    lr = np.log(xp) - np.log(yp)
    a, b = 1.0 / theta, 0.5 * theta
    out[pos] = xp * ndtr(-(a + b * lr)) + yp * ndtr(-(a - b * lr))
    return out


def bilogistic_crossing(x, y, alpha: float, beta: float) -> np.ndarray:
    """Point q in [0, 1] where the two branches of the bilogistic integrand meet.

    Solves ``(1-alpha) q^-alpha x = (1-beta) (1-q)^-beta y``; q = 1 when y = 0
    and q = 0 when x = 0.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    q = np.where(y <= 0, 1.0, 0.0).astype(float)
    pos = (x > 0) & (y > 0)
    if np.any(pos):
        c = np.log1p(-alpha) + np.log(x[pos]) - np.log1p(-beta) - np.log(y[pos])
        q[pos] = special.expit(_bilog_logit_root(c, alpha, beta))
    return q


def _bilog_logit_root(c: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Root in u = logit(q) of ``c + alpha log1p(e^-u) - beta log1p(e^u)``.

    The function decreases with slope between -max(alpha, beta) and
    -min(alpha, beta), so Newton steps safeguarded by a shrinking bracket
    converge in a handful of iterations.
    """
    # |log1p(e^-|u|)| <= log 2 < 1 gives a guaranteed sign change at +-span
    span = (np.abs(c) + 1.0) / min(alpha, beta) + 1.0
    lo, hi = -span, span.copy()
    u = np.zeros_like(c)
    for _ in range(100):
        h = c + alpha * np.logaddexp(0.0, -u) - beta * np.logaddexp(0.0, u)
        t = special.expit(u)
        slope = -(alpha * (1 - t) + beta * t)
        lo = np.where(h > 0, u, lo)
        hi = np.where(h > 0, hi, u)
        nxt = u - h / slope
        nxt = np.where((nxt >= lo) & (nxt <= hi), nxt, 0.5 * (lo + hi))
        tol = 1e-14 * (1.0 + np.abs(u))
        # rounding in h can stall Newton once the bracket is this tight
        done = (np.abs(nxt - u) <= tol) | (hi - lo <= 10 * tol)
        u = nxt
        if np.all(done):
            return u
    raise NumericError("bilogistic crossing did not converge", achieved=float(np.max(hi - lo)))


def _bilog_r(x, y, alpha, beta):
    out = np.zeros(x.shape)
    pos = (x > 0) & (y > 0)
    if np.any(pos):
        xp, yp = x[pos], y[pos]
        q = bilogistic_crossing(xp, yp, alpha, beta)
        with np.errstate(divide="ignore"):
            out[pos] = (-xp * np.expm1((1 - alpha) * np.log(q))
                        - yp * np.expm1((1 - beta) * np.log1p(-q)))
    return out


def _t_scale(nu: float, rho: float) -> float:
    return np.sqrt((nu + 1.0) / (1.0 - rho * rho))


def _t_r(x, y, nu, rho):
    out = np.zeros(x.shape)
    pos = (x > 0) & (y > 0)
    xp, yp = x[pos], y[pos]
    c = _t_scale(nu, rho)
    lu = (np.log(yp) - np.log(xp)) / nu
    with np.errstate(over="ignore"):
        out[pos] = xp * stdtr(nu + 1, c * (rho - np.exp(-lu))) + yp * stdtr(nu + 1, c * (rho - np.exp(lu)))
    return out


def eval_r(model: TdfModel, x, y):
    """Evaluate R(x, y; theta). Scalars in, float out; arrays broadcast.

    The result is clipped into the admissible band ``[0, min(x, y)]`` to
    remove rounding residue.
    """
    x, y = _prepare(x, y)
    fam, par = model.family, model.params
    if fam is Family.LOGISTIC:
        out = _logistic_r(x, y, par[0])
    elif fam is Family.HUSLER_REISS:
        out = _hr_r(x, y, par[0])
    elif fam is Family.BILOGISTIC:
        out = _bilog_r(x, y, *par)
    elif fam is Family.ASYM_LOGISTIC:
        theta, psi1, psi2 = par
        out = _logistic_r(psi1 * x, psi2 * y, theta)
    else:
        out = _t_r(x, y, *par)
    out = np.clip(out, 0.0, np.minimum(x, y))
    return _scalar_or_array(out)


def _t_pdf(df: float, z: np.ndarray) -> np.ndarray:
    from scipy.special import gammaln

    logc = gammaln((df + 1) / 2) - gammaln(df / 2) - 0.5 * np.log(df * np.pi)
    return np.exp(logc - (df + 1) / 2 * np.log1p(z * z / df))


def _t_partial2(x, y, nu, rho):
    c = _t_scale(nu, rho)
    xf, yf = x.ravel(), y.ravel()
    u = (yf / xf) ** (1.0 / nu)
    z2 = c * (rho - u)
    out = stdtr(nu + 1, z2) - _t_pdf(nu + 1, z2) * c * u / nu
    pos = yf > 0
    z1 = c * (rho - 1.0 / u[pos])
    out[pos] += _t_pdf(nu + 1, z1) * c / nu * (yf[pos] / xf[pos]) ** (-1.0 / nu - 1.0)
    return out.reshape(x.shape)


def eval_r_partial2(model: TdfModel, x, y):
    """Partial derivative dR/dy for x > 0, y >= 0."""
    x, y = _prepare(x, y)
    if np.any(x <= 0):
        raise NumericError("R_2 is only continuous for x > 0")
    fam, par = model.family, model.params
    with np.errstate(divide="ignore", over="ignore"):
        if fam is Family.LOGISTIC:
            theta = par[0]
            if theta == 1.0:
                out = np.zeros(x.shape)
            else:
                ratio = np.where(y > 0, x / np.where(y > 0, y, 1.0), np.inf)
                out = -np.expm1((theta - 1.0) * np.log1p(ratio ** (1.0 / theta)))
        elif fam is Family.HUSLER_REISS:
            theta = par[0]
            lr = np.log(y / x)
            out = ndtr(-(1.0 / theta + 0.5 * theta * lr))
        elif fam is Family.BILOGISTIC:
            alpha, beta = par
            q = bilogistic_crossing(x, y, alpha, beta)
            out = -np.expm1((1 - beta) * np.log1p(-q))
        elif fam is Family.ASYM_LOGISTIC:
            theta, psi1, psi2 = par
            if theta == 1.0 or psi2 == 0.0 or psi1 == 0.0:
                out = np.zeros(x.shape)
            else:
                b = psi2 * y
                ratio = np.where(b > 0, psi1 * x / np.where(b > 0, b, 1.0), np.inf)
                out = -psi2 * np.expm1((theta - 1.0) * np.log1p(ratio ** (1.0 / theta)))
        else:
            out = _t_partial2(x, y, *par)
    return _scalar_or_array(np.asarray(out, dtype=float))


def r_one_eta_curve(model: TdfModel, grid: Sequence[float]) -> list[tuple[float, float]]:
    """Pairs (eta, R(1, eta)) over an ascending grid in [0, 1]."""
    g = np.asarray(grid, dtype=float)
    if g.ndim != 1 or np.any(g < 0) or np.any(g > 1) or np.any(np.diff(g) < 0):
        raise DomainError("grid must be an ascending sequence in [0, 1]")
    vals = np.atleast_1d(eval_r(model, 1.0, g))
    return list(zip(g.tolist(), vals.tolist()))


def stable_tail(model: TdfModel, x, y):
    """l(x, y) = x + y - R(x, y) for the extreme-value families."""
    if model.family is Family.STUDENT_T:
        raise DomainError("stable tail function only defined for extreme-value families")
    x, y = _prepare(x, y)
    return x + y - np.asarray(eval_r(model, x, y))


def stable_tail_partial1(model: TdfModel, x, y) -> np.ndarray:
    """dl/dx, the conditional-CDF ingredient for extreme-value sampling."""
    # l_1(x, y) = 1 - R_1(x, y) = 1 - R_2(y, x) for the mirrored model
    mirrored = mirror(model)
    return 1.0 - np.asarray(eval_r_partial2(mirrored, y, x))


def mirror(model: TdfModel) -> TdfModel:
    """Model with the roles of the two components swapped."""
    fam, par = model.family, model.params
    if fam is Family.BILOGISTIC:
        return TdfModel(fam, (par[1], par[0]))
    if fam is Family.ASYM_LOGISTIC:
        return TdfModel(fam, (par[0], par[2], par[1]))
    return model
