"""Tail index and extreme quantile estimation for a heavy-tailed margin."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError


@dataclass(frozen=True)
class TailFit:
    gamma_hat: float
    k1: int
    k2: int
    n: int


def _desc(ys) -> np.ndarray:
    ys = np.asarray(ys, dtype=float).ravel()
    if not np.all(np.isfinite(ys)):
        raise DomainError("non-finite values in sample")
    return np.sort(ys)[::-1]


def hill(ys, k1: int) -> float:
    """Hill estimator from the top ``k1`` order statistics."""
    y = _desc(ys)
    n = y.size
    if not (1 <= k1 < n) or int(k1) != k1:
        raise DomainError(f"k1 must be an integer in [1, {n - 1}], got {k1}")
    threshold = y[k1]
    if threshold <= 0:
        raise DomainError(f"order statistic Y(n-{k1}) = {threshold} is not positive")
    return float(np.mean(np.log(y[:k1])) - math.log(threshold))


def weissman_quantile(ys, k2: int, gamma: float, p: float) -> float:
    """Extreme quantile at exceedance probability p: Y(n-k2) * (k2 / (n p))^gamma."""
    y = _desc(ys)
    n = y.size
    if not (1 <= k2 < n) or int(k2) != k2:
        raise DomainError(f"k2 must be an integer in [1, {n - 1}], got {k2}")
    if not 0 < p < 1:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    if gamma < 0:
        raise DomainError(f"gamma must be nonnegative, got {gamma}")
    return float(y[k2] * (k2 / (n * p)) ** gamma)


def hill_curve(ys, k_range) -> list[tuple[int, float]]:
    """(k, gamma_hat(k)) pairs for a Hill plot."""
    return [(int(k), hill(ys, int(k))) for k in k_range]


def var_sensitivity(ys, gamma: float, p: float, k_range) -> list[tuple[int, float]]:
    """(k2, VaR estimate) pairs for choosing k2 from a stable region."""
    n = np.size(ys)
    ks = [int(k) for k in k_range]
    if not ks or min(ks) < 1 or max(ks) > n - 1:
        raise DomainError(f"k range must lie within [1, {n - 1}]")
    return [(k, weissman_quantile(ys, k, gamma, p)) for k in ks]


# ---------------------------------------------------------------------------
# double-bootstrap choice of the sample fraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BootstrapConfig:
    """Tuning for the two-subsample bootstrap; ``n1 = ceil(n^exponent)``."""

    exponent: float = 0.955
    replicates: int = 500
    seed: int | None = 0
    min_n: int = 500


@dataclass(frozen=True)
class KSelection:
    k: int
    k_n1: int
    k_n2: int
    n1: int
    n2: int
    fallback: bool


def _bootstrap_criterion(y: np.ndarray, size: int, reps: int, rng) -> np.ndarray:
    """Q(k) = mean over resamples of (M(k) - 2 gamma(k)^2)^2 for k = 1..size-1.

    M is the second moment of log-excesses over the (k+1)-th largest value;
    k where any resample has a nonpositive threshold gets +inf.
    """
    n = y.size
    q = np.zeros(size - 1)
    valid = np.ones(size - 1, dtype=bool)
    # chunk to bound memory
    chunk = max(1, int(2_000_000 // size))
    done = 0
    while done < reps:
        b = min(chunk, reps - done)
        idx = rng.integers(0, n, size=(b, size))
        s = -np.sort(-y[idx], axis=1)
        thr = s[:, 1:]
        valid &= np.all(thr > 0, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            logs = np.log(np.where(s > 0, s, np.nan))
            c1 = np.cumsum(logs, axis=1)[:, :-1]
            c2 = np.cumsum(logs * logs, axis=1)[:, :-1]
            k = np.arange(1, size)
            lt = logs[:, 1:]
            g = c1 / k - lt
            m2 = c2 / k - 2 * lt * c1 / k + lt * lt
            q += np.nansum((m2 - 2 * g * g) ** 2, axis=0)
        done += b
    q /= reps
    q[~valid] = np.inf
    return q


def bootstrap_k_selection(ys, config: BootstrapConfig | None = None) -> KSelection:
    config = config or BootstrapConfig()
    y = np.asarray(ys, dtype=float).ravel()
    n = y.size
    if n < config.min_n:
        raise DomainError(f"bootstrap k selection needs n >= {config.min_n}, got {n}")
    rng = np.random.default_rng(config.seed)
    n1 = int(math.ceil(n**config.exponent))
    n2 = int(math.ceil(n1 * n1 / n))
    q1 = _bootstrap_criterion(y, n1, config.replicates, rng)
    q2 = _bootstrap_criterion(y, n2, config.replicates, rng)
    lo, hi = 10, n // 2
    fallback_k = int(math.ceil(0.05 * n))
    if not (np.isfinite(q1).any() and np.isfinite(q2).any()):
        return _fallback(fallback_k, n1, n2, "no valid bootstrap criterion")
    k1 = int(np.argmin(q1)) + 1
    k2 = int(np.argmin(q2)) + 1
    flat = np.ptp(q1[np.isfinite(q1)]) == 0 or np.ptp(q2[np.isfinite(q2)]) == 0
    ln1, lk1 = math.log(n1), math.log(k1)
    if flat or k1 <= 1 or k2 < 1 or 2 * ln1 - lk1 <= 0:
        return _fallback(fallback_k, n1, n2, "degenerate bootstrap criterion")
    ratio = lk1 * lk1 / (2 * ln1 - lk1) ** 2
    k = (k1 * k1 / k2) * ratio ** ((ln1 - lk1) / ln1)
    if not np.isfinite(k):
        return _fallback(fallback_k, n1, n2, "non-finite k")
    k = int(min(max(round(k), lo), hi))
    return KSelection(k, k1, k2, n1, n2, False)


def _fallback(k: int, n1: int, n2: int, why: str) -> KSelection:
    warnings.warn(f"bootstrap k selection fell back to k={k}: {why}", RuntimeWarning, stacklevel=3)
    return KSelection(k, 0, 0, n1, n2, True)


def select_k_bootstrap(ys, config: BootstrapConfig | None = None) -> int:
    """Sample fraction for the Hill estimator from the double subsample bootstrap."""
    return bootstrap_k_selection(ys, config).k
