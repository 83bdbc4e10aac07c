"""Rank-based nonparametric tail dependence estimation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError


@dataclass(frozen=True)
class LossPairSample:
    """Paired losses: ``xs`` for the institution, ``ys`` for the system."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).ravel()
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.shape != ys.shape:
            raise DomainError(f"length mismatch: {xs.size} vs {ys.size}")
        if xs.size < 2:
            raise DomainError("need at least two pairs")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
            raise DomainError("sample contains non-finite values")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    def __len__(self) -> int:
        return self.xs.size

    @property
    def n(self) -> int:
        return self.xs.size


@dataclass(frozen=True)
class RankVectors:
    rx: np.ndarray
    ry: np.ndarray


def ordinal_ranks(values) -> np.ndarray:
    """Ascending ranks 1..n; ties go to the earlier index first."""
    values = np.asarray(values)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.int64)
    ranks[order] = np.arange(1, values.size + 1)
    return ranks


def compute_ranks(sample: LossPairSample) -> RankVectors:
    return RankVectors(ordinal_ranks(sample.xs), ordinal_ranks(sample.ys))


def _check_m(m: int, n: int) -> None:
    if not (1 <= m <= n) or int(m) != m:
        raise DomainError(f"m must be an integer in [1, {n}], got {m}")


def r_hat(sample: LossPairSample, m: int, x, y, ranks: RankVectors | None = None):
    """Nonparametric tail dependence estimate at (x, y).

    ``(1/m) * #{i : rank(X_i) >= n + 1/2 - m x and rank(Y_i) >= n + 1/2 - m y}``.
    Broadcasts over array-valued x, y.
    """
    n = sample.n
    _check_m(m, n)
    ranks = ranks or compute_ranks(sample)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("x and y must be nonnegative")
    # ranks are integers and thresholds half-integers shifted by m*x, so the
    # comparison is exact without any tolerance
    tx = n + 0.5 - m * x.ravel()
    ty = n + 0.5 - m * y.ravel()
    hit = (ranks.rx[None, :] >= tx[:, None]) & (ranks.ry[None, :] >= ty[:, None])
    out = hit.sum(axis=1).reshape(x.shape) / m
    return float(out) if out.ndim == 0 else out


def tdc_hat(sample: LossPairSample, m: int) -> float:
    """Empirical upper tail dependence coefficient, ``r_hat`` at (1, 1)."""
    return r_hat(sample, m, 1.0, 1.0)


def exceedance_corners(sample: LossPairSample, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower-left corners (a_i, b_i) of the unit-square regions where each
    observation is counted by ``r_hat``; only corners inside [0, 1)^2 are kept."""
    n = sample.n
    _check_m(m, n)
    ranks = compute_ranks(sample)
    a = (n + 0.5 - ranks.rx) / m
    b = (n + 0.5 - ranks.ry) / m
    keep = (a < 1.0) & (b < 1.0)
    return a[keep], b[keep]
