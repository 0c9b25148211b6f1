"""Turnbull nonparametric estimator for interval-censored distances.

The estimator places probability mass only on the *innermost* intervals
(Turnbull intervals) of the observations and finds the masses by the
self-consistency EM iteration.  Confidence bands use the exponential
Greenwood construction on the log(-log S) scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import norm

from .errors import ConvergenceError, EmptyDataError, InvalidInputError
from .geometry import DistanceInterval

PRUNE_BELOW = 1e-12


@dataclass(frozen=True)
class TurnbullInterval:
    left: float
    right: float


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Fitted step survival function.

    Arrays are aligned with ``support``; ``eval_points`` are the right
    endpoints of the support intervals, where the step function drops.
    """

    support: tuple[TurnbullInterval, ...]
    mass: np.ndarray
    eval_points: np.ndarray
    S: np.ndarray
    n_at_risk: np.ndarray
    deaths: np.ndarray
    var_loglog: np.ndarray
    n_total: float
    iterations: int = 0
    residual: float = 0.0

    @property
    def F(self) -> np.ndarray:
        return 1.0 - self.S

    @property
    def lefts(self) -> np.ndarray:
        return np.array([s.left for s in self.support], dtype=float)

    def evaluate(self, d):
        return evaluate(self, d)


@dataclass(frozen=True, eq=False)
class ConfidenceBand:
    alpha: float
    S_lower: np.ndarray
    S_upper: np.ndarray

    @property
    def F_lower(self) -> np.ndarray:
        return 1.0 - self.S_upper

    @property
    def F_upper(self) -> np.ndarray:
        return 1.0 - self.S_lower


def _as_arrays(observations: Sequence[DistanceInterval]):
    if len(observations) == 0:
        raise EmptyDataError("no observations")
    lo = np.array([o.lower for o in observations], dtype=float)
    hi = np.array([o.upper for o in observations], dtype=float)
    w = np.array([o.weight for o in observations], dtype=float)
    return lo, hi, w


def turnbull_intervals(
    observations: Sequence[DistanceInterval], half_open: bool = False
) -> list[TurnbullInterval]:
    """Innermost intervals of a set of closed observation intervals.

    An innermost interval is a left endpoint immediately followed by a right
    endpoint in the sorted endpoint sequence.  With closed intervals a left
    endpoint sorts before a right endpoint at the same value, so intervals
    that touch share the point.  With ``half_open=True`` touching
    nondegenerate intervals are treated as disjoint; degenerate observations
    stay closed.
    """
    lo, hi, _ = _as_arrays(observations)
    degenerate = lo == hi
    if half_open:
        left_rank = np.where(degenerate, 0, 2)
    else:
        left_rank = np.zeros(len(lo), dtype=int)
    # (value, rank, is_right); right endpoints have rank 1
    values = np.concatenate([lo, hi])
    ranks = np.concatenate([left_rank, np.ones(len(hi), dtype=int)])
    is_right = np.concatenate([np.zeros(len(lo), bool), np.ones(len(hi), bool)])
    order = np.lexsort((ranks, values))
    values, is_right = values[order], is_right[order]

    out: list[TurnbullInterval] = []
    for k in range(len(values) - 1):
        if not is_right[k] and is_right[k + 1]:
            iv = TurnbullInterval(float(values[k]), float(values[k + 1]))
            if not out or out[-1] != iv:
                out.append(iv)
    return out


def _collapse(lo, hi, w):
    """Merge identical observation intervals, summing their weights."""
    keys = np.stack([lo, hi], axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    weights = np.bincount(inv.ravel(), weights=w, minlength=len(uniq))
    return uniq[:, 0], uniq[:, 1], weights


def log_likelihood(membership: np.ndarray, weights: np.ndarray, p: np.ndarray) -> float:
    return float(np.sum(weights * np.log(membership @ p)))


def fit(
    observations: Sequence[DistanceInterval],
    tol: float = 1e-8,
    max_iter: int = 100_000,
    half_open: bool = False,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> SurvivalCurve:
    """Fit the Turnbull NPMLE by self-consistency EM.

    Parameters
    ----------
    observations : sequence of DistanceInterval
        Censored distances with multiplicities in ``weight``.
    tol : float
        Stop once the largest change of any mass is below ``tol``.
    max_iter : int
        Iteration cap; exceeding it raises :class:`ConvergenceError`.
    half_open : bool
        Treat touching intervals as disjoint (see :func:`turnbull_intervals`).
    callback : callable, optional
        Called as ``callback(iteration, masses)`` after every EM update.

    Returns
    -------
    SurvivalCurve
    """
    if not tol > 0:
        raise InvalidInputError("tol must be positive")
    if max_iter < 1:
        raise InvalidInputError("max_iter must be >= 1")
    lo, hi, w = _as_arrays(observations)
    support = turnbull_intervals(observations, half_open=half_open)
    lo, hi, w = _collapse(lo, hi, w)
    W = float(w.sum())

    left = np.array([s.left for s in support])
    right = np.array([s.right for s in support])
    membership = ((left[None, :] >= lo[:, None]) & (right[None, :] <= hi[:, None])).astype(float)

    p = np.full(len(support), 1.0 / len(support))
    residual = np.inf
    iterations = 0
    while residual >= tol:
        if iterations >= max_iter:
            raise ConvergenceError(
                f"EM did not converge in {max_iter} iterations (residual {residual:.3g})",
                residual=residual,
                iterations=iterations,
            )
        new = p * (membership.T @ (w / (membership @ p))) / W
        new /= new.sum()
        residual = float(np.max(np.abs(new - p)))
        p = new
        iterations += 1
        if callback is not None:
            callback(iterations, p)

    p = np.where(p < PRUNE_BELOW, 0.0, p)
    p /= p.sum()
    keep = p > 0
    support = tuple(s for s, k in zip(support, keep) if k)
    return _build_curve(support, p[keep], W, iterations, residual)


def _build_curve(support, mass, W, iterations=0, residual=0.0) -> SurvivalCurve:
    mass = np.asarray(mass, dtype=float)
    eval_points = np.array([s.right for s in support], dtype=float)
    S = np.clip(1.0 - np.cumsum(mass), 0.0, 1.0)
    S[-1] = 0.0
    S_prev = np.concatenate([[1.0], S[:-1]])
    deaths = W * mass
    n_at_risk = W * S_prev
    return SurvivalCurve(
        support=tuple(support),
        mass=mass,
        eval_points=eval_points,
        S=S,
        n_at_risk=n_at_risk,
        deaths=deaths,
        var_loglog=_greenwood_var(S, n_at_risk, deaths),
        n_total=W,
        iterations=iterations,
        residual=residual,
    )


def curve_from_masses(
    support: Sequence[TurnbullInterval], mass: Sequence[float], n_total: float
) -> SurvivalCurve:
    """Rebuild a curve from stored support and masses (no fitting)."""
    return _build_curve(tuple(support), mass, float(n_total))


def _greenwood_var(S, n, y) -> np.ndarray:
    ok = n - y > 0
    terms = np.zeros_like(S)
    terms[ok] = y[ok] / (n[ok] * (n[ok] - y[ok]))
    total = np.cumsum(terms)
    var = np.full_like(S, np.nan)
    interior = (S > 0) & (S < 1)
    var[interior] = total[interior] / np.log(S[interior]) ** 2
    return var


def greenwood_band(curve: SurvivalCurve, alpha: float = 0.05) -> ConfidenceBand:
    """Exponential Greenwood confidence band at every evaluation point.

    Where the survival estimate is exactly 0 or 1 the band collapses onto
    the point estimate.
    """
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    S = curve.S
    lower = S.copy()
    upper = S.copy()
    interior = np.isfinite(curve.var_loglog)
    g = np.log(-np.log(S[interior]))
    h = norm.ppf(alpha / 2) * np.sqrt(curve.var_loglog[interior])
    a = np.exp(-np.exp(g + h))
    b = np.exp(-np.exp(g - h))
    lower[interior] = np.minimum(a, b)
    upper[interior] = np.maximum(a, b)
    return ConfidenceBand(alpha=alpha, S_lower=lower, S_upper=upper)


def evaluate(curve: SurvivalCurve, d):
    """Right-continuous ``(S(d), F(d))``; ``d`` may be scalar or array."""
    d_arr = np.asarray(d, dtype=float)
    idx = np.searchsorted(curve.eval_points, d_arr, side="right")
    cum = np.concatenate([[0.0], np.cumsum(curve.mass)])
    F = np.minimum(cum[idx], 1.0)
    F = np.where(idx == len(curve.eval_points), 1.0, F)
    S = 1.0 - F
    if np.ndim(d) == 0:
        return float(S), float(F)
    return S, F


def eval_index(curve: SurvivalCurve, d):
    """Index of the evaluation point at or after ``d`` (clipped to the last)."""
    idx = np.searchsorted(curve.eval_points, np.asarray(d, dtype=float), side="left")
    return np.minimum(idx, len(curve.eval_points) - 1)
