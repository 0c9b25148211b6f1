"""Two-sample comparison of censored event collections.

Contains the one-sided Mann-Whitney U-test, Fisher's combination of
p-values, the Monte Carlo U-test that repeats the U-test on samples drawn
from two fitted survival curves, the KS distance between fitted CDFs, the
biased MMD estimate with an RBF kernel, and the helpers used to check test
calibration (chi-squared uniformity, Holm-Bonferroni).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist
from scipy.special import gammaincc
from scipy.stats import norm, rankdata

from .errors import DegenerateStatisticError, InvalidInputError
from .geometry import DistanceInterval, EventCollection, as_intervals
from .sampling import SamplerConfig, draw_with_rng
from .survival import SurvivalCurve, evaluate, fit, greenwood_band

P_FLOOR = 1e-300
EXACT_MAX_CELLS = 400

A_GREATER = "greater"  # A stochastically dominates B
B_GREATER = "less"


@dataclass(frozen=True)
class UTestResult:
    u: float
    p: float
    method: str


@dataclass
class TestReport:
    statistic: float
    p_value: float
    n_trials: int
    seed: int
    alternative: str = A_GREATER
    per_trial_p: list[float] = field(default_factory=list)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "p_value": self.p_value,
            "n_trials": self.n_trials,
            "seed": self.seed,
            "alternative": self.alternative,
            "per_trial_p": list(self.per_trial_p),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        return cls(
            statistic=float(d["statistic"]),
            p_value=float(d["p_value"]),
            n_trials=int(d["n_trials"]),
            seed=int(d["seed"]),
            alternative=d.get("alternative", A_GREATER),
            per_trial_p=[float(p) for p in d["per_trial_p"]],
        )


def chi2_sf(x: float, dof: float) -> float:
    """Upper tail of the chi-squared distribution via the regularized
    upper incomplete gamma function."""
    if x <= 0:
        return 1.0
    return float(gammaincc(dof / 2.0, x / 2.0))


# --- Mann-Whitney ---------------------------------------------------------

@lru_cache(maxsize=None)
def _u_counts(m: int, n: int) -> tuple[int, ...]:
    """Number of arrangements giving each U = 0..m*n (exact ints).

    Uses c(u; m, n) = c(u - n; m - 1, n) + c(u; m, n - 1), conditioning on
    whether the largest observation belongs to the first sample.
    """
    if m == 0 or n == 0:
        return (1,)
    a = _u_counts(m - 1, n)
    b = _u_counts(m, n - 1)
    out = [0] * (m * n + 1)
    for u, c in enumerate(b):
        out[u] += c
    for u, c in enumerate(a):
        out[u + n] += c
    return tuple(out)


def exact_u_sf(u: float, m: int, n: int) -> float:
    """P(U >= u) under the null for tie-free samples."""
    counts = _u_counts(m, n)
    k = max(0, math.ceil(u - 1e-9))
    return sum(counts[k:]) / math.comb(m + n, m)


def mann_whitney_u(s_a, s_b, alternative: str = A_GREATER, method: str = "auto") -> UTestResult:
    """One-sided Mann-Whitney test.

    ``u`` is the statistic for sample A (large when A tends to be larger).
    The p-value is ``P(U >= u)`` for ``alternative="greater"`` and
    ``P(U <= u)`` for ``"less"``.  With ``method="auto"`` the exact null
    distribution is used for small tie-free samples (``m * n <= 400``) and
    the tie-corrected normal approximation with continuity correction
    otherwise; ``"exact"`` and ``"normal"`` force one or the other.
    """
    a = np.asarray(s_a, dtype=float).ravel()
    b = np.asarray(s_b, dtype=float).ravel()
    m, n = len(a), len(b)
    if m == 0 or n == 0:
        raise InvalidInputError("both samples must be nonempty")
    if alternative not in (A_GREATER, B_GREATER):
        raise InvalidInputError(f"unknown alternative {alternative!r}")
    if method not in ("auto", "exact", "normal"):
        raise InvalidInputError(f"unknown method {method!r}")
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    u = float(ranks[:m].sum() - m * (m + 1) / 2)
    # mirror for the "less" alternative: P(U <= u) = P(U' >= m*n - u)
    u_dir = u if alternative == A_GREATER else m * n - u

    _, tie_counts = np.unique(pooled, return_counts=True)
    has_ties = bool(np.any(tie_counts > 1))
    if method == "exact" and has_ties:
        raise InvalidInputError("exact p-values require tie-free samples")
    if method == "exact" or (method == "auto" and m * n <= EXACT_MAX_CELLS and not has_ties):
        return UTestResult(u, exact_u_sf(u_dir, m, n), "exact")

    N = m + n
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (N * (N - 1))
    var = m * n / 12.0 * ((N + 1) - tie_term)
    if var <= 0:
        return UTestResult(u, 1.0, "normal-approximation")
    z = (u_dir - m * n / 2.0 - 0.5) / math.sqrt(var)
    p = max(float(norm.sf(z)), P_FLOOR)
    return UTestResult(u, min(p, 1.0), "normal-approximation")


# --- Fisher ---------------------------------------------------------------

def fisher_combine(p_values: Sequence[float]) -> tuple[float, float]:
    """Fisher's combined statistic ``T = -2 sum log p`` and its chi2_{2k} tail."""
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise InvalidInputError("need at least one p-value")
    if np.any(~np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise InvalidInputError("p-values must lie in [0, 1]")
    logs = np.log(np.maximum(p, P_FLOOR))
    T = -2.0 * math.fsum(logs)
    T = max(T, 0.0)
    return T, chi2_sf(T, 2 * p.size)


# --- Monte Carlo U-test ---------------------------------------------------

def _fit_with_band(data, alpha):
    intervals, half_open = as_intervals(data)
    curve = fit(intervals, half_open=half_open)
    return curve, greenwood_band(curve, alpha)


def _trial_rngs(seed: int, trial: int):
    ss = np.random.SeedSequence(int(seed), spawn_key=(trial,))
    ss_a, ss_b = ss.spawn(2)
    return np.random.default_rng(ss_a), np.random.default_rng(ss_b)


def mc_u_test(
    e_a: EventCollection | Sequence[DistanceInterval],
    e_b: EventCollection | Sequence[DistanceInterval],
    m: int = 100,
    n: int = 100,
    n_trials: int = 100,
    sampler_config: SamplerConfig | None = None,
    alternative: str = A_GREATER,
    threads: int = 1,
    fitted=None,
) -> TestReport:
    """Monte Carlo U-test for two collections of censored events.

    Both survival curves are fitted once.  Each trial draws ``m`` distances
    from curve A and ``n`` from curve B using RNG streams derived from
    ``(seed, trial)``, runs the one-sided U-test, and the per-trial
    p-values are combined with Fisher's method.  The result does not depend
    on ``threads``.

    ``fitted`` may carry precomputed ``((curve_a, band_a), (curve_b, band_b))``.
    """
    cfg = sampler_config or SamplerConfig()
    if min(m, n, n_trials) < 1:
        raise InvalidInputError("m, n and n_trials must be positive")
    if fitted is None:
        fa = _fit_with_band(e_a, cfg.alpha)
        fb = fa if e_b is e_a else _fit_with_band(e_b, cfg.alpha)
    else:
        fa, fb = fitted

    def trial(i: int) -> float:
        rng_a, rng_b = _trial_rngs(cfg.seed, i)
        s_a = draw_with_rng(*fa, m, rng_a, cfg.interpolation, cfg.perturb)
        s_b = draw_with_rng(*fb, n, rng_b, cfg.interpolation, cfg.perturb)
        return mann_whitney_u(s_a, s_b, alternative).p

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_trial = list(pool.map(trial, range(n_trials)))
    else:
        per_trial = [trial(i) for i in range(n_trials)]
    T, p = fisher_combine(per_trial)
    return TestReport(T, p, n_trials, int(cfg.seed), alternative, per_trial)


# --- distances between distributions ----------------------------------------

def ks_statistic(curve_a: SurvivalCurve, curve_b: SurvivalCurve) -> float:
    """Largest vertical gap between two fitted step CDFs.

    Both CDFs only jump at their evaluation points, so the supremum is
    attained at one of them (the left limits coincide with values at the
    preceding point of the union).
    """
    grid = np.union1d(curve_a.eval_points, curve_b.eval_points)
    _, fa = evaluate(curve_a, grid)
    _, fb = evaluate(curve_b, grid)
    return float(np.max(np.abs(fa - fb)))


def rbf_kernel(x, y, sigma: float) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    return np.exp(-((x[:, None] - y[None, :]) ** 2) / (2.0 * sigma**2))


def mmd(s_a, s_b, sigma: float) -> float:
    """Biased (V-statistic) MMD estimate with an RBF kernel of bandwidth ``sigma``."""
    a = np.asarray(s_a, dtype=float).ravel()
    b = np.asarray(s_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("both samples must be nonempty")
    if not sigma > 0:
        raise InvalidInputError("sigma must be positive")
    # fsum is order-independent, which keeps mmd(a, b) == mmd(b, a) exactly
    def mean(k):
        return math.fsum(k.ravel()) / k.size

    sq = mean(rbf_kernel(a, a, sigma)) + mean(rbf_kernel(b, b, sigma)) - 2 * mean(rbf_kernel(a, b, sigma))
    return math.sqrt(max(sq, 0.0))


def median_bandwidth(s_a, s_b) -> float:
    """Median absolute pairwise distance of the pooled sample.

    Falls back to the smallest positive pairwise distance when the median
    is zero.
    """
    pooled = np.concatenate([np.asarray(s_a, float).ravel(), np.asarray(s_b, float).ravel()])
    if pooled.size < 2:
        raise InvalidInputError("need at least two pooled values")
    d = pdist(pooled[:, None], metric="cityblock")
    med = float(np.median(d))
    if med > 0:
        return med
    positive = d[d > 0]
    if positive.size == 0:
        raise DegenerateStatisticError("all pooled values are identical; bandwidth is undefined")
    return float(positive.min())


# --- calibration helpers ----------------------------------------------------

def chi2_uniformity(p_values: Sequence[float], n_bins: int = 20) -> tuple[float, float]:
    """Pearson chi-squared test of uniformity over equal-width bins on [0, 1]."""
    p = np.asarray(p_values, dtype=float).ravel()
    if p.size == 0:
        raise InvalidInputError("need at least one value")
    if n_bins < 2:
        raise InvalidInputError("n_bins must be >= 2")
    if np.any((p < 0) | (p > 1)):
        raise InvalidInputError("values must lie in [0, 1]")
    # np.histogram closes the last bin, so 1.0 lands in it
    observed, _ = np.histogram(p, bins=n_bins, range=(0.0, 1.0))
    expected = p.size / n_bins
    stat = float(np.sum((observed - expected) ** 2) / expected)
    return stat, chi2_sf(stat, n_bins - 1)


def holm_bonferroni(p_values: Sequence[float], alpha: float = 0.05) -> list[bool]:
    """Step-down Holm rejections, returned in input order."""
    if not 0 < alpha < 1:
        raise InvalidInputError("alpha must lie in (0, 1)")
    p = list(p_values)
    k = len(p)
    reject = [False] * k
    for rank, i in enumerate(sorted(range(k), key=lambda i: p[i])):
        if p[i] <= alpha / (k - rank):
            reject[i] = True
        else:
            break
    return reject


def rejection_rate(p_values: Sequence[float], level: float) -> float:
    p = np.asarray(p_values, dtype=float)
    return float(np.mean(p <= level)) if p.size else float("nan")
