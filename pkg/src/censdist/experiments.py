"""Validation experiments and the screening-attendance re-analysis.

These functions return plain rows/dicts so the CLI can write them as
plot-ready CSV/JSON and tests can assert on them directly.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import simulation
from .errors import InvalidInputError
from .geometry import DEFAULT_SAMPLES_PER_EDGE, DistanceInterval, EventCollection
from .sampling import SamplerConfig, draw_with_rng
from .stats import (
    A_GREATER,
    TestReport,
    chi2_uniformity,
    holm_bonferroni,
    ks_statistic,
    mc_u_test,
    median_bandwidth,
    mmd,
    rejection_rate,
)
from .survival import fit, greenwood_band

DEFAULT_LOCALE_COUNTS = (10, 50, 100, 500, 1000, 2000, 3000, 4000, 5000)
CALIBRATION_LEVELS = (0.01, 0.05, 0.1)


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 64-bit seed for the sub-task identified by ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, np.uint64)[0])


def censored_collection(world, events, samples_per_edge=DEFAULT_SAMPLES_PER_EDGE) -> EventCollection:
    return EventCollection.from_events(
        simulation.censor(events), world.locales(), samples_per_edge=samples_per_edge
    )


def _exact_curve(distances):
    return fit([DistanceInterval(float(d), float(d)) for d in distances])


# --- convergence --------------------------------------------------------------

def convergence_experiment(
    locale_counts: Sequence[int] = DEFAULT_LOCALE_COUNTS,
    n_seeds: int = 10,
    n_locations: int = 1000,
    n_events: int = 100,
    n_samples: int = 100,
    width: float = 1_000_000.0,
    height: float = 1_000_000.0,
    seed: int = 0,
    alpha: float = 0.05,
    samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE,
) -> list[dict]:
    """KS and MMD between true distances and their reconstruction.

    For each seed one world and one event set are generated; the same
    events are then censored under each locale count.  KS compares the
    ECDF of the true distances with the fitted CDF; MMD compares the true
    distances with ``n_samples`` draws from the fitted curve, using the
    median-distance bandwidth.
    """
    rows = []
    for trial in range(n_seeds):
        base = simulation.build(width, height, n_locations, 1, derive_seed(seed, trial, 0))
        events = simulation.generate_events(base, n_events, derive_seed(seed, trial, 1))
        truth = simulation.uncensored_distances(events)
        ecdf = _exact_curve(truth)
        for k, count in enumerate(locale_counts):
            world = simulation.regrid(base, count)
            coll = censored_collection(world, simulation.relabel(world, events), samples_per_edge)
            curve = fit(coll.intervals)
            band = greenwood_band(curve, alpha)
            rng = np.random.default_rng(derive_seed(seed, trial, 2, k))
            drawn = draw_with_rng(curve, band, n_samples, rng)
            sigma = median_bandwidth(truth, drawn)
            rows.append(
                {
                    "locale_count": count,
                    "trial": trial,
                    "ks": ks_statistic(ecdf, curve),
                    "mmd": mmd(truth, drawn, sigma),
                    "sigma": sigma,
                    "support_size": len(curve.support),
                }
            )
    return rows


def summarize_convergence(rows: Sequence[Mapping]) -> list[dict]:
    """Mean and spread of KS/MMD per locale count, in first-seen order."""
    counts = list(dict.fromkeys(r["locale_count"] for r in rows))
    out = []
    for c in counts:
        ks = np.array([r["ks"] for r in rows if r["locale_count"] == c])
        mm = np.array([r["mmd"] for r in rows if r["locale_count"] == c])
        out.append(
            {
                "locale_count": c,
                "ks_mean": float(ks.mean()),
                "ks_std": float(ks.std(ddof=1)) if ks.size > 1 else 0.0,
                "mmd_mean": float(mm.mean()),
                "mmd_std": float(mm.std(ddof=1)) if mm.size > 1 else 0.0,
                "n": int(ks.size),
            }
        )
    return out


# --- calibration ----------------------------------------------------------------

def null_test_pvalue(
    locale_count: int,
    seed: int,
    n_locations: int = 1000,
    n_events: int = 1000,
    m: int = 100,
    n: int = 100,
    trials: int = 100,
    width: float = 1_000_000.0,
    height: float = 1_000_000.0,
    samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE,
) -> float:
    """One Monte Carlo U-test with both samples drawn from the same collection."""
    world = simulation.build(width, height, n_locations, locale_count, derive_seed(seed, 0))
    events = simulation.generate_events(world, n_events, derive_seed(seed, 1))
    coll = censored_collection(world, events, samples_per_edge)
    cfg = SamplerConfig(seed=derive_seed(seed, 2))
    return mc_u_test(coll, coll, m, n, trials, cfg).p_value


def calibration_experiment(
    locale_counts: Sequence[int] = (10, 50, 100, 500, 1000, 2000),
    n_tests: int = 1000,
    seed: int = 0,
    threads: int = 1,
    **kwargs,
) -> dict[int, list[float]]:
    """Null p-values per locale count; test ``i`` of count ``k`` is seeded by
    ``(seed, k, i)`` so results do not depend on ``threads``."""
    out = {}
    for k, count in enumerate(locale_counts):
        seeds = [derive_seed(seed, k, i) for i in range(n_tests)]

        def one(s, count=count):
            return null_test_pvalue(count, s, **kwargs)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                out[count] = list(pool.map(one, seeds))
        else:
            out[count] = [one(s) for s in seeds]
    return out


def summarize_calibration(
    pvalues: Mapping[int, Sequence[float]],
    levels: Sequence[float] = CALIBRATION_LEVELS,
    n_bins: int = 20,
    alpha: float = 0.05,
) -> tuple[list[dict], list[dict]]:
    """Rejection frequencies and a chi-squared uniformity table.

    Holm-Bonferroni is applied across locale counts to the uniformity
    p-values.
    """
    rejections = [
        {"locale_count": c, "level": lv, "rate": rejection_rate(ps, lv), "n_tests": len(ps)}
        for c, ps in pvalues.items()
        for lv in levels
    ]
    table = []
    for c, ps in pvalues.items():
        chi2, p = chi2_uniformity(ps, n_bins)
        table.append({"locale_count": c, "chi2": chi2, "p_value": p})
    flags = holm_bonferroni([r["p_value"] for r in table], alpha)
    for row, flag in zip(table, flags):
        row["significant"] = bool(flag)
    return rejections, table


# --- screening-attendance re-analysis -----------------------------------------------

@dataclass(frozen=True)
class DistanceBin:
    lower_km: float
    upper_km: float  # inf for an open-ended bin
    invited: int
    attended: int

    @property
    def not_attended(self) -> int:
        return self.invited - self.attended


# Breast screening invitations/attendance by distance band (North Derbyshire, 1998-2001).
SCREENING_BINS = (
    DistanceBin(8, math.inf, 4641, 3575),
    DistanceBin(6, 8, 4982, 3880),
    DistanceBin(4, 6, 7871, 6088),
    DistanceBin(2, 4, 8068, 6318),
    DistanceBin(0, 2, 9306, 7429),
)

GROUPS = ("invited", "attended", "not_attended")


def check_bins(bins: Sequence[DistanceBin]) -> None:
    if not bins:
        raise InvalidInputError("no distance bins")
    for b in bins:
        if b.attended > b.invited:
            raise InvalidInputError(
                f"bin [{b.lower_km}, {b.upper_km}]: attended ({b.attended}) exceeds invited ({b.invited})"
            )
        if b.attended < 0 or b.invited < 0:
            raise InvalidInputError("counts must be nonnegative")
        if not (0 <= b.lower_km < b.upper_km):
            raise InvalidInputError(f"bad bin bounds [{b.lower_km}, {b.upper_km}]")


def bins_to_collection(
    bins: Sequence[DistanceBin], group: str, upper_bound_km: float = 100.0, closed: bool = False
) -> EventCollection:
    """Weighted intervals for one group; open-ended bins are capped at ``upper_bound_km``.

    Bins are half-open (``2 <= d < 4``) unless ``closed`` is set, in which
    case touching bins share their endpoint.
    """
    if group not in GROUPS:
        raise InvalidInputError(f"unknown group {group!r}; choose from {GROUPS}")
    check_bins(bins)
    intervals = []
    for b in bins:
        upper = min(b.upper_km, upper_bound_km)
        if upper <= b.lower_km:
            raise InvalidInputError(f"upper bound {upper_bound_km} km does not exceed bin start {b.lower_km}")
        count = getattr(b, group)
        if count > 0:
            intervals.append(DistanceInterval(float(b.lower_km), float(upper), count))
    if not intervals:
        raise InvalidInputError(f"group {group!r} has no events")
    return EventCollection(intervals, half_open=not closed)


def screening_reanalysis(
    bins: Sequence[DistanceBin] = SCREENING_BINS,
    group_a: str = "invited",
    group_b: str = "attended",
    m: int = 100,
    n: int = 100,
    trials: int = 100,
    seed: int = 0,
    upper_bound_km: float = 100.0,
    closed: bool = False,
    threads: int = 1,
    alternative: str = A_GREATER,
) -> TestReport:
    """Monte Carlo U-test of whether distances in ``group_a`` dominate ``group_b``."""
    e_a = bins_to_collection(bins, group_a, upper_bound_km, closed)
    e_b = bins_to_collection(bins, group_b, upper_bound_km, closed)
    return mc_u_test(e_a, e_b, m, n, trials, SamplerConfig(seed=seed), alternative, threads)
