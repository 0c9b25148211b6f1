"""Draw uncensored distances from a fitted survival curve.

Each draw is an inverse-transform sample ``d* = F^-1(u)`` plus a Gaussian
perturbation whose scale comes from the gap between the upper CDF band and
the point estimate at ``d*``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidInputError
from .survival import ConfidenceBand, SurvivalCurve, eval_index

STEP = "step"
LINEAR = "linear"


@dataclass(frozen=True)
class SamplerConfig:
    """Sampling options.

    ``interpolation`` is ``"linear"`` (mass spread uniformly inside each
    support interval) or ``"step"`` (pure step-function inverse).  Setting
    ``perturb=False`` turns off the Gaussian uncertainty term.
    """

    alpha: float = 0.05
    seed: int = 0
    interpolation: str = LINEAR
    perturb: bool = True

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise InvalidInputError("alpha must lie in (0, 1)")
        if self.interpolation not in (STEP, LINEAR):
            raise InvalidInputError(f"unknown interpolation {self.interpolation!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")


def inverse_cdf(curve: SurvivalCurve, u, interpolation: str = LINEAR):
    """Generalized inverse ``inf{d : F(d) >= u}`` of the fitted CDF.

    ``u = 0`` maps to the left end of the first support interval.  In linear
    mode the CDF rises linearly across each nondegenerate support interval.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)):
        raise InvalidInputError("u must lie in [0, 1]")
    cum = np.cumsum(curve.mass)
    cum[-1] = 1.0
    j = np.minimum(np.searchsorted(cum, u_arr, side="left"), len(cum) - 1)
    lefts = curve.lefts
    rights = curve.eval_points
    if interpolation == STEP:
        out = np.where(u_arr <= 0, lefts[0], rights[j])
    elif interpolation == LINEAR:
        below = np.where(j > 0, cum[j - 1], 0.0)
        frac = np.clip((u_arr - below) / curve.mass[j], 0.0, 1.0)
        out = lefts[j] + frac * (rights[j] - lefts[j])
    else:
        raise InvalidInputError(f"unknown interpolation {interpolation!r}")
    return float(out) if np.ndim(u) == 0 else out


def perturbation_scale(curve: SurvivalCurve, band: ConfidenceBand, d):
    """Gaussian scale at ``d``: upper CDF band gap over ``Q(1 - alpha/2)``."""
    idx = eval_index(curve, d)
    gap = band.F_upper[idx] - curve.F[idx]
    return np.maximum(gap, 0.0) / norm.ppf(1 - band.alpha / 2)


def draw_with_rng(
    curve: SurvivalCurve,
    band: ConfidenceBand,
    n: int,
    rng: np.random.Generator,
    interpolation: str = LINEAR,
    perturb: bool = True,
) -> np.ndarray:
    if n < 0:
        raise InvalidInputError("n must be nonnegative")
    if n == 0:
        return np.empty(0)
    u = rng.random(n)
    eps = rng.standard_normal(n)
    d_star = inverse_cdf(curve, u, interpolation)
    if perturb:
        d_star = d_star + eps * perturbation_scale(curve, band, d_star)
    return np.maximum(d_star, 0.0)


def draw(curve: SurvivalCurve, band: ConfidenceBand, n: int, config: SamplerConfig | None = None) -> np.ndarray:
    """Draw ``n`` nonnegative distances; deterministic given ``config.seed``."""
    config = config or SamplerConfig()
    if not np.isclose(band.alpha, config.alpha):
        raise InvalidInputError(
            f"band computed at alpha={band.alpha} but sampler configured for alpha={config.alpha}"
        )
    rng = np.random.default_rng(int(config.seed))
    return draw_with_rng(curve, band, n, rng, config.interpolation, config.perturb)
