"""Distance distributions from location-censored transportation events."""

from .errors import (
    CensDistError,
    ConvergenceError,
    DegenerateStatisticError,
    DomainError,
    EmptyDataError,
    InvalidInputError,
    InvalidLocaleCountError,
    InvalidLocaleError,
    InvalidWorldError,
    UnknownLocaleError,
)
from .geometry import (
    DistanceInterval,
    DistanceMetric,
    EventCollection,
    Locale,
    Location,
    boundary_points,
    distance,
    event_interval,
    intervals_from_events,
)
from .sampling import SamplerConfig, draw, inverse_cdf
from .stats import (
    TestReport,
    UTestResult,
    chi2_uniformity,
    fisher_combine,
    holm_bonferroni,
    ks_statistic,
    mann_whitney_u,
    mc_u_test,
    median_bandwidth,
    mmd,
)
from .survival import ConfidenceBand, SurvivalCurve, TurnbullInterval, evaluate, fit, greenwood_band, turnbull_intervals

__version__ = "0.1.0"
