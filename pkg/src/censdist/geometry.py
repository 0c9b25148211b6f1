"""Locations, locales and distance intervals for censored transportation events.

A censored event only tells us which locale (polygon) the trip started and
ended in.  The true distance is bracketed by the smallest and largest
distance between points on the two boundaries, which is what
:func:`event_interval` computes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from shapely.geometry import LinearRing

from .errors import DomainError, InvalidInputError, InvalidLocaleError, UnknownLocaleError

EARTH_RADIUS_KM = 6371.0088
DEFAULT_SAMPLES_PER_EDGE = 16

# rows of the origin point set processed per block when streaming min/max
_BLOCK = 512


@dataclass(frozen=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvalidInputError(f"non-finite coordinates: ({self.x}, {self.y})")


@dataclass(frozen=True)
class Locale:
    """A named simple polygon.  The ring is implicitly closed."""

    id: str
    boundary: tuple[Location, ...]

    def __post_init__(self):
        ring = tuple(
            p if isinstance(p, Location) else Location(float(p[0]), float(p[1]))
            for p in self.boundary
        )
        if len(ring) > 1 and ring[0] == ring[-1]:
            ring = ring[:-1]
        if len(ring) < 3:
            raise InvalidLocaleError(
                f"locale {self.id!r} has {len(ring)} distinct vertices; need at least 3"
            )
        lr = LinearRing([(p.x, p.y) for p in ring])
        if not lr.is_simple:
            raise InvalidLocaleError(f"locale {self.id!r} boundary self-intersects")
        if abs(_shoelace(ring)) == 0.0:
            raise InvalidLocaleError(f"locale {self.id!r} has zero area")
        object.__setattr__(self, "boundary", ring)

    @classmethod
    def rectangle(cls, id: str, x0: float, y0: float, x1: float, y1: float) -> "Locale":
        return cls(id, (Location(x0, y0), Location(x1, y0), Location(x1, y1), Location(x0, y1)))

    def vertices(self) -> np.ndarray:
        return np.array([(p.x, p.y) for p in self.boundary], dtype=float)


def _shoelace(ring):
    s = 0.0
    for a, b in zip(ring, ring[1:] + ring[:1]):
        s += a.x * b.y - b.x * a.y
    return 0.5 * s


@dataclass(frozen=True)
class DistanceMetric:
    """Distance function between locations.

    ``kind`` is ``"euclidean"`` (planar L2) or ``"haversine"`` (great-circle
    distance with ``x`` as longitude and ``y`` as latitude, in degrees).
    """

    kind: str = "euclidean"
    earth_radius: float = EARTH_RADIUS_KM

    def __post_init__(self):
        if self.kind not in ("euclidean", "haversine"):
            raise InvalidInputError(f"unknown metric {self.kind!r}")
        if not self.earth_radius > 0:
            raise InvalidInputError("earth_radius must be positive")

    @classmethod
    def euclidean(cls) -> "DistanceMetric":
        return cls("euclidean")

    @classmethod
    def haversine(cls, earth_radius: float = EARTH_RADIUS_KM) -> "DistanceMetric":
        return cls("haversine", earth_radius)

    def check(self, xy: np.ndarray) -> None:
        """Raise :class:`DomainError` if any coordinate is invalid for this metric."""
        if not np.all(np.isfinite(xy)):
            raise DomainError("non-finite coordinates")
        if self.kind == "haversine":
            lon, lat = xy[..., 0], xy[..., 1]
            if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
                raise DomainError("longitude must lie in [-180, 180] and latitude in [-90, 90]")

    def pairwise(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Distance matrix between point arrays of shape (n, 2) and (m, 2)."""
        a = np.asarray(a, dtype=float).reshape(-1, 2)
        b = np.asarray(b, dtype=float).reshape(-1, 2)
        if self.kind == "euclidean":
            return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
        lon1, lat1 = np.radians(a[:, None, 0]), np.radians(a[:, None, 1])
        lon2, lat2 = np.radians(b[None, :, 0]), np.radians(b[None, :, 1])
        h = (
            np.sin((lat2 - lat1) / 2) ** 2
            + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
        )
        return 2 * self.earth_radius * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


@dataclass(frozen=True)
class DistanceInterval:
    """Censored observation: the true distance lies in ``[lower, upper]``."""

    lower: float
    upper: float
    weight: float = 1

    def __post_init__(self):
        lo, hi, w = self.lower, self.upper, self.weight
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InvalidInputError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if lo < 0 or lo > hi:
            raise InvalidInputError(f"invalid interval [{lo}, {hi}]; need 0 <= lower <= upper")
        if not (w > 0 and math.isfinite(w)):
            raise InvalidInputError(f"interval weight must be positive, got {w}")


def boundary_points(locale: Locale, samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE) -> list[Location]:
    """Vertices of ``locale`` followed by ``samples_per_edge - 1`` evenly spaced
    interior points on each edge, edges taken in ring order."""
    return [Location(float(x), float(y)) for x, y in _boundary_array(locale, samples_per_edge)]


def _boundary_array(locale: Locale, samples_per_edge: int) -> np.ndarray:
    if int(samples_per_edge) != samples_per_edge or samples_per_edge < 1:
        raise InvalidInputError("samples_per_edge must be a positive integer")
    v = locale.vertices()
    if samples_per_edge == 1:
        return v
    w = np.roll(v, -1, axis=0)
    t = np.arange(1, samples_per_edge) / samples_per_edge
    inner = v[:, None, :] + t[None, :, None] * (w - v)[:, None, :]
    return np.vstack([v, inner.reshape(-1, 2)])


def distance(metric: DistanceMetric, a: Location, b: Location) -> float:
    pts = np.array([[a.x, a.y], [b.x, b.y]], dtype=float)
    metric.check(pts)
    return float(metric.pairwise(pts[:1], pts[1:])[0, 0])


def _minmax(metric: DistanceMetric, a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    lo, hi = math.inf, -math.inf
    for start in range(0, len(a), _BLOCK):
        d = metric.pairwise(a[start:start + _BLOCK], b)
        lo = min(lo, float(d.min()))
        hi = max(hi, float(d.max()))
    return lo, hi


def event_interval(
    origin: Locale,
    dest: Locale,
    metric: DistanceMetric | None = None,
    samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE,
    weight: float = 1,
) -> DistanceInterval:
    """Distance interval bracketing any trip from ``origin`` to ``dest``.

    For distinct locales this is the min and max of the boundary-point distance
    matrix.  A trip that starts and ends in the same locale can be arbitrarily
    short, so its lower bound is 0 and its upper bound is the locale's
    discretized diameter.
    """
    metric = metric or DistanceMetric()
    a = _boundary_array(origin, samples_per_edge)
    metric.check(a)
    if origin.id == dest.id:
        _, hi = _minmax(metric, a, a)
        return DistanceInterval(0.0, hi, weight)
    b = _boundary_array(dest, samples_per_edge)
    metric.check(b)
    lo, hi = _minmax(metric, a, b)
    return DistanceInterval(lo, hi, weight)


def intervals_from_events(
    events: Iterable[tuple],
    locales: Mapping[str, Locale],
    metric: DistanceMetric | None = None,
    samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE,
) -> list[DistanceInterval]:
    """Convert ``(origin_id, dest_id[, count])`` records into weighted intervals.

    Counts for repeated (origin, dest) pairs are summed; output follows the
    order in which each pair first appears.
    """
    metric = metric or DistanceMetric()
    counts: dict[tuple[str, str], float] = {}
    for ev in events:
        o, d = ev[0], ev[1]
        c = ev[2] if len(ev) > 2 else 1
        for key in (o, d):
            if key not in locales:
                raise UnknownLocaleError(key)
        counts[(o, d)] = counts.get((o, d), 0) + c

    cache: dict[tuple[str, str], tuple[float, float]] = {}
    out = []
    for (o, d), c in counts.items():
        bounds = cache.get((o, d)) or cache.get((d, o))
        if bounds is None:
            iv = event_interval(locales[o], locales[d], metric, samples_per_edge)
            bounds = cache[(o, d)] = (iv.lower, iv.upper)
        out.append(DistanceInterval(bounds[0], bounds[1], c))
    return out


@dataclass
class EventCollection:
    """Censored events of one type, reduced to weighted distance intervals.

    ``half_open`` marks intervals that exclude one endpoint (e.g. binned
    data such as ``2 <= d < 4``), so intervals that merely touch do not
    overlap when the survival curve is fitted.
    """

    intervals: list[DistanceInterval] = field(default_factory=list)
    half_open: bool = False

    @classmethod
    def from_events(
        cls,
        events: Iterable[tuple],
        locales: Mapping[str, Locale],
        metric: DistanceMetric | None = None,
        samples_per_edge: int = DEFAULT_SAMPLES_PER_EDGE,
    ) -> "EventCollection":
        return cls(intervals_from_events(events, locales, metric, samples_per_edge))

    def __len__(self):
        return len(self.intervals)

    @property
    def total_weight(self) -> float:
        return float(sum(iv.weight for iv in self.intervals))


def as_intervals(data: "EventCollection | Sequence[DistanceInterval]") -> tuple[list[DistanceInterval], bool]:
    if isinstance(data, EventCollection):
        return list(data.intervals), data.half_open
    return list(data), False
