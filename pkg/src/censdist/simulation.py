"""Synthetic validation environment: a planar grid of rectangular locales.

Locations are scattered uniformly over a ``width x height`` extent which is
cut into an ``r x c`` grid of equal rectangles (the locales).  Trips pick a
uniform source and a destination with probability proportional to
``1 / (1 + distance)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np

from .errors import InvalidLocaleCountError, InvalidWorldError, InvalidInputError
from .geometry import Locale, Location

MAX_ASPECT = 10


def grid_shape(n_locales: int) -> tuple[int, int]:
    """Balanced factor pair ``(rows, cols)`` with ``rows <= cols``."""
    if n_locales < 1:
        raise InvalidLocaleCountError("n_locales must be >= 1")
    r = math.isqrt(n_locales)
    while n_locales % r:
        r -= 1
    c = n_locales // r
    if c / r > MAX_ASPECT:
        nearby = [k for k in range(max(1, n_locales - 10), n_locales + 11) if _aspect_ok(k)]
        raise InvalidLocaleCountError(
            f"{n_locales} locales only factor as {r}x{c}; nearby valid counts: {nearby}"
        )
    return r, c


def _aspect_ok(k: int) -> bool:
    r = math.isqrt(k)
    while k % r:
        r -= 1
    return (k // r) / r <= MAX_ASPECT


def locale_id(row: int, col: int) -> str:
    return f"r{row}c{col}"


@dataclass(frozen=True, eq=False)
class GridWorld:
    width: float
    height: float
    xy: np.ndarray  # (n_locations, 2)
    rows: int
    cols: int
    seed: int

    @property
    def n_locations(self) -> int:
        return len(self.xy)

    @property
    def locations(self) -> list[Location]:
        return [Location(float(x), float(y)) for x, y in self.xy]

    @property
    def x_edges(self) -> np.ndarray:
        return np.arange(self.cols + 1) * (self.width / self.cols)

    @property
    def y_edges(self) -> np.ndarray:
        return np.arange(self.rows + 1) * (self.height / self.rows)

    def locale_index(self, xy) -> tuple[np.ndarray, np.ndarray]:
        """(row, col) of the rectangle holding each point.

        A point on a shared edge goes to the rectangle with the smaller index.
        """
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        col = np.clip(np.searchsorted(self.x_edges, xy[:, 0], side="left") - 1, 0, self.cols - 1)
        row = np.clip(np.searchsorted(self.y_edges, xy[:, 1], side="left") - 1, 0, self.rows - 1)
        return row, col

    def locale_of(self, index: int) -> str:
        row, col = self.locale_index(self.xy[index])
        return locale_id(int(row[0]), int(col[0]))

    def locales(self) -> dict[str, Locale]:
        xe, ye = self.x_edges, self.y_edges
        return {
            locale_id(r, c): Locale.rectangle(locale_id(r, c), xe[c], ye[r], xe[c + 1], ye[r + 1])
            for r in range(self.rows)
            for c in range(self.cols)
        }


@dataclass(frozen=True)
class SimulatedEvent:
    source: int
    dest: int
    true_distance: float
    origin_locale: str
    dest_locale: str


def build(
    width: float = 1_000_000.0,
    height: float = 1_000_000.0,
    n_locations: int = 1000,
    n_locales: int = 16,
    seed: int = 0,
) -> GridWorld:
    if n_locations < 2:
        raise InvalidInputError("n_locations must be >= 2")
    if not (width > 0 and height > 0):
        raise InvalidInputError("width and height must be positive")
    rows, cols = grid_shape(n_locales)
    rng = np.random.default_rng(seed)
    xy = rng.uniform((0.0, 0.0), (width, height), size=(n_locations, 2))
    return GridWorld(float(width), float(height), xy, rows, cols, int(seed))


def _weights(world: GridWorld, source: int) -> np.ndarray:
    d = np.hypot(*(world.xy - world.xy[source]).T)
    w = 1.0 / (1.0 + d)
    w[source] = 0.0
    return w


def destination_distribution(world: GridWorld, source: int) -> np.ndarray:
    """Inverse-distance destination probabilities from ``source`` (zero at the source)."""
    if not 0 <= source < world.n_locations:
        raise InvalidInputError(f"source index {source} out of range")
    w = _weights(world, source)
    return w / w.sum()


def generate_events(world: GridWorld, n_events: int, seed: int = 0) -> list[SimulatedEvent]:
    if world.n_locations < 2:
        raise InvalidWorldError("need at least two locations to generate trips")
    if n_events < 1:
        raise InvalidInputError("n_events must be >= 1")
    rng = np.random.default_rng(seed)
    rows, cols = world.locale_index(world.xy)
    events = []
    for _ in range(n_events):
        src = int(rng.integers(world.n_locations))
        w = _weights(world, src)
        cdf = np.cumsum(w)
        dst = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        dst = min(dst, world.n_locations - 1)
        dx, dy = world.xy[dst] - world.xy[src]
        events.append(
            SimulatedEvent(
                source=src,
                dest=dst,
                true_distance=float(math.hypot(dx, dy)),
                origin_locale=locale_id(int(rows[src]), int(cols[src])),
                dest_locale=locale_id(int(rows[dst]), int(cols[dst])),
            )
        )
    return events


def regrid(world: GridWorld, n_locales: int) -> GridWorld:
    """Same locations, different locale grid."""
    rows, cols = grid_shape(n_locales)
    return GridWorld(world.width, world.height, world.xy, rows, cols, world.seed)


def relabel(world: GridWorld, events: Sequence[SimulatedEvent]) -> list[SimulatedEvent]:
    """Recompute the locale ids of ``events`` under ``world``'s grid."""
    rows, cols = world.locale_index(world.xy)
    return [
        SimulatedEvent(
            e.source,
            e.dest,
            e.true_distance,
            locale_id(int(rows[e.source]), int(cols[e.source])),
            locale_id(int(rows[e.dest]), int(cols[e.dest])),
        )
        for e in events
    ]


def censor(events: Sequence[SimulatedEvent]) -> list[tuple[str, str, int]]:
    """Censored realization: one ``(origin_locale, dest_locale, 1)`` per event."""
    return [(e.origin_locale, e.dest_locale, 1) for e in events]


def uncensored_distances(events: Sequence[SimulatedEvent]) -> np.ndarray:
    return np.array([e.true_distance for e in events], dtype=float)


def to_spatial_network(events: Sequence[SimulatedEvent], world: GridWorld | None = None) -> nx.Graph:
    """Undirected graph of visited locations; edge ``weight`` counts trips."""
    g = nx.Graph()
    for e in events:
        for node in (e.source, e.dest):
            if node not in g and world is not None:
                g.add_node(node, x=float(world.xy[node, 0]), y=float(world.xy[node, 1]))
            elif node not in g:
                g.add_node(node)
        if g.has_edge(e.source, e.dest):
            g[e.source][e.dest]["weight"] += 1
        else:
            g.add_edge(e.source, e.dest, weight=1)
    return g
