"""Readers and writers for the package's file formats.

All writers produce byte-identical output for identical inputs: floats are
written with ``repr`` and nothing time- or host-dependent is recorded.
"""

from __future__ import annotations

import csv
import json
import sys
import warnings
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import InvalidInputError
from .geometry import DistanceInterval, Locale, Location
from .survival import ConfidenceBand, SurvivalCurve, TurnbullInterval, curve_from_masses


class InputFormatError(InvalidInputError):
    """A file does not match its expected format."""


@contextmanager
def _open_w(path):
    """Text handle for writing; ``None`` or ``"-"`` means standard output."""
    if path is None or str(path) == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _f(x) -> str:
    return repr(float(x))


def _data_lines(path):
    """Non-comment lines of a text file plus the parsed ``# key=value`` comments."""
    meta: dict[str, str] = {}
    lines = []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                for part in line[1:].split(","):
                    if "=" in part:
                        k, v = part.split("=", 1)
                        meta[k.strip()] = v.strip()
            elif line.strip():
                lines.append(line)
    return lines, meta


def _rows(path, required: Sequence[str], optional: Sequence[str] = ()):
    lines, meta = _data_lines(path)
    reader = csv.DictReader(lines)
    fields = [f.strip() for f in (reader.fieldnames or [])]
    missing = [c for c in required if c not in fields]
    if missing:
        raise InputFormatError(f"{path}: missing column(s) {missing}; found {fields}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        row = {k.strip(): (v.strip() if isinstance(v, str) else v) for k, v in row.items() if k}
        rows.append((lineno, row))
    return rows, meta


def _num(path, lineno, row, key, cast=float, default=None):
    val = row.get(key)
    if val in (None, ""):
        if default is not None:
            return default
        raise InputFormatError(f"{path}:{lineno}: empty {key!r}")
    try:
        return cast(val)
    except ValueError:
        raise InputFormatError(f"{path}:{lineno}: bad {key!r} value {val!r}") from None


# --- locales ------------------------------------------------------------------

def read_locales_geojson(path) -> dict[str, Locale]:
    """Polygon features with a string ``id`` property; holes are dropped."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"{path}: {exc}") from None
    if doc.get("type") != "FeatureCollection":
        raise InputFormatError(f"{path}: expected a GeoJSON FeatureCollection")
    out = {}
    for k, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        lid = props.get("id")
        if not isinstance(lid, str):
            raise InputFormatError(f"{path}: feature {k} lacks a string 'id' property")
        if geom.get("type") != "Polygon":
            raise InputFormatError(f"{path}: feature {lid!r} is {geom.get('type')}, not Polygon")
        rings = geom.get("coordinates") or []
        if not rings:
            raise InputFormatError(f"{path}: feature {lid!r} has no coordinates")
        if len(rings) > 1:
            warnings.warn(f"locale {lid!r}: ignoring {len(rings) - 1} interior ring(s)", stacklevel=2)
        if lid in out:
            raise InputFormatError(f"{path}: duplicate locale id {lid!r}")
        out[lid] = Locale(lid, tuple(Location(float(x), float(y)) for x, y, *_ in rings[0]))
    return out


def write_locales_geojson(locales: Mapping[str, Locale], path) -> None:
    features = []
    for lid, loc in locales.items():
        ring = [[float(p.x), float(p.y)] for p in loc.boundary]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "properties": {"id": lid},
                "geometry": {"type": "Polygon", "coordinates": [ring]},
            }
        )
    doc = {"type": "FeatureCollection", "features": features}
    with _open_w(path) as fh:
        fh.write(json.dumps(doc, indent=1) + "\n")


# --- events and intervals -------------------------------------------------------

def read_events_csv(path) -> list[tuple[str, str, int]]:
    rows, _ = _rows(path, ["origin_id", "dest_id"], ["count"])
    out = []
    for lineno, row in rows:
        count = _num(path, lineno, row, "count", int, default=1)
        if count < 1:
            raise InputFormatError(f"{path}:{lineno}: count must be >= 1")
        out.append((row["origin_id"], row["dest_id"], count))
    return out


def write_events_csv(events: Iterable[tuple], path) -> None:
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["origin_id", "dest_id", "count"])
        for ev in events:
            w.writerow([ev[0], ev[1], ev[2] if len(ev) > 2 else 1])


def read_intervals_csv(path) -> list[DistanceInterval]:
    rows, _ = _rows(path, ["lower", "upper"], ["count"])
    out = []
    for lineno, row in rows:
        try:
            out.append(
                DistanceInterval(
                    _num(path, lineno, row, "lower"),
                    _num(path, lineno, row, "upper"),
                    _num(path, lineno, row, "count", default=1.0),
                )
            )
        except InputFormatError:
            raise
        except InvalidInputError as exc:
            raise InputFormatError(f"{path}:{lineno}: {exc}") from None
    if not out:
        raise InputFormatError(f"{path}: no intervals")
    return out


def write_intervals_csv(intervals: Iterable[DistanceInterval], path) -> None:
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lower", "upper", "count"])
        for iv in intervals:
            c = iv.weight
            w.writerow([_f(iv.lower), _f(iv.upper), int(c) if float(c).is_integer() else _f(c)])


# --- curves and samples -----------------------------------------------------------

def write_curve_csv(curve: SurvivalCurve, band: ConfidenceBand, path) -> None:
    with _open_w(path) as fh:
        fh.write(f"# alpha={band.alpha!r}, n_total={_f(curve.n_total)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "mass", "S", "S_lower", "S_upper"])
        for row in zip(curve.eval_points, curve.mass, curve.S, band.S_lower, band.S_upper):
            w.writerow([_f(v) for v in row])


def read_curve_csv(path) -> SurvivalCurve:
    """Rebuild a step curve from a curve CSV.

    Only evaluation points survive serialization, so the support is
    represented by degenerate intervals at those points.
    """
    rows, meta = _rows(path, ["d", "mass"])
    if not rows:
        raise InputFormatError(f"{path}: empty curve")
    d = [_num(path, ln, r, "d") for ln, r in rows]
    mass = [_num(path, ln, r, "mass") for ln, r in rows]
    if any(b < a for a, b in zip(d, d[1:])):
        raise InputFormatError(f"{path}: 'd' column must be sorted")
    total = float(meta.get("n_total", 1.0))
    return curve_from_masses([TurnbullInterval(x, x) for x in d], mass, total)


def write_samples_csv(samples: Sequence[float], path, seed: int, alpha: float) -> None:
    with _open_w(path) as fh:
        fh.write(f"# seed={int(seed)}, alpha={alpha!r}\n")
        fh.write("distance\n")
        for s in samples:
            fh.write(_f(s) + "\n")


def read_samples_csv(path) -> np.ndarray:
    rows, _ = _rows(path, ["distance"])
    vals = np.array([_num(path, ln, r, "distance") for ln, r in rows], dtype=float)
    if vals.size == 0:
        raise InputFormatError(f"{path}: no samples")
    return vals


# --- reports, simulation exports -------------------------------------------------

def write_json(obj, path) -> None:
    with _open_w(path) as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_truth_csv(distances: Sequence[float], path) -> None:
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["event_index", "true_distance"])
        for i, d in enumerate(distances):
            w.writerow([i, _f(d)])


def network_json(g: nx.Graph) -> dict:
    return nx.node_link_data(g, edges="links")


def write_rows_csv(header: Sequence[str], rows: Iterable[Sequence], path) -> None:
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_bins_csv(path):
    """Distance bins with header ``lower_km,upper_km,invited,attended``.

    An empty or ``inf`` upper bound marks an open-ended bin.
    """
    from .experiments import DistanceBin

    rows, _ = _rows(path, ["lower_km", "upper_km", "invited", "attended"])
    bins = []
    for ln, r in rows:
        upper = r.get("upper_km") or "inf"
        try:
            upper = float(upper)
        except ValueError:
            raise InputFormatError(f"{path}:{ln}: bad 'upper_km' value {upper!r}") from None
        bins.append(
            DistanceBin(
                _num(path, ln, r, "lower_km"),
                upper,
                _num(path, ln, r, "invited", int),
                _num(path, ln, r, "attended", int),
            )
        )
    if not bins:
        raise InputFormatError(f"{path}: no bins")
    return bins


def write_bins_csv(bins, path) -> None:
    with _open_w(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lower_km", "upper_km", "invited", "attended"])
        for b in bins:
            upper = "inf" if b.upper_km == float("inf") else _f(b.upper_km)
            w.writerow([_f(b.lower_km), upper, b.invited, b.attended])
