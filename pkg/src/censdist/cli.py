"""Command-line interface: ``censdist <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 EM convergence failure,
4 degenerate statistic.
"""

from __future__ import annotations

import argparse
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import experiments, simulation
from . import io as cio
from .errors import ConvergenceError, DegenerateStatisticError, InvalidInputError, UnknownLocaleError
from .geometry import DEFAULT_SAMPLES_PER_EDGE, DistanceMetric, EventCollection
from .sampling import SamplerConfig, draw
from .stats import A_GREATER, B_GREATER, ks_statistic, mc_u_test, median_bandwidth, mmd
from .survival import fit, greenwood_band

SEED_ENV = "CENSDIST_SEED"

EXIT_INPUT = 2
EXIT_CONVERGENCE = 3
EXIT_DEGENERATE = 4


def _err(msg: str) -> None:
    print(f"censdist: {msg}", file=sys.stderr)


def resolve_seed(seed: int | None) -> int:
    """Explicit seed, else ``$CENSDIST_SEED``, else a fresh one (reported on stderr)."""
    if seed is not None:
        return seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise InvalidInputError(f"{SEED_ENV}={env!r} is not an integer") from None
    seed = secrets.randbits(63)
    _err(f"seed={seed}")
    return seed


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _metric(args) -> DistanceMetric:
    if args.metric == "haversine":
        return DistanceMetric.haversine(args.earth_radius)
    return DistanceMetric.euclidean()


def _add_geometry_opts(p):
    p.add_argument("--locales", help="GeoJSON FeatureCollection of Polygon locales with an 'id' property")
    p.add_argument("--metric", choices=("euclidean", "haversine"), default="euclidean")
    p.add_argument("--earth-radius", type=float, default=6371.0088, help="haversine radius (km)")
    p.add_argument("--samples-per-edge", type=int, default=DEFAULT_SAMPLES_PER_EDGE)


def _add_source(p, suffix=""):
    opt = f"-{suffix}" if suffix else ""
    dest = f"_{suffix}" if suffix else ""
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument(f"--events{opt}", dest=f"events{dest}",
                   help="event CSV origin_id,dest_id[,count] (needs --locales)")
    g.add_argument(f"--intervals{opt}", dest=f"intervals{dest}", help="interval CSV lower,upper[,count]")


def _collection(args, events_path, intervals_path) -> EventCollection:
    if intervals_path:
        return EventCollection(cio.read_intervals_csv(intervals_path))
    if not args.locales:
        raise InvalidInputError("--events requires --locales")
    locales = cio.read_locales_geojson(args.locales)
    events = cio.read_events_csv(events_path)
    if not events:
        raise InvalidInputError(f"{events_path}: no events")
    return EventCollection.from_events(events, locales, _metric(args), args.samples_per_edge)


# --- subcommands ------------------------------------------------------------------

def cmd_estimate(args) -> int:
    coll = _collection(args, args.events, args.intervals)
    curve = fit(coll.intervals, tol=args.tol, max_iter=args.max_iter)
    band = greenwood_band(curve, args.alpha)
    cio.write_curve_csv(curve, band, args.out)
    _err(f"support={len(curve.support)} iterations={curve.iterations}")
    return 0


def cmd_sample(args) -> int:
    seed = resolve_seed(args.seed)
    coll = _collection(args, args.events, args.intervals)
    curve = fit(coll.intervals, tol=args.tol, max_iter=args.max_iter)
    band = greenwood_band(curve, args.alpha)
    cfg = SamplerConfig(args.alpha, seed, args.interpolation, not args.no_perturb)
    cio.write_samples_csv(draw(curve, band, args.n, cfg), args.out, seed, args.alpha)
    return 0


def cmd_mcutest(args) -> int:
    seed = resolve_seed(args.seed)
    e_a = _collection(args, args.events_a, args.intervals_a)
    e_b = _collection(args, args.events_b, args.intervals_b)
    cfg = SamplerConfig(args.alpha, seed, args.interpolation)
    report = mc_u_test(e_a, e_b, args.m, args.n, args.trials, cfg, args.direction, args.threads)
    if args.out:
        cio.write_json(report.to_dict(), args.out)
    print(f"p={report.p_value!r}")
    return 0


def cmd_ks(args) -> int:
    print(f"{ks_statistic(cio.read_curve_csv(args.curve_a), cio.read_curve_csv(args.curve_b)):.6f}")
    return 0


def cmd_mmd(args) -> int:
    a = cio.read_samples_csv(args.samples_a)
    b = cio.read_samples_csv(args.samples_b)
    if args.sigma == "median":
        sigma = median_bandwidth(a, b)
        _err(f"sigma={sigma!r}")
    else:
        try:
            sigma = float(args.sigma)
        except ValueError:
            raise InvalidInputError(f"--sigma must be 'median' or a number, got {args.sigma!r}") from None
    print(f"{mmd(a, b, sigma):.6f}")
    return 0


def cmd_simulate(args) -> int:
    seed = resolve_seed(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = simulation.build(args.width, args.height, args.locations, args.locales,
                             experiments.derive_seed(seed, 0))
    events = simulation.generate_events(world, args.events, experiments.derive_seed(seed, 1))
    cio.write_events_csv(simulation.censor(events), out / "events.csv")
    cio.write_truth_csv(simulation.uncensored_distances(events), out / "truth.csv")
    cio.write_locales_geojson(world.locales(), out / "locales.geojson")
    cio.write_json(cio.network_json(simulation.to_spatial_network(events, world)), out / "network.json")
    cio.write_rows_csv(["index", "x", "y", "locale_id"],
                       ([i, float(x), float(y), world.locale_of(i)] for i, (x, y) in enumerate(world.xy)),
                       out / "locations.csv")
    _err(f"wrote {len(events)} events over {world.rows}x{world.cols} locales to {out}")
    return 0


def cmd_converge(args) -> int:
    seed = resolve_seed(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = experiments.convergence_experiment(
        args.locale_counts, args.seeds, args.locations, args.events, args.samples,
        args.width, args.height, seed, args.alpha, args.samples_per_edge,
    )
    keys = ["locale_count", "trial", "ks", "mmd", "sigma", "support_size"]
    cio.write_rows_csv(keys, ([r[k] for k in keys] for r in rows), out / "convergence.csv")
    summary = experiments.summarize_convergence(rows)
    skeys = ["locale_count", "ks_mean", "ks_std", "mmd_mean", "mmd_std", "n"]
    cio.write_rows_csv(skeys, ([r[k] for k in skeys] for r in summary), out / "convergence_summary.csv")
    for r in summary:
        print(f"{r['locale_count']}\tks={r['ks_mean']:.6f}\tmmd={r['mmd_mean']:.6f}")
    return 0


def cmd_calibrate(args) -> int:
    seed = resolve_seed(args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pvals = experiments.calibration_experiment(
        args.locale_counts, args.n_tests, seed, args.threads,
        n_locations=args.locations, n_events=args.events, m=args.m, n=args.n,
        trials=args.trials, width=args.width, height=args.height,
        samples_per_edge=args.samples_per_edge,
    )
    write_calibration(pvals, out)
    return 0


def write_calibration(pvals, out: Path) -> None:
    """Write raw p-values, rejection rates, a level grid and the uniformity table."""
    cio.write_rows_csv(
        ["locale_count", "test_index", "p_value"],
        ([c, i, float(p)] for c, ps in pvals.items() for i, p in enumerate(ps)),
        out / "calibration_pvalues.csv",
    )
    rejections, table = experiments.summarize_calibration(pvals)
    cio.write_rows_csv(["locale_count", "level", "rate", "n_tests"],
                       ([r["locale_count"], r["level"], r["rate"], r["n_tests"]] for r in rejections),
                       out / "rejection_rates.csv")
    levels = np.round(np.arange(1, 101) / 100, 2)
    cio.write_rows_csv(
        ["locale_count", "level", "rate"],
        ([c, float(lv), float(np.mean(np.asarray(ps) <= lv))] for c, ps in pvals.items() for lv in levels),
        out / "rejection_curve.csv",
    )
    cio.write_rows_csv(["locale_count", "chi2", "p_value", "significant"],
                       ([r["locale_count"], r["chi2"], r["p_value"], r["significant"]] for r in table),
                       out / "uniformity.csv")
    for r in table:
        rate = next(x["rate"] for x in rejections if x["locale_count"] == r["locale_count"] and x["level"] == 0.05)
        print(f"{r['locale_count']}\treject@0.05={rate:.4f}\tchi2={r['chi2']:.4f}\t"
              f"p={r['p_value']:.4f}\tsignificant={r['significant']}")


def cmd_maheswaran(args) -> int:
    seed = resolve_seed(args.seed)
    bins = cio.read_bins_csv(args.bins) if args.bins else experiments.SCREENING_BINS
    report = experiments.screening_reanalysis(
        bins, args.group_a, args.group_b, args.m, args.n, args.trials, seed,
        args.upper_bound_km, args.closed_bins, args.threads,
    )
    if args.out:
        cio.write_json(report.to_dict(), args.out)
    print(f"p={report.p_value!r}")
    return 0


# --- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="censdist",
        description="Estimate, sample and compare distance distributions from locale-censored trips.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    threads = max(1, os.cpu_count() or 1)

    def common(p, seed=False, alpha=True):
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help=f"RNG seed (default: ${SEED_ENV}, else random and reported)")
        if alpha:
            p.add_argument("--alpha", type=float, default=0.05)

    def fit_opts(p):
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--max-iter", type=int, default=100_000)

    p = sub.add_parser("estimate", help="fit the survival curve and write it with confidence bands")
    _add_source(p)
    _add_geometry_opts(p)
    common(p)
    fit_opts(p)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sample", help="draw distances from the fitted curve")
    _add_source(p)
    _add_geometry_opts(p)
    common(p, seed=True)
    fit_opts(p)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--interpolation", choices=("linear", "step"), default="linear")
    p.add_argument("--no-perturb", action="store_true", help="skip the Gaussian uncertainty term")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("mcutest", help="Monte Carlo U-test: do A's distances dominate B's?")
    _add_source(p, "a")
    _add_source(p, "b")
    _add_geometry_opts(p)
    common(p, seed=True)
    p.add_argument("-m", type=int, default=100, help="samples from A per trial")
    p.add_argument("-n", type=int, default=100, help="samples from B per trial")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--direction", choices=(A_GREATER, B_GREATER), default=A_GREATER,
                   help="'greater': A dominates B; 'less': B dominates A")
    p.add_argument("--interpolation", choices=("linear", "step"), default="linear")
    p.add_argument("--threads", type=int, default=threads)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_mcutest)

    p = sub.add_parser("ks", help="KS statistic between two curve CSVs")
    p.add_argument("curve_a")
    p.add_argument("curve_b")
    p.set_defaults(func=cmd_ks)

    p = sub.add_parser("mmd", help="RBF-kernel MMD between two sample CSVs")
    p.add_argument("samples_a")
    p.add_argument("samples_b")
    p.add_argument("--sigma", default="median", help="bandwidth value or 'median'")
    p.set_defaults(func=cmd_mmd)

    def world_opts(p, locations, events):
        p.add_argument("--locations", type=int, default=locations)
        p.add_argument("--events", type=int, default=events)
        p.add_argument("--width", type=float, default=1_000_000.0)
        p.add_argument("--height", type=float, default=1_000_000.0)

    p = sub.add_parser("simulate", help="generate a synthetic grid world and trips")
    world_opts(p, 100, 25)
    p.add_argument("--locales", type=int, default=16)
    common(p, seed=True, alpha=False)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("converge", help="KS/MMD of the reconstruction versus locale count")
    world_opts(p, 1000, 100)
    p.add_argument("--locale-counts", type=_int_list, default=list(experiments.DEFAULT_LOCALE_COUNTS))
    p.add_argument("--seeds", type=int, default=10, help="number of repetitions")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--samples-per-edge", type=int, default=DEFAULT_SAMPLES_PER_EDGE)
    common(p, seed=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("calibrate", help="null-hypothesis calibration of the Monte Carlo U-test")
    world_opts(p, 1000, 1000)
    p.add_argument("--locale-counts", type=_int_list, default=[10, 50, 100, 500, 1000, 2000])
    p.add_argument("--n-tests", type=int, default=1000)
    p.add_argument("-m", type=int, default=100)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--samples-per-edge", type=int, default=DEFAULT_SAMPLES_PER_EDGE)
    p.add_argument("--threads", type=int, default=threads)
    common(p, seed=True, alpha=False)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("maheswaran", help="re-analyse binned screening-attendance distances")
    p.add_argument("--bins", help="CSV lower_km,upper_km,invited,attended (default: built-in table)")
    p.add_argument("--upper-bound-km", type=float, default=100.0)
    p.add_argument("--group-a", choices=experiments.GROUPS, default="invited")
    p.add_argument("--group-b", choices=experiments.GROUPS, default="attended")
    p.add_argument("--closed-bins", action="store_true",
                   help="treat bins as closed so touching bins share their endpoint")
    p.add_argument("-m", type=int, default=100)
    p.add_argument("-n", type=int, default=100)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--threads", type=int, default=threads)
    common(p, seed=True, alpha=False)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_maheswaran)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConvergenceError as exc:
        _err(str(exc))
        return EXIT_CONVERGENCE
    except DegenerateStatisticError as exc:
        _err(str(exc))
        return EXIT_DEGENERATE
    except (InvalidInputError, UnknownLocaleError, OSError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
