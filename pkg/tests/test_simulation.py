import numpy as np
import pytest

from censdist import simulation
from censdist.errors import InvalidInputError, InvalidLocaleCountError
from censdist.experiments import censored_collection
from censdist.geometry import event_interval
from censdist.simulation import (
    GridWorld,
    build,
    censor,
    destination_distribution,
    generate_events,
    grid_shape,
    to_spatial_network,
    uncensored_distances,
)


def world_from(points, n_locales=1, size=10.0):
    rows, cols = grid_shape(n_locales)
    return GridWorld(size, size, np.asarray(points, dtype=float), rows, cols, 0)


class TestBuild:
    @pytest.mark.parametrize("count,shape", [(16, (4, 4)), (10, (2, 5)), (1, (1, 1)), (50, (5, 10)),
                                             (500, (20, 25)), (5000, (50, 100)), (7, (1, 7))])
    def test_grid_shape(self, count, shape):
        assert grid_shape(count) == shape

    def test_prime_rejected_with_guidance(self):
        with pytest.raises(InvalidLocaleCountError, match="nearby valid counts"):
            grid_shape(101)

    def test_locations_inside(self):
        w = build(n_locations=5000, n_locales=16, seed=3)
        assert np.all((w.xy >= 0) & (w.xy < 1_000_000))

    def test_uniform_quadrants(self):
        w = build(n_locations=100_000, n_locales=4, seed=1)
        row, col = w.locale_index(w.xy)
        frac = np.bincount(row * 2 + col, minlength=4) / w.n_locations
        assert np.all(np.abs(frac - 0.25) <= 0.01)

    def test_partition(self):
        w = build(n_locations=2000, n_locales=12, seed=2)
        locs = w.locales()
        assert len(locs) == 12
        for i in range(0, 2000, 97):
            x, y = w.xy[i]
            inside = [lid for lid, loc in locs.items()
                      if loc.boundary[0].x <= x <= loc.boundary[2].x and loc.boundary[0].y <= y <= loc.boundary[2].y]
            assert inside == [w.locale_of(i)]

    def test_edge_ties_go_low(self):
        w = world_from([[5.0, 5.0], [2.5, 7.5]], n_locales=4)
        assert w.locale_of(0) == "r0c0"
        assert w.locale_of(1) == "r1c0"

    def test_needs_two_locations(self):
        with pytest.raises(InvalidInputError):
            build(n_locations=1)


class TestDestinations:
    def test_equidistant(self):
        w = world_from([[5, 5], [4, 5], [6, 5]])
        assert destination_distribution(w, 0) == pytest.approx([0, 0.5, 0.5])

    def test_inverse_distance(self):
        # distances 1 and 3 from the source -> weights 1/2 and 1/4
        w = world_from([[0, 0], [1, 0], [3, 0]])
        assert destination_distribution(w, 0) == pytest.approx([0, 2 / 3, 1 / 3])

    def test_sums_to_one(self):
        w = build(n_locations=300, seed=4)
        for s in (0, 17, 299):
            p = destination_distribution(w, s)
            assert p[s] == 0
            assert abs(p.sum() - 1) <= 1e-12

    def test_empirical_frequencies(self):
        w = world_from([[0, 0], [1, 0], [3, 0]])
        ev = generate_events(w, 30_000, seed=5)
        from_zero = [e.dest for e in ev if e.source == 0]
        frac = np.mean(np.array(from_zero) == 1)
        assert frac == pytest.approx(2 / 3, abs=0.02)


class TestEvents:
    def test_two_locations(self):
        w = world_from([[1, 1], [4, 5]])
        ev = generate_events(w, 20, seed=1)
        assert {(e.source, e.dest) for e in ev} <= {(0, 1), (1, 0)}
        assert {e.true_distance for e in ev} == {5.0}

    def test_full_scale(self):
        w = build(n_locations=1000, n_locales=16, seed=8)
        ev = generate_events(w, 100, seed=9)
        ids = set(w.locales())
        assert len(ev) == 100
        assert all(e.origin_locale in ids and e.dest_locale in ids and e.source != e.dest for e in ev)

    def test_deterministic(self):
        w = build(n_locations=200, seed=1)
        assert generate_events(w, 50, seed=2) == generate_events(w, 50, seed=2)

    def test_censor_aligned(self):
        w = build(n_locations=200, n_locales=1, seed=1)
        ev = generate_events(w, 40, seed=2)
        cens = censor(ev)
        assert all(c == ("r0c0", "r0c0", 1) for c in cens)
        assert np.array_equal(uncensored_distances(ev), [e.true_distance for e in ev])

    def test_empty(self):
        assert censor([]) == []
        assert uncensored_distances([]).size == 0

    def test_containment(self):
        for seed in range(5):
            w = build(n_locations=500, n_locales=[10, 100, 16, 1, 500][seed], seed=seed)
            ev = generate_events(w, 100, seed=seed + 100)
            locs = w.locales()
            for e in ev:
                iv = event_interval(locs[e.origin_locale], locs[e.dest_locale])
                assert iv.lower <= e.true_distance <= iv.upper

    def test_regrid_relabel(self):
        base = build(n_locations=300, n_locales=1, seed=3)
        ev = generate_events(base, 30, seed=4)
        fine = simulation.regrid(base, 100)
        relabeled = simulation.relabel(fine, ev)
        assert [e.origin_locale for e in relabeled] == [fine.locale_of(e.source) for e in ev]
        assert [e.true_distance for e in relabeled] == [e.true_distance for e in ev]


def test_interval_width_shrinks_with_locales():
    means = {c: [] for c in (10, 100, 1000)}
    for seed in range(10):
        base = build(n_locations=1000, n_locales=1, seed=seed)
        ev = generate_events(base, 100, seed=1000 + seed)
        for c in means:
            w = simulation.regrid(base, c)
            coll = censored_collection(w, simulation.relabel(w, ev))
            width = sum((iv.upper - iv.lower) * iv.weight for iv in coll.intervals) / coll.total_weight
            means[c].append(width)
    avg = [np.mean(means[c]) for c in (10, 100, 1000)]
    assert avg[0] > avg[1] > avg[2]


class TestNetwork:
    def test_sizes(self):
        w = build(n_locations=100, n_locales=16, seed=0)
        ev = generate_events(w, 25, seed=1)
        g = to_spatial_network(ev, w)
        assert g.number_of_nodes() <= 50
        assert g.number_of_edges() <= 25
        assert sum(d["weight"] for *_, d in g.edges(data=True)) == 25
        assert all("x" in g.nodes[n] for n in g)

    def test_repeated_trip(self):
        e = simulation.SimulatedEvent(0, 1, 2.0, "a", "b")
        back = simulation.SimulatedEvent(1, 0, 2.0, "b", "a")
        g = to_spatial_network([e, e, back])
        assert g[0][1]["weight"] == 3

    def test_empty(self):
        assert to_spatial_network([]).number_of_nodes() == 0
