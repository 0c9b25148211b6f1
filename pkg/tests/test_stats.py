import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from censdist.errors import DegenerateStatisticError, InvalidInputError
from censdist.geometry import DistanceInterval, EventCollection
from censdist.sampling import SamplerConfig
from censdist.stats import (
    chi2_sf,
    chi2_uniformity,
    fisher_combine,
    holm_bonferroni,
    ks_statistic,
    mann_whitney_u,
    mc_u_test,
    median_bandwidth,
    mmd,
)
from censdist.survival import fit

from conftest import exact


def pair_u(a, b):
    """Direct pair count: #(a_i > b_j) + 0.5 #(a_i == b_j)."""
    return sum((x > y) + 0.5 * (x == y) for x in a for y in b)


def enumeration_p(a, b):
    """P(U >= u_obs) by enumerating every assignment of the pooled values to A."""
    pooled = list(a) + list(b)
    m = len(a)
    u_obs = pair_u(a, b)
    hits = total = 0
    for idx in itertools.combinations(range(len(pooled)), m):
        aa = [pooled[i] for i in idx]
        bb = [pooled[i] for i in range(len(pooled)) if i not in idx]
        total += 1
        hits += pair_u(aa, bb) >= u_obs
    return hits / total


def chi2_sf_even(x, dof):
    """Closed-form chi-squared tail for even degrees of freedom."""
    k = dof // 2
    return math.exp(-x / 2) * sum((x / 2) ** j / math.factorial(j) for j in range(k))


class TestMannWhitney:
    def test_all_below(self):
        r = mann_whitney_u([1, 2], [3, 4])
        assert (r.u, r.p, r.method) == (0.0, 1.0, "exact")

    def test_all_above(self):
        r = mann_whitney_u([3, 4], [1, 2])
        assert r.u == 4.0
        assert r.p == pytest.approx(1 / 6)
        assert r.p == enumeration_p([3, 4], [1, 2])

    def test_identical_samples(self):
        s = list(range(1, 51))
        r = mann_whitney_u(s, s)
        assert r.u == 1250.0
        assert r.p == pytest.approx(0.5, abs=0.01)

    @pytest.mark.parametrize("m,n", [(m, n) for m in range(1, 6) for n in range(1, 6)])
    def test_exact_equals_enumeration(self, m, n):
        N = m + n
        for idx in itertools.combinations(range(1, N + 1), m):
            a = list(idx)
            b = [v for v in range(1, N + 1) if v not in idx]
            r = mann_whitney_u(a, b)
            assert r.method == "exact"
            assert r.u == pair_u(a, b)
            assert r.p == enumeration_p(a, b)

    def test_normal_close_to_exact_m8(self):
        worst = 0.0
        vals = range(1, 17)
        for idx in itertools.combinations(vals, 8):
            a = list(idx)
            b = [v for v in vals if v not in idx]
            ex = mann_whitney_u(a, b, method="exact").p
            ap = mann_whitney_u(a, b, method="normal").p
            worst = max(worst, abs(ex - ap))
        assert worst <= 0.05

    def test_less_alternative(self):
        a, b = [1, 2], [3, 4]
        assert mann_whitney_u(a, b, "less").p == pytest.approx(1 / 6)

    def test_ties_use_normal(self):
        r = mann_whitney_u([1, 1, 2], [1, 2, 2])
        assert r.method == "normal-approximation"
        assert r.u == pair_u([1, 1, 2], [1, 2, 2])

    def test_all_tied(self):
        assert mann_whitney_u([3, 3], [3, 3, 3]).p == 1.0

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            mann_whitney_u([], [1])

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=15, unique=True),
           st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=15, unique=True))
    def test_complement(self, a, b):
        assume(not set(a) & set(b))
        m, n = len(a), len(b)
        assert mann_whitney_u(a, b).u + mann_whitney_u(b, a).u == m * n
        assert 0 < mann_whitney_u(a, b).p <= 1


class TestFisher:
    def test_single(self):
        T, p = fisher_combine([0.05])
        assert T == pytest.approx(-2 * math.log(0.05), rel=1e-14)
        assert T == pytest.approx(5.99146, abs=1e-5)
        assert p == pytest.approx(0.05, abs=1e-12)

    def test_all_one(self):
        assert fisher_combine([1, 1, 1]) == (0.0, 1.0)

    def test_two(self):
        T, p = fisher_combine([0.05, 0.05])
        assert T == pytest.approx(11.98293, abs=1e-5)
        assert p == pytest.approx((1 + T / 2) * 0.0025, rel=1e-9)
        assert p == pytest.approx(0.0174787, abs=1e-6)

    def test_zero_floored(self):
        T, _ = fisher_combine([0.0, 0.5])
        assert T == pytest.approx(-2 * (math.log(1e-300) + math.log(0.5)))

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            fisher_combine([])

    @given(st.lists(st.floats(1e-10, 1.0), min_size=1, max_size=30), st.data())
    def test_monotone(self, ps, data):
        i = data.draw(st.integers(0, len(ps) - 1))
        assume(ps[i] > 2e-10)
        smaller = list(ps)
        smaller[i] = ps[i] / 2
        T0, p0 = fisher_combine(ps)
        T1, p1 = fisher_combine(smaller)
        assert T1 > T0
        assert p1 <= p0
        assert p1 < p0 or p0 < 1e-300 or p1 == 0

    @given(st.floats(0, 400), st.integers(1, 60))
    def test_chi2_tail_matches_closed_form(self, x, k):
        expected = chi2_sf_even(x, 2 * k)
        assert chi2_sf(x, 2 * k) == pytest.approx(expected, rel=1e-10, abs=1e-300)


class TestMcUTest:
    def test_separated(self):
        a = EventCollection([DistanceInterval(10, 11, 5)])
        b = EventCollection([DistanceInterval(1, 2, 5)])
        r = mc_u_test(a, b, 50, 50, 10, SamplerConfig(seed=1))
        assert r.p_value < 1e-6
        assert len(r.per_trial_p) == 10

    def test_direction_flag(self):
        a = [DistanceInterval(10, 11)]
        b = [DistanceInterval(1, 2)]
        r = mc_u_test(a, b, 50, 50, 10, SamplerConfig(seed=1), alternative="less")
        assert r.p_value > 0.99

    def test_single_trial_identity(self):
        coll = [DistanceInterval(0, 3), DistanceInterval(1, 5), DistanceInterval(4, 8)]
        r = mc_u_test(coll, coll, 30, 30, 1, SamplerConfig(seed=7))
        assert r.p_value == pytest.approx(r.per_trial_p[0], abs=1e-12)

    def test_report_consistency(self):
        coll = [DistanceInterval(0, 3), DistanceInterval(1, 5)]
        r = mc_u_test(coll, coll, 20, 25, 12, SamplerConfig(seed=3))
        assert r.statistic == pytest.approx(-2 * sum(math.log(p) for p in r.per_trial_p), abs=1e-9)
        assert r.p_value == pytest.approx(chi2_sf_even(r.statistic, 24), rel=1e-10)

    def test_thread_invariance(self):
        coll = [DistanceInterval(0, 3), DistanceInterval(1, 5), DistanceInterval(2, 9)]
        cfg = SamplerConfig(seed=99)
        r1 = mc_u_test(coll, coll, 40, 40, 16, cfg, threads=1)
        r8 = mc_u_test(coll, coll, 40, 40, 16, cfg, threads=8)
        assert r1 == r8

    def test_null_rejection_rate(self):
        rng = np.random.default_rng(0)
        lo = rng.uniform(0, 50, 80)
        coll = EventCollection([DistanceInterval(a, a + b) for a, b in zip(lo, rng.uniform(1, 20, 80))])
        ps = [mc_u_test(coll, coll, 100, 100, 20, SamplerConfig(seed=s)).p_value for s in range(200)]
        rate = np.mean(np.array(ps) <= 0.05)
        assert 0.02 <= rate <= 0.10


class TestKs:
    def test_identical(self):
        c = fit(exact(1, 2, 3))
        assert ks_statistic(c, c) == 0.0

    def test_disjoint_points(self):
        assert ks_statistic(fit(exact(1)), fit(exact(2))) == 1.0

    def test_half_gap(self):
        assert ks_statistic(fit(exact(1, 2)), fit(exact(1, 3))) == pytest.approx(0.5)

    @settings(max_examples=40, deadline=None)
    @given(*[st.lists(st.integers(0, 20), min_size=1, max_size=8)] * 3)
    def test_metric(self, xa, xb, xc):
        a, b, c = fit(exact(*xa)), fit(exact(*xb)), fit(exact(*xc))
        assert ks_statistic(a, b) == ks_statistic(b, a)
        assert ks_statistic(a, c) <= ks_statistic(a, b) + ks_statistic(b, c) + 1e-12

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 20), min_size=1, max_size=8), st.lists(st.integers(0, 20), min_size=1, max_size=8))
    def test_matches_dense_grid(self, xa, xb):
        a, b = fit(exact(*xa)), fit(exact(*xb))
        grid = np.arange(-1, 22, 0.25)
        fa = np.array([np.mean(np.array(xa) <= g) for g in grid])
        fb = np.array([np.mean(np.array(xb) <= g) for g in grid])
        assert ks_statistic(a, b) == pytest.approx(np.max(np.abs(fa - fb)), abs=1e-12)


class TestMmd:
    def test_same_singleton(self):
        assert mmd([5], [5], 1.0) == 0.0

    def test_singletons(self):
        expected = math.sqrt(2 - 2 * math.exp(-0.5))
        assert mmd([0], [1], 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(0.887095, abs=1e-6)

    def test_same_list(self):
        s = np.random.default_rng(1).normal(size=50)
        assert mmd(s, s, 0.7) == pytest.approx(0.0, abs=1e-12)

    def test_bad_sigma(self):
        with pytest.raises(InvalidInputError):
            mmd([0], [1], 0.0)

    def test_brute_force(self):
        a, b, s = [0.0, 1.5, 2.0], [1.0, 4.0], 1.3
        k = lambda x, y: math.exp(-((x - y) ** 2) / (2 * s * s))
        val = (
            sum(k(x, y) for x in a for y in a) / 9
            + sum(k(x, y) for x in b for y in b) / 4
            - 2 * sum(k(x, y) for x in a for y in b) / 6
        )
        assert mmd(a, b, s) == pytest.approx(math.sqrt(val), rel=1e-12)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=20),
           st.lists(st.floats(-100, 100), min_size=1, max_size=20), st.floats(0.1, 50))
    def test_symmetric_nonnegative(self, a, b, sigma):
        assert mmd(a, b, sigma) == pytest.approx(mmd(b, a, sigma), abs=1e-12)
        assert mmd(a, b, sigma) >= 0


class TestMedianBandwidth:
    def test_pair(self):
        assert median_bandwidth([0], [1]) == 1.0

    def test_three(self):
        assert median_bandwidth([0, 1], [2]) == 1.0

    def test_fallback(self):
        assert median_bandwidth([3, 3, 3], [3, 5]) == 2.0

    def test_degenerate(self):
        with pytest.raises(DegenerateStatisticError):
            median_bandwidth([3, 3], [3])


class TestChi2Uniformity:
    def test_perfect(self):
        p = np.repeat((np.arange(20) + 0.5) / 20, 50)
        assert chi2_uniformity(p) == (0.0, 1.0)

    def test_one_bin(self):
        stat, p = chi2_uniformity([0.01] * 100)
        assert stat == pytest.approx(95**2 / 5 + 19 * 5)
        assert stat == pytest.approx(1900)

    def test_one_lands_in_last_bin(self):
        stat_one, _ = chi2_uniformity([1.0] * 20, n_bins=20)
        stat_top, _ = chi2_uniformity([0.99] * 20, n_bins=20)
        assert stat_one == stat_top

    def test_p_from_chi2_19(self):
        stat, p = chi2_uniformity(np.linspace(0, 0.5, 200))
        from scipy.stats import chi2
        assert p == pytest.approx(chi2.sf(stat, 19), rel=1e-9)

    def test_empty(self):
        with pytest.raises(InvalidInputError):
            chi2_uniformity([])


class TestHolm:
    def test_stops_early(self):
        assert holm_bonferroni([0.01, 0.04, 0.03], 0.05) == [True, False, False]

    def test_none(self):
        assert holm_bonferroni([1, 1, 1]) == [False] * 3

    def test_single(self):
        assert holm_bonferroni([0.04], 0.05) == [True]

    def test_all(self):
        assert holm_bonferroni([0.001, 0.02, 0.04], 0.05) == [True, True, True]

    def test_input_order(self):
        assert holm_bonferroni([0.3, 0.001, 0.02], 0.05) == [False, True, True]
