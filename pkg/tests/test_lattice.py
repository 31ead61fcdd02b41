import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sandpile1d.errors import InsufficientWindow
from sandpile1d.lattice import (
    CriticalSet,
    HeightConfig,
    Tail,
    critical_set_of,
    decency_report,
    from_critical_set,
    interval_decomposition,
    leq,
)

site_sets = st.frozensets(st.integers(-30, 30), max_size=20)
heights = st.lists(st.sampled_from([1, 2]), min_size=1, max_size=40)


def scan_twos(eta, lo, hi):
    return [x for x in range(lo, hi + 1) if eta[x] == 2]


class TestHeightConfig:
    def test_rejects_bad_heights(self):
        with pytest.raises(ValueError):
            HeightConfig(0, 2, [1, 3, 1])
        with pytest.raises(ValueError):
            HeightConfig(0, 2, [1, 1])
        with pytest.raises(ValueError):
            HeightConfig(3, 2, [])

    def test_tail_reads(self):
        eta = HeightConfig(0, 1, [2, 1], Tail.ONES)
        assert eta[-5] == 1 and eta[0] == 2 and eta[1] == 1 and eta[100] == 1
        assert HeightConfig.all_twos(0, 0)[-7] == 2
        with pytest.raises(InsufficientWindow):
            HeightConfig(0, 1, [2, 1], Tail.UNSPEC)[2]

    def test_immutable(self):
        eta = from_critical_set({0})
        with pytest.raises(ValueError):
            eta.heights[0] = 1

    def test_semantic_equality_ignores_window(self):
        a = from_critical_set({1, 3})
        b = a.window(-10, 10)
        assert a == b and hash(a) == hash(b)
        assert HeightConfig.all_ones(-3, 4) == HeightConfig.all_ones()
        assert a != from_critical_set({1})

    @given(heights, st.integers(-20, 20), st.sampled_from(list(Tail)))
    def test_text_round_trip(self, hs, lo, tail):
        eta = HeightConfig.from_heights(lo, hs, tail)
        back = HeightConfig.from_text(eta.to_text())
        assert back.to_text() == eta.to_text()

    def test_text_format(self):
        eta = HeightConfig.from_text("-1 1 ones 2 1 2")
        assert eta.to_text() == "-1 1 ones 2 1 2"
        assert list(eta.critical_sites()) == [-1, 1]

    def test_truncate(self):
        eta = HeightConfig.all_twos(-5, 5)
        t = eta.truncate(2)
        assert t.tail is Tail.ONES
        assert [t[x] for x in range(-4, 5)] == [1, 1, 2, 2, 2, 2, 2, 1, 1]

    def test_order(self):
        lo = from_critical_set({0})
        up = from_critical_set({0, 1})
        assert leq(lo, up) and not leq(up, lo)
        assert lo <= up and up >= lo
        assert leq(HeightConfig.all_ones(), HeightConfig.all_twos())
        assert not leq(HeightConfig.all_twos(), from_critical_set(range(-50, 50)))


class TestCriticalSet:
    def test_examples(self):
        assert from_critical_set(set()) == HeightConfig.all_ones()
        eta = from_critical_set({0})
        assert eta[0] == 2 and eta[-1] == 1 and eta[1] == 1
        eta = from_critical_set({-1, 0, 2})
        assert scan_twos(eta, -10, 10) == [-1, 0, 2]
        assert critical_set_of(eta).sites == (-1, 0, 2)

    def test_normalizes(self):
        assert CriticalSet((3, 1, 3, -2)).sites == (-2, 1, 3)
        assert 1 in CriticalSet((1,)) and len(CriticalSet(())) == 0

    @given(site_sets)
    def test_round_trip(self, A):
        eta = from_critical_set(A)
        assert eta.tail is Tail.ONES
        assert set(critical_set_of(eta)) == set(A)
        assert scan_twos(eta, -40, 40) == sorted(A)

    def test_needs_ones_tail(self):
        with pytest.raises(InsufficientWindow):
            critical_set_of(HeightConfig.all_twos())


class TestIntervals:
    def test_all_ones(self):
        dec = interval_decomposition(HeightConfig.all_ones(), -5, 5)
        assert dec.lengths() == [1] * 11
        assert all(dec.ones[j] == j for j in range(-6, 6))

    def test_single_two(self):
        dec = interval_decomposition(from_critical_set({0}), -1, 1)
        assert dec.ones[-1] == -1 and dec.ones[0] == 1
        assert dec.intervals[0] == (0, 1) and dec.length(0) == 2

    def test_all_twos_has_no_ones(self):
        with pytest.raises(InsufficientWindow):
            interval_decomposition(HeightConfig.all_twos(-5, 5), 0, 0)

    def test_unspecified_tail_too_short(self):
        eta = HeightConfig.from_heights(-2, [1, 2, 1, 2, 1], Tail.UNSPEC)
        # ones at -2, 0, 2
        assert interval_decomposition(eta, 0, 1).lengths() == [2, 2]
        with pytest.raises(InsufficientWindow):
            interval_decomposition(eta, -1, 1)

    @given(heights, st.integers(-15, 0), st.integers(0, 2), st.integers(0, 2))
    def test_partition(self, hs, lo, jl, jh):
        eta = HeightConfig.from_heights(lo, hs, Tail.ONES)
        dec = interval_decomposition(eta, -jl, jh)
        xs = [dec.ones[j] for j in range(-jl - 1, jh + 1)]
        assert all(a < b for a, b in zip(xs, xs[1:]))
        covered = []
        for j in range(-jl, jh + 1):
            a, b = dec.intervals[j]
            covered.extend(range(a, b + 1))
            assert eta[b] == 1
            assert all(eta[x] == 2 for x in range(a, b))
        assert covered == list(range(xs[0] + 1, xs[-1] + 1))
        assert list(dec.sites()) == covered
        # X_0 is the first one at or right of the origin
        assert dec.ones[0] == min(x for x in range(0, 100) if eta[x] == 1)


class TestDecency:
    def test_finite_critical_set_tends_to_one(self):
        eta = from_critical_set({-3, -1, 0, 2, 5})
        rep = decency_report(eta, 64)
        assert rep.a_estimate == pytest.approx(1.0, abs=1e-9)
        assert np.all(rep.partial_a > 0)

    def test_all_ones(self):
        rep = decency_report(HeightConfig.all_ones(), 40)
        n = np.arange(1, 41)
        assert np.allclose(rep.partial_a, (2 * n + 1) / (2 * n))
        assert rep.radius == pytest.approx(1 / (4 * math.e), rel=1e-9)
        assert rep.radius == pytest.approx(0.09197, abs=1e-5)

    def test_period_two(self):
        eta = HeightConfig.periodic([1, 2], -100, 100)
        rep = decency_report(eta, 48)
        n = np.arange(1, 49)
        assert np.allclose(rep.partial_a, 2 * (2 * n + 1) / (2 * n))
        assert rep.a_estimate == pytest.approx(2.0, abs=1e-9)
        assert rep.rho_estimate == pytest.approx(0.5, abs=0.02)

    @pytest.mark.parametrize("pattern", [[1, 2], [1, 2, 2], [1, 1, 2], [2, 1, 2, 2, 1], [1, 2, 2, 2]])
    def test_a_times_rho_near_one(self, pattern):
        eta = HeightConfig.periodic(pattern, -600, 600)
        rep = decency_report(eta, 60)
        assert 0.9 <= rep.a_estimate * rep.rho_estimate <= 1.1
        assert rep.a_estimate >= 1

    def test_needs_ones(self):
        with pytest.raises(InsufficientWindow):
            decency_report(HeightConfig.all_twos(-5, 5), 4)
