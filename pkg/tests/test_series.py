import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from sandpile1d import series
from sandpile1d.errors import DepthLimit, InsufficientWindow, RadiusExceeded
from sandpile1d.lattice import HeightConfig, Tail, from_critical_set, interval_decomposition
from sandpile1d.series import LocalFunction
from sandpile1d.toppling import topple_add

OCC0 = series.builtin("occ0")
PAIR01 = series.builtin("pair01")
CAPPED_LEN = series.builtin("interval-len 1 4")

small_sets = st.frozensets(st.integers(-4, 4), max_size=6)


def windows(draw_width=30):
    return st.builds(
        lambda hs: HeightConfig.from_heights(-draw_width, hs, Tail.UNSPEC),
        st.lists(st.sampled_from([1, 2]), min_size=2 * draw_width + 1, max_size=2 * draw_width + 1)
        .filter(lambda hs: hs.count(1) >= 2 * draw_width // 3),
    )


def L_power_unmemoized(f, eta, d):
    """Literal recursion over the sites of I_{-N-d} .. I_{N+d} of the current configuration."""
    if d == 0:
        return f(eta)
    here = L_power_unmemoized(f, eta, d - 1)
    dec = interval_decomposition(eta, -f.N - d, f.N + d)
    return sum(L_power_unmemoized(f, topple_add(i, eta).config, d - 1) - here for i in dec.sites())


class TestBuiltins:
    def test_lookup(self):
        assert OCC0.N == 0 and OCC0.sup_norm == 1 and OCC0.monotone
        f = series.builtin("interval-len -2")
        assert f.N == 2 and math.isinf(f.sup_norm)
        assert series.builtin("interval_len 1 3").sup_norm == 3
        with pytest.raises(ValueError):
            series.builtin("nope")

    def test_values(self):
        eta = from_critical_set({0, 1})
        assert OCC0(eta) == 1 and PAIR01(eta) == 1
        assert series.builtin("interval-len 0")(eta) == 3
        assert PAIR01(from_critical_set({0})) == 0


class TestApplyL:
    def test_examples(self):
        v, rng = series.apply_L(OCC0, HeightConfig.all_ones())
        assert v == 1 and rng == (-1, 1)
        assert series.apply_L(OCC0, from_critical_set({0}))[0] == -1
        const = LocalFunction("one", 0, 1.0, lambda e: 1.0)
        assert series.apply_L(const, from_critical_set({-1, 0, 3}))[0] == 0

    @given(small_sets)
    def test_matches_full_sum(self, A):
        eta = from_critical_set(A)
        full = sum(OCC0(topple_add(i, eta).config) - OCC0(eta) for i in range(-15, 16))
        assert series.apply_L(OCC0, eta)[0] == full

    @given(small_sets, st.integers(-3, 3), st.data())
    def test_locality(self, A, far, data):
        eta = from_critical_set(A)
        dec = interval_decomposition(eta, -2, 2)
        # perturb strictly outside I_{-2} .. I_2
        side = data.draw(st.sampled_from([-1, 1]))
        anchor = dec.ones[2] if side > 0 else dec.ones[-3]
        x = anchor + side * (1 + abs(far))
        other = eta.with_sites([(x, 3 - eta[x])])
        for f in (OCC0, PAIR01):
            if dec.ones[-2] < x <= dec.ones[1]:
                continue
            assert series.apply_L(f, eta)[0] == series.apply_L(f, other)[0]


class TestIterates:
    def test_small_depths(self):
        eta = from_critical_set({-2, 0, 1})
        assert series.iterate_Ln(OCC0, eta, 0) == OCC0(eta)
        assert series.iterate_Ln(OCC0, eta, 1) == series.apply_L(OCC0, eta)[0]

    def test_all_ones_second_iterate(self):
        eta = HeightConfig.all_ones()
        expected = oracles.L_power_bruteforce(lambda h: h(0) - 1, (), 2, 6)
        assert series.iterate_Ln(OCC0, eta, 2) == expected == 0

    @settings(max_examples=25)
    @given(small_sets, st.integers(1, 3))
    def test_matches_bruteforce(self, A, d):
        eta = from_critical_set(A)
        for f, g in ((OCC0, lambda h: h(0) - 1), (PAIR01, lambda h: int(h(0) == 2 and h(1) == 2))):
            R = 4 + len(A) + f.N + d + 2
            assert series.iterate_Ln(f, eta, d) == oracles.L_power_bruteforce(g, A, d, R)

    @settings(max_examples=40)
    @given(windows(), st.integers(0, 3))
    def test_memoized_equals_unmemoized(self, eta, d):
        for f in (OCC0, PAIR01, CAPPED_LEN):
            assert series.iterate_Ln(f, eta, d) == L_power_unmemoized(f, eta, d)

    def test_iterate_all_consistent(self):
        eta = HeightConfig.periodic([1, 2, 2, 1, 2], -40, 40)
        seq = series.iterate_all(PAIR01, eta, 4)
        assert seq == [series.iterate_Ln(PAIR01, eta, d) for d in range(5)]

    def test_depth_limit(self):
        with pytest.raises(DepthLimit) as exc:
            series.iterate_Ln(OCC0, HeightConfig.all_ones(), 9)
        assert exc.value.required == 9 and exc.value.cap == 8

    def test_short_window(self):
        eta = HeightConfig.periodic([1, 2], -4, 4)
        with pytest.raises(InsufficientWindow):
            series.iterate_Ln(OCC0, eta, 4)


class TestBound:
    def test_examples(self):
        assert series.bound_Ln(OCC0, HeightConfig.all_ones(), 1) == 6
        assert series.bound_Ln(OCC0, from_critical_set({0}), 0) == 1
        eta = HeightConfig.periodic([1, 2], -30, 30)
        assert series.bound_Ln(OCC0, eta, 2) == 400

    @settings(max_examples=40)
    @given(windows(), st.integers(0, 4))
    def test_holds(self, eta, n):
        for f in (OCC0, PAIR01, CAPPED_LEN):
            assert abs(series.iterate_Ln(f, eta, n)) <= series.bound_Ln(f, eta, n)


class TestRadius:
    def test_values(self):
        assert series.radius(from_critical_set({-3, 0, 7})) == pytest.approx(1 / (4 * math.e))
        assert series.radius(HeightConfig.periodic([1, 2], -200, 200)) == pytest.approx(0.04599, abs=1e-5)
        with pytest.raises(InsufficientWindow):
            series.radius(HeightConfig.all_twos(-10, 10))


class TestTaylor:
    def test_zero_time(self):
        r = series.taylor_semigroup(OCC0, from_critical_set({0}), 0.0)
        assert (r.value, r.K, r.tail_bound) == (1.0, 0, 0.0)

    def test_all_ones_is_linear(self):
        r = series.taylor_semigroup(OCC0, HeightConfig.all_ones(), 0.005)
        assert r.tail_is_rigorous and r.tail_bound < 1e-8
        assert abs(r.value - 0.005) <= 1e-15
        assert r.terms[:2] == (0.0, 0.005)

    def test_errors(self):
        with pytest.raises(RadiusExceeded):
            series.taylor_semigroup(OCC0, HeightConfig.all_ones(), 0.1)
        with pytest.raises(ValueError):
            series.taylor_semigroup(series.builtin("interval-len 0"), HeightConfig.all_ones(), 0.01)
        with pytest.raises(DepthLimit) as exc:
            series.taylor_semigroup(OCC0, HeightConfig.all_ones(), 0.05)
        assert exc.value.required > exc.value.cap == 8

    def test_tail_bound_covers_truncation(self):
        eta = from_critical_set({0, 1})
        lo = series.taylor_semigroup(OCC0, eta, 0.01, tol=1e-4)
        hi = series.taylor_semigroup(OCC0, eta, 0.01, tol=1e-10, max_depth=10)
        assert lo.K < hi.K
        assert abs(lo.value - hi.value) <= lo.tail_bound + hi.tail_bound

    def test_tail_decreasing_in_K(self):
        eta = from_critical_set({-1, 0, 2})
        model = series._TailModel(OCC0, eta, 0.03, 1.0, series._known_depth(eta, 0, 200))
        tails = [model.tail_after(K) for K in range(15)]
        assert all(math.isfinite(x) and x >= 0 for x in tails)
        assert all(b < a for a, b in zip(tails, tails[1:]))

    @pytest.mark.parametrize("A", [(0,), (0, 1), (-1, 0, 2)])
    def test_pointwise_generator(self, A):
        eta = from_critical_set(A)
        Lf = series.apply_L(OCC0, eta)[0]
        f0 = OCC0(eta)
        d = {t: (series.taylor_semigroup(OCC0, eta, t).value - f0) / t for t in (0.01, 0.005, 0.0025)}
        for t, v in d.items():
            assert abs(v - Lf) <= 0.05 * abs(Lf)
        # first-order error halves with t; Richardson removes it
        rich = [2 * d[t / 2] - d[t] for t in (0.01, 0.005)]
        assert abs(rich[1] - Lf) < abs(d[0.0025] - Lf) / 4
        assert abs(rich[1] - Lf) < abs(rich[0] - Lf)
