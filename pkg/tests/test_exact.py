import numpy as np
import pytest
from scipy.linalg import expm

import oracles
from sandpile1d import exact
from sandpile1d.errors import SizeLimit
from sandpile1d.toppling import GrainField, stabilize


def in_recurrent(eta, n):
    return sum(2 - eta[x] for x in range(-n, n + 1)) <= 1


class TestStateSpace:
    def test_order_and_size(self):
        space = exact.StateSpace(1)
        assert len(space) == 8
        assert space.states[0] == (1, 1, 1) and space.states[-1] == (2, 2, 2)
        assert list(space.states) == sorted(space.states)
        assert all(space.index_of(s) == k for k, s in enumerate(space.states))
        assert space.index_of(space.config(5)) == 5
        assert space.heights_text(1) == "112"

    def test_cap(self):
        with pytest.raises(SizeLimit):
            exact.StateSpace(exact.MAX_N + 1)

    @pytest.mark.parametrize("n,expected", [
        (0, {(2,), (1,)}),
        (1, {(2, 2, 2), (1, 2, 2), (2, 1, 2), (2, 2, 1)}),
    ])
    def test_recurrent_examples(self, n, expected):
        assert set(exact.recurrent_set(n)) == expected

    @pytest.mark.parametrize("n", range(5))
    def test_recurrent_size(self, n):
        assert len(exact.recurrent_set(n)) == 2 * n + 2


class TestGenerator:
    def test_two_states(self):
        assert np.array_equal(exact.build_generator(0), [[-1, 1], [1, -1]])

    @pytest.mark.parametrize("n", range(4))
    def test_matches_grain_dynamics(self, n):
        states, q_ref = oracles.generator_matrix(n)
        assert tuple(states) == exact.StateSpace(n).states
        assert np.array_equal(exact.build_generator(n), q_ref)

    @pytest.mark.parametrize("n", range(4))
    def test_generator_properties(self, n):
        q = exact.build_generator(n)
        assert np.allclose(q.sum(axis=1), 0)
        off = q - np.diag(np.diag(q))
        assert np.all(off >= 0) and np.array_equal(off, np.round(off))

    def test_example_entry(self):
        space = exact.StateSpace(1)
        q = exact.build_generator(1)
        assert q[space.index_of((2, 2, 2)), space.index_of((2, 1, 2))] >= 1


class TestStationary:
    def test_two_states(self):
        assert np.allclose(exact.stationary_distribution(0), [0.5, 0.5], atol=1e-12)

    @pytest.mark.parametrize("n", range(4))
    def test_uniform_on_recurrent(self, n):
        pi = exact.stationary_distribution(n)
        space = exact.StateSpace(n)
        rec = {space.index_of(s) for s in exact.recurrent_set(n)}
        for k, p in enumerate(pi):
            target = 1 / (2 * n + 2) if k in rec else 0.0
            assert abs(p - target) <= 1e-10
        assert abs(pi.sum() - 1) <= 1e-12


class TestReversibility:
    def test_symmetric_case(self):
        f = np.random.default_rng(0).random(8)
        lhs, rhs = exact.check_reversibility(1, f, f)
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_indicator_example(self):
        space = exact.StateSpace(1)
        f = np.zeros(8)
        g = np.zeros(8)
        f[space.index_of((2, 1, 2))] = 1
        g[space.index_of((2, 2, 2))] = 1
        lhs, rhs = exact.check_reversibility(1, f, g)
        assert abs(lhs - rhs) <= 1e-12

    @pytest.mark.parametrize("n", range(4))
    def test_random_pairs(self, n):
        rng = np.random.default_rng(n)
        q = exact.build_generator(n)
        for _ in range(100):
            f, g = rng.normal(size=(2, q.shape[0]))
            lhs, rhs = exact.check_reversibility(n, f, g, q)
            assert abs(lhs - rhs) <= 1e-12

    @pytest.mark.parametrize("n", range(4))
    def test_detailed_balance(self, n):
        assert exact.check_detailed_balance(n) == 0.0


class TestBijection:
    @pytest.mark.parametrize("n", range(4))
    def test_unique_site(self, n):
        rep = exact.check_unique_toppling_bijection(n)
        assert rep.ok and rep.pairs == (2 * n + 2) * (2 * n + 1)

    def test_small_cases(self):
        assert exact.check_unique_toppling_bijection(0).pairs == 2
        assert exact.check_unique_toppling_bijection(1).pairs == 12


class TestTransient:
    def test_zero_time(self):
        p = exact.transient_distribution(1, 3, 0.0)
        assert p[3] == 1 and p.sum() == 1

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_long_time_is_stationary(self, n):
        q = exact.build_generator(n)
        for s0 in (0, q.shape[0] - 1):
            p = exact.transient_distribution(n, s0, 50.0, q)
            assert np.abs(p - exact.stationary_distribution(n, q)).max() <= 1e-8

    @pytest.mark.parametrize("t", [0.1, 0.5, 2.0, 7.0])
    def test_matches_matrix_exponential(self, t):
        q = exact.build_generator(2)
        ref = expm(t * q)
        for s0 in (0, 11, 31):
            p = exact.transient_distribution(2, s0, t, q)
            assert np.abs(p - ref[s0]).max() <= 1e-10
            assert abs(p.sum() - 1) <= 1e-10

    def test_state_given_as_config(self):
        space = exact.StateSpace(1)
        a = exact.transient_distribution(1, space.config(2), 0.4)
        b = exact.transient_distribution(1, 2, 0.4)
        assert np.array_equal(a, b)


class TestLemma:
    def test_mass_at_origin(self):
        n = 4
        counts = [1] * (2 * n + 1)
        counts[n] = 12 * n
        assert in_recurrent(stabilize(n, GrainField.from_counts(-n, counts)), n)

    def test_spread_mass(self):
        n = 4
        counts = [1] * (2 * n + 1)
        for x in range(-n // 2, n // 2 + 1):
            counts[x + n] = 24
        assert in_recurrent(stabilize(n, GrainField.from_counts(-n, counts)), n)

    def test_no_grains_control(self):
        n = 4
        assert not in_recurrent(stabilize(n, GrainField.from_counts(-n, [1] * 9)), n)

    @pytest.mark.parametrize("n", [2, 4, 10])
    def test_random_fields(self, n):
        rep = exact.check_lemma_excess(n, 100, seed=n)
        assert rep.ok and rep.trials == 100


class TestExport:
    def test_distribution_csv(self):
        text = exact.distribution_csv(0, [0.5, 0.5])
        assert text == "state_index,heights,weight\n0,1,0.5\n1,2,0.5\n"

    def test_generator_csv(self):
        text = exact.generator_csv(exact.build_generator(0))
        assert text.splitlines() == ["row,col,rate", "0,0,-1.0", "0,1,1.0", "1,0,1.0", "1,1,-1.0"]
