"""The compiled and pure-Python kernels must agree draw for draw."""

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from sandpile1d import ctmc, kernels
from sandpile1d.lattice import HeightConfig, from_critical_set

needs_cython = pytest.mark.skipif(
    "cython" not in kernels.available_backends(), reason="compiled kernels not built"
)


def test_backend_lookup():
    assert "python" in kernels.available_backends()
    assert kernels.get_backend() is kernels.active
    assert kernels.get_backend("python").add_grains is not None
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_env_var_forces_python():
    code = "from sandpile1d import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, SANDPILE1D_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name", kernels.available_backends())
@given(st.lists(st.sampled_from([1, 2]), min_size=1, max_size=15), st.data())
def test_add_grains_matches_grain_dynamics(name, hs, data):
    kern = kernels.get_backend(name)
    sites = data.draw(st.lists(st.integers(0, len(hs) - 1), max_size=30))
    h = np.array(hs, dtype=np.int8)
    kern.add_grains(h, np.array(sites, dtype=np.int64))
    ref = tuple(hs)
    for k in sites:
        ref = oracles.topple_finite(ref, k)
    assert tuple(h.tolist()) == ref


@needs_cython
@pytest.mark.parametrize("seed", range(5))
def test_chain_equivalence(seed):
    eta = from_critical_set({-3, -1, 0, 4})
    finals = []
    for name in ("python", "cython"):
        rng = np.random.default_rng(seed)
        finals.append(ctmc.final_Ln(2, eta, 3.0, rng, backend=name))
        finals.append(rng.random())  # stream position after the run
    assert finals[0] == finals[2] and finals[1] == finals[3]


@needs_cython
@pytest.mark.parametrize("seed", range(3))
def test_estimators_equivalent(seed):
    f = lambda e: e[0] - 1  # noqa: E731
    eta = HeightConfig.all_twos(-4, 4)
    a = ctmc.estimate_semigroup(f, eta, 0.7, 3, 4, 200, seed, backend="python")
    b = ctmc.estimate_semigroup(f, eta, 0.7, 3, 4, 200, seed, backend="cython")
    assert a == b
    a = ctmc.estimate_absorption(4, 2.0, 300, seed, backend="python")
    b = ctmc.estimate_absorption(4, 2.0, 300, seed, backend="cython")
    assert a == b


@needs_cython
@pytest.mark.parametrize("n", [1, 3])
def test_hole_law_equivalent(n):
    a = ctmc.hole_law(n, 8, 500, 11, backend="python")
    b = ctmc.hole_law(n, 8, 500, 11, backend="cython")
    assert np.array_equal(a.estimate, b.estimate) and a.violations == b.violations == 0


@needs_cython
@pytest.mark.parametrize("mode", ["avalanche", "n", "n1n"])
def test_coupled_equivalent(mode):
    rng = np.random.default_rng(5)
    pairs = [ctmc.random_ordered_pair(rng, 5) for _ in range(200)]
    states = []
    for name in ("python", "cython"):
        r = np.random.default_rng(9)
        out = [ctmc._drive_coupled(u, l, ctmc._MODES[mode], 2, 1.5, r, kernels.get_backend(name))
               for u, l in pairs]
        states.append([(s.upper, s.lower, ev, v) for s, ev, v in out])
    assert states[0] == states[1]


@needs_cython
def test_discrete_equivalent():
    a = ctmc.discrete_time_fvsp(3, 300, seed=4, backend="python")
    b = ctmc.discrete_time_fvsp(3, 300, seed=4, backend="cython")
    assert a == b
