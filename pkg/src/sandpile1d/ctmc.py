"""Continuous-time simulation of sandpile dynamics on Z and on finite volumes.

Every process here is driven by unit-rate exponential clocks.  Chains on Z
keep their state in an ``int8`` buffer that is re-allocated when the
region of activity approaches its edge; see :mod:`sandpile1d._pykernels`
for the event rules.

Monte Carlo estimators split their samples into fixed-size chunks.  Chunk
``c`` draws from ``SeedSequence(seed, spawn_key=(c,))``, so estimates are
reproducible and do not depend on how chunks are scheduled.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from . import _pykernels, kernels
from .errors import NotOrdered
from .lattice import CriticalSet, HeightConfig, Tail, from_critical_set, leq
from .toppling import GrainField, stabilize

logger = logging.getLogger(__name__)

CHUNK = 1000
DEFAULT_DELTA = 0.5

__all__ = [
    "Trajectory",
    "CoupledState",
    "EstimatorResult",
    "RunningStats",
    "simulate_avalanche_chain",
    "simulate_Ln",
    "simulate_fvsp_poisson",
    "simulate_coupled_avalanche",
    "simulate_coupled_n",
    "simulate_coupled_n1_n",
    "estimate_semigroup",
    "estimate_absorption",
    "discrete_time_fvsp",
    "fvsp_poisson_state",
    "hole_law",
    "exact_hole_law",
    "coupled_order_check",
    "monotone_in_n",
    "theorem51_bound",
    "chunk_rng",
    "final_Ln",
    "HoleLaw",
    "random_ordered_pair",
]


# ---------------------------------------------------------------------- #
# records
# ---------------------------------------------------------------------- #
@dataclass(frozen=True)
class CoupledState:
    upper: HeightConfig
    lower: HeightConfig

    def ordered(self) -> bool:
        return leq(self.lower, self.upper)


@dataclass
class Trajectory:
    """Jump record of a simulated chain.

    ``events`` holds ``(t, site, kind, delta)`` tuples.  For single chains
    ``delta`` is a list of ``(site, new_height)``; for coupled chains it is a
    dict with keys ``upper`` and ``lower``.
    """

    initial: Union[HeightConfig, CoupledState]
    horizon: float
    events: List[tuple] = field(default_factory=list)
    violations: int = 0

    @property
    def coupled(self) -> bool:
        return isinstance(self.initial, CoupledState)

    def states(self) -> Iterator[Union[HeightConfig, CoupledState]]:
        """Replay: the initial state, then the state after every event."""
        cur = self.initial
        yield cur
        for _, _, _, delta in self.events:
            if self.coupled:
                cur = CoupledState(
                    cur.upper.with_sites(delta["upper"]), cur.lower.with_sites(delta["lower"])
                )
            else:
                cur = cur.with_sites(delta)
            yield cur

    def final(self):
        state = None
        for state in self.states():
            pass
        return state

    def times(self) -> np.ndarray:
        return np.array([e[0] for e in self.events])

    def to_jsonl(self) -> str:
        lines = []
        for t, site, kind, delta in self.events:
            if isinstance(delta, dict):
                d = {k: [list(p) for p in v] for k, v in delta.items()}
            else:
                d = [list(p) for p in delta]
            lines.append(json.dumps({"t": t, "site": site, "kind": kind, "delta": d}))
        return "\n".join(lines) + ("\n" if lines else "")


@dataclass(frozen=True)
class EstimatorResult:
    mean: float
    stderr: float
    samples: int
    seed: Optional[int]
    params: Dict = field(default_factory=dict)

    def as_dict(self) -> Dict:
        return {
            "mean": self.mean,
            "stderr": self.stderr,
            "samples": self.samples,
            "seed": self.seed,
            "params": dict(self.params),
        }


class RunningStats:
    """Mean and variance accumulator with an exact pairwise merge."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def add_batch(self, values) -> "RunningStats":
        v = np.asarray(values, dtype=float)
        if v.size:
            other = RunningStats()
            other.count = v.size
            other.mean = float(v.mean())
            other.m2 = float(((v - other.mean) ** 2).sum())
            self.merge(other)
        return self

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.count == 0:
            return self
        n = self.count + other.count
        d = other.mean - self.mean
        self.mean += d * other.count / n
        self.m2 += other.m2 + d * d * self.count * other.count / n
        self.count = n
        return self

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return 0.0
        return math.sqrt(self.m2 / (self.count - 1) / self.count)

    def result(self, seed, params) -> EstimatorResult:
        return EstimatorResult(self.mean, self.stderr, self.count, seed, params)


def chunk_rng(seed, chunk: int) -> np.random.Generator:
    """Generator for chunk ``chunk`` of an estimator seeded with ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _chunks(samples: int):
    for c, start in enumerate(range(0, samples, CHUNK)):
        yield c, min(CHUNK, samples - start)


# ---------------------------------------------------------------------- #
# buffers
# ---------------------------------------------------------------------- #
class _Buffers:
    """One or two aligned chain buffers plus the activity hull."""

    def __init__(self, configs: List[HeightConfig], lo: int, hi: int):
        for c in configs:
            if c.tail is not Tail.ONES:
                raise ValueError("chains on Z need configurations with a ones tail")
        crit = [c.critical_sites() for c in configs]
        pts = [int(x) for a in crit if a.size for x in (a.min(), a.max())]
        if lo <= hi:
            pts += [lo, hi]
        if pts:
            self.wlo, self.whi = min(pts), max(pts)
        else:
            self.wlo, self.whi = 1, 0
        span = max(self.whi - self.wlo + 1, 0)
        margin = max(32, span)
        self.base = min(self.wlo, 0) - margin
        size = max(self.whi, 0) - self.base + margin + 1
        self.bufs = [c.window(self.base, self.base + size - 1).heights.copy() for c in configs]

    def grow(self):
        old = len(self.bufs[0])
        pad = max(old, 64)
        self.bufs = [np.concatenate([np.ones(pad, np.int8), b, np.ones(pad, np.int8)]) for b in self.bufs]
        self.base -= pad

    def configs(self) -> List[HeightConfig]:
        hi = self.base + len(self.bufs[0]) - 1
        return [HeightConfig(self.base, hi, b, Tail.ONES).canonical() for b in self.bufs]


def _drive_chain(config: HeightConfig, n_birth: int, horizon: float, rng,
                 kern=None, log=None) -> Tuple[HeightConfig, int]:
    kern = kern or kernels.active
    lo, hi = (-n_birth, n_birth) if n_birth >= 0 else (1, 0)
    bf = _Buffers([config], lo, hi)
    t, total = 0.0, 0
    while True:
        status, t, ev, bf.wlo, bf.whi = kern.run_chain(
            bf.bufs[0], bf.base, bf.wlo, bf.whi, n_birth, t, horizon, -1, rng, log
        )
        total += ev
        if status != kernels.GROW:
            break
        bf.grow()
    return bf.configs()[0], total


_MODES = {"avalanche": 0, "n": 1, "n1n": 2}


def _drive_coupled(upper: HeightConfig, lower: HeightConfig, mode: int, n: int,
                   horizon: float, rng, kern=None, log=None):
    if not leq(lower, upper):
        raise NotOrdered("coupled simulation needs lower <= upper")
    kern = kern or kernels.active
    r = -1 if mode == 0 else (n + 1 if mode == 2 else n)
    lo, hi = (-r, r) if r >= 0 else (1, 0)
    bf = _Buffers([upper, lower], lo, hi)
    t, total, viol = 0.0, 0, 0
    while True:
        status, t, ev, v, bf.wlo, bf.whi = kern.run_coupled(
            bf.bufs[0], bf.bufs[1], bf.base, bf.wlo, bf.whi, mode, n, t, horizon, -1, rng, log
        )
        total += ev
        viol += v
        if status != kernels.GROW:
            break
        bf.grow()
    up, lo_ = bf.configs()
    return CoupledState(up, lo_), total, viol


def _event_log(raw) -> List[tuple]:
    def pairs(d):
        return [(int(x), int(h)) for x, h in d]

    out = []
    for t, site, kind, delta in raw:
        if isinstance(delta, dict):
            delta = {k: pairs(v) for k, v in delta.items()}
        else:
            delta = pairs(delta)
        out.append((float(t), int(site), kind, delta))
    return out


def _as_config(x) -> HeightConfig:
    if isinstance(x, HeightConfig):
        return x
    return from_critical_set(x)


# ---------------------------------------------------------------------- #
# single chains
# ---------------------------------------------------------------------- #
def simulate_avalanche_chain(A0, horizon: float, seed=None) -> Trajectory:
    """Avalanche-only chain from the critical set ``A0`` up to ``horizon``.

    Each critical site topples at rate 1.  The returned trajectory starts at
    ``from_critical_set(A0)``.
    """
    eta = _as_config(A0)
    rng = np.random.default_rng(seed)
    log = []
    _drive_chain(eta, -1, horizon, rng, _pykernels, log)
    return Trajectory(eta, horizon, _event_log(log))


def simulate_Ln(n: int, eta0: HeightConfig, horizon: float, seed=None) -> Trajectory:
    """Avalanches at every critical site of Z, births on ``[-n, n]``."""
    rng = np.random.default_rng(seed)
    log = []
    _drive_chain(eta0, n, horizon, rng, _pykernels, log)
    return Trajectory(eta0, horizon, _event_log(log))


def final_Ln(n: int, eta0: HeightConfig, horizon: float, rng, backend=None) -> HeightConfig:
    """State at ``horizon`` of the chain of :func:`simulate_Ln` (fast path)."""
    return _drive_chain(eta0, n, horizon, rng, kernels.get_backend(backend))[0]


def simulate_fvsp_poisson(n: int, eta0: HeightConfig, horizon: float, seed=None) -> Trajectory:
    """Finite-volume process on ``[-n, n]`` from independent Poisson grain streams.

    Each site receives grains at the arrival times of its own rate-one
    Poisson process; after every arrival the volume is stabilized with sand
    lost at the boundary.
    """
    rng = np.random.default_rng(seed)
    eta = eta0.clamp(n)
    w = 2 * n + 1
    counts = rng.poisson(horizon, size=w)
    times = np.concatenate([np.sort(rng.uniform(0.0, horizon, size=c)) for c in counts])
    sites = np.repeat(np.arange(w), counts)
    order = np.argsort(times, kind="stable")
    h = eta.heights.copy()
    events = []
    for k in order:
        j = int(sites[k])
        before = h.copy()
        _pykernels.add_grains(h, np.array([j], dtype=np.int64))
        changed = np.flatnonzero(before != h)
        events.append((float(times[k]), j - n, "birth", [(int(x) - n, int(h[x])) for x in changed]))
    return Trajectory(eta, horizon, events)


def fvsp_poisson_state(n: int, eta0: HeightConfig, t: float, rng, backend=None) -> HeightConfig:
    """One sample of ``theta_n(N_t + eta0)``."""
    counts = rng.poisson(t, size=2 * n + 1)
    grains = counts + eta0.clamp(n).heights.astype(np.int64)
    return stabilize(n, GrainField(-n, n, grains), backend)


# ---------------------------------------------------------------------- #
# coupled chains
# ---------------------------------------------------------------------- #
def _simulate_coupled(mode, n, upper, lower, horizon, seed):
    rng = np.random.default_rng(seed)
    log = []
    _, _, viol = _drive_coupled(upper, lower, mode, n, horizon, rng, _pykernels, log)
    return Trajectory(CoupledState(upper, lower), horizon, _event_log(log), viol)


def simulate_coupled_avalanche(upper: HeightConfig, lower: HeightConfig, horizon: float,
                               seed=None) -> Trajectory:
    """Ordered pair of avalanche chains.

    When the upper chain topples at ``i`` and creates a 1 at a site where the
    lower chain has a 2, the lower chain topples at the unique site whose
    avalanche creates a 1 at the same place.

    Raises
    ------
    NotOrdered
        If ``lower <= upper`` fails.
    """
    return _simulate_coupled(0, 0, upper, lower, horizon, seed)


def simulate_coupled_n(n: int, upper: HeightConfig, lower: HeightConfig, horizon: float,
                       seed=None) -> Trajectory:
    """Ordered pair of chains with births on ``[-n, n]`` in both."""
    return _simulate_coupled(1, n, upper, lower, horizon, seed)


def simulate_coupled_n1_n(n: int, upper: HeightConfig, lower: HeightConfig, horizon: float,
                          seed=None) -> Trajectory:
    """Upper chain with births on ``[-n-1, n+1]``, lower on ``[-n, n]``."""
    return _simulate_coupled(2, n, upper, lower, horizon, seed)


# ---------------------------------------------------------------------- #
# estimators
# ---------------------------------------------------------------------- #
def estimate_semigroup(f: Callable[[HeightConfig], float], eta: HeightConfig, t: float,
                       n: int, m: int, samples: int, seed=None, backend=None) -> EstimatorResult:
    """Monte Carlo estimate of ``E f(eta_t)`` for the chain with births on
    ``[-n, n]`` started from ``eta`` truncated to ``[-m, m]``.
    """
    start = eta.truncate(m)
    params = {"f": getattr(f, "name", getattr(f, "__name__", "f")), "t": t, "n": n, "m": m}
    stats = RunningStats()
    if t == 0:
        v = float(f(start))
        stats.add_batch(np.full(samples, v))
        return stats.result(seed, params)
    kern = kernels.get_backend(backend)
    for c, size in _chunks(samples):
        rng = chunk_rng(seed, c)
        vals = [float(f(_drive_chain(start, n, t, rng, kern)[0])) for _ in range(size)]
        stats.add_batch(vals)
    return stats.result(seed, params)


def estimate_absorption(n: int, t: float, samples: int, seed=None, backend=None) -> EstimatorResult:
    """Estimate ``P(theta_n(N_t + 1)(0) = 1)`` for the finite-volume process."""
    kern = kernels.get_backend(backend)
    stats = RunningStats()
    w = 2 * n + 1
    idx = np.arange(w, dtype=np.int64)
    for c, size in _chunks(samples):
        rng = chunk_rng(seed, c)
        vals = np.empty(size)
        for s in range(size):
            sites = np.repeat(idx, rng.poisson(t, size=w))
            h = np.ones(w, dtype=np.int8)
            kern.add_grains(h, sites)
            vals[s] = h[n] == 1
        stats.add_batch(vals)
    return stats.result(seed, {"n": n, "t": t})


def theorem51_bound(n: int, delta: float = DEFAULT_DELTA) -> float:
    """``1/(2n+1) + (1 - exp(-delta))^(2n+1)``, the explicit part of the bound."""
    return 1.0 / (2 * n + 1) + (1.0 - math.exp(-delta)) ** (2 * n + 1)


def discrete_time_fvsp(n: int, steps: int, eta0: Optional[HeightConfig] = None, seed=None,
                       backend=None) -> HeightConfig:
    """Add a grain at a uniform site of ``[-n, n]`` and stabilize, ``steps`` times."""
    eta = (eta0 or HeightConfig.all_ones()).clamp(n)
    rng = np.random.default_rng(seed)
    h = eta.heights.copy()
    sites = rng.integers(0, 2 * n + 1, size=steps).astype(np.int64)
    kernels.get_backend(backend).add_grains(h, sites)
    return HeightConfig(-n, n, h, Tail.ONES)


@dataclass(frozen=True)
class HoleLaw:
    """Empirical ``P(0 not in A(tau_k))`` for ``k = 1..k_max``."""

    n: int
    estimate: np.ndarray
    stderr: np.ndarray
    formula: np.ndarray
    samples: int
    violations: int
    seed: Optional[int]


def hole_law(n: int, k_max: int, samples: int, seed=None, backend=None,
             check: bool = True) -> HoleLaw:
    """Jump chain of the avalanche process from ``A = [-n, n]``.

    ``formula[k-1] = 1 / (2n + k)``; see :func:`exact_hole_law` for the true law.  ``violations`` counts sampled states that
    are not an interval minus at most one point.
    """
    kern = kernels.get_backend(backend)
    margin = k_max + 2
    w = 2 * n + 1 + 2 * margin
    base = -n - margin
    tmpl = np.ones(w, dtype=np.int8)
    tmpl[margin : margin + 2 * n + 1] = 2
    hits = np.zeros(k_max)
    out = np.empty(k_max, dtype=np.int8)
    viol = 0
    for c, size in _chunks(samples):
        rng = chunk_rng(seed, c)
        for _ in range(size):
            buf = tmpl.copy()
            viol += kern.avalanche_jumps(buf, base, -n, n, k_max, rng, out, check)
            hits += out
    p = hits / samples
    se = np.sqrt(p * (1 - p) / max(samples - 1, 1))
    formula = 1.0 / (2 * n + np.arange(1, k_max + 1))
    return HoleLaw(n, p, se, formula, samples, int(viol), seed)


def exact_hole_law(n: int, k_max: int) -> np.ndarray:
    """Exact ``P(0 not in A(tau_k))``, ``k = 1..k_max``, from ``A = [-n, n]``.

    Enumerates the jump chain on states ``(L, R, x)``: the interval
    ``[L, R]`` of critical sites with the single interior one at ``x``
    (``None`` when there is none).
    """
    dist = {(-n, n, None): 1.0}
    out = np.empty(k_max)
    for k in range(k_max):
        nxt: Dict[tuple, float] = {}
        for (L, R, x), p in dist.items():
            size = R - L + 1 - (x is not None)
            w = p / size
            for i in range(L, R + 1):
                if i == x:
                    continue
                if x is None:
                    key = (L - 1, R + 1, L + R - i)
                elif i < x:
                    key = (L - 1, R, L - 1 + x - i)
                else:
                    key = (L, R + 1, x + R + 1 - i)
                nxt[key] = nxt.get(key, 0.0) + w
        dist = nxt
        out[k] = sum(p for (_, _, x), p in dist.items() if x == 0)
    return out


def coupled_order_check(mode: str, n: int, pairs, horizon: float, seed=None,
                        backend=None) -> Tuple[int, int]:
    """Run the coupling on every ``(upper, lower)`` pair; return ``(runs, violations)``.

    Violations are counted after every event, and the final states are
    compared once more with :func:`leq`.
    """
    kern = kernels.get_backend(backend)
    m = _MODES[mode]
    runs = viol = 0
    pairs = list(pairs)
    for c, start in enumerate(range(0, len(pairs), CHUNK)):
        rng = chunk_rng(seed, c)
        for up, lo in pairs[start : start + CHUNK]:
            state, _, v = _drive_coupled(up, lo, m, n, horizon, rng, kern)
            viol += v + (0 if state.ordered() else 1)
            runs += 1
    return runs, viol


def monotone_in_n(f: Callable[[HeightConfig], float], eta: HeightConfig, n: int, t: float,
                  samples: int, seed=None, backend=None) -> Dict[str, EstimatorResult]:
    """Estimate ``E f`` for the chains with birth windows ``n + 1`` and ``n``,
    jointly through the order-preserving coupling started from ``eta`` twice.

    Returns estimates for ``upper``, ``lower`` and the paired ``diff``.
    """
    kern = kernels.get_backend(backend)
    su, sl, sd = RunningStats(), RunningStats(), RunningStats()
    for c, size in _chunks(samples):
        rng = chunk_rng(seed, c)
        vu, vl = np.empty(size), np.empty(size)
        for s in range(size):
            state, _, _ = _drive_coupled(eta, eta, 2, n, t, rng, kern)
            vu[s], vl[s] = f(state.upper), f(state.lower)
        su.add_batch(vu)
        sl.add_batch(vl)
        sd.add_batch(vu - vl)
    params = {"n": n, "t": t}
    return {"upper": su.result(seed, params), "lower": sl.result(seed, params),
            "diff": sd.result(seed, params)}


def random_ordered_pair(rng, half_width: int = 6, p_upper: float = 0.6,
                        p_keep: float = 0.6) -> Tuple[HeightConfig, HeightConfig]:
    """Random ``(upper, lower)`` with finitely many critical sites and ``lower <= upper``."""
    w = 2 * half_width + 1
    up = np.where(rng.random(w) < p_upper, 2, 1).astype(np.int8)
    lo = np.where((up == 2) & (rng.random(w) < p_keep), 2, 1).astype(np.int8)
    return (HeightConfig(-half_width, half_width, up, Tail.ONES),
            HeightConfig(-half_width, half_width, lo, Tail.ONES))
