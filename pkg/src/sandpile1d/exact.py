"""Exact analysis of the finite-volume process on ``[-n, n]``.

States are all ``2^(2n+1)`` height vectors, enumerated lexicographically
(``(1, ..., 1)`` first).  The generator has one unit-rate clock per site;
a ring at ``i`` applies the finite-volume toppling map at ``i``.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import kernels
from .errors import NumericalFailure, SizeLimit
from .lattice import HeightConfig, Tail
from .toppling import GrainField, stabilize

logger = logging.getLogger(__name__)

MAX_N = 6

__all__ = [
    "StateSpace",
    "recurrent_set",
    "build_generator",
    "stationary_distribution",
    "check_reversibility",
    "check_detailed_balance",
    "check_unique_toppling_bijection",
    "transient_distribution",
    "check_lemma_excess",
    "distribution_csv",
    "generator_csv",
]


@dataclass(frozen=True)
class StateSpace:
    """All height vectors on ``[-n, n]`` with a fixed lexicographic index."""

    n: int
    states: Tuple[Tuple[int, ...], ...] = field(init=False, repr=False)
    index: Dict[Tuple[int, ...], int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.n > MAX_N:
            raise SizeLimit(f"n = {self.n} exceeds the enumeration cap {MAX_N}")
        states = tuple(itertools.product((1, 2), repeat=2 * self.n + 1))
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "index", {s: k for k, s in enumerate(states)})

    def __len__(self) -> int:
        return len(self.states)

    def config(self, k: int) -> HeightConfig:
        return HeightConfig(-self.n, self.n, self.states[k], Tail.ONES)

    def index_of(self, eta) -> int:
        if isinstance(eta, HeightConfig):
            eta = tuple(int(v) for v in eta.window(-self.n, self.n).heights)
        return self.index[tuple(eta)]

    def heights_text(self, k: int) -> str:
        return "".join(str(v) for v in self.states[k])


def recurrent_set(n: int) -> List[Tuple[int, ...]]:
    """States with at most one site of height 1."""
    return [s for s in StateSpace(n).states if s.count(1) <= 1]


def _transition_table(space: StateSpace) -> np.ndarray:
    """``table[s, k]`` = index of the state reached from ``s`` by a grain at site ``k - n``."""
    n = space.n
    add = kernels.active.add_grains
    table = np.empty((len(space), 2 * n + 1), dtype=np.int64)
    for s, state in enumerate(space.states):
        for k in range(2 * n + 1):
            h = np.array(state, dtype=np.int8)
            add(h, np.array([k], dtype=np.int64))
            table[s, k] = space.index[tuple(h.tolist())]
    return table


def build_generator(n: int) -> np.ndarray:
    """Dense rate matrix with integer off-diagonal entries and zero row sums."""
    space = StateSpace(n)
    table = _transition_table(space)
    size = len(space)
    q = np.zeros((size, size))
    rows = np.repeat(np.arange(size), table.shape[1])
    np.add.at(q, (rows, table.ravel()), 1.0)
    q[np.diag_indices(size)] -= table.shape[1]
    return q


def stationary_distribution(n: int, q: Optional[np.ndarray] = None, tol: float = 1e-10) -> np.ndarray:
    """Solve ``pi q = 0``, ``sum(pi) = 1`` by least squares.

    Raises
    ------
    NumericalFailure
        If the residual exceeds ``tol``.
    """
    if q is None:
        q = build_generator(n)
    size = q.shape[0]
    a = np.vstack([q.T, np.ones((1, size))])
    b = np.zeros(size + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    resid = float(np.abs(a @ pi - b).max())
    if resid > tol:
        raise NumericalFailure(f"stationary solve residual {resid:.3e} > {tol:.1e}")
    pi[np.abs(pi) < tol] = 0.0
    return pi


def _mu(n: int) -> np.ndarray:
    space = StateSpace(n)
    mu = np.zeros(len(space))
    for s in recurrent_set(n):
        mu[space.index[s]] = 1.0 / (2 * n + 2)
    return mu


def check_reversibility(n: int, f: np.ndarray, g: np.ndarray,
                        q: Optional[np.ndarray] = None) -> Tuple[float, float]:
    """Return ``(sum mu (L f) g, sum mu f (L g))`` for vectors ``f, g`` over states."""
    if q is None:
        q = build_generator(n)
    mu = _mu(n)
    f, g = np.asarray(f, float), np.asarray(g, float)
    return float(mu @ ((q @ f) * g)), float(mu @ (f * (q @ g)))


def check_detailed_balance(n: int, q: Optional[np.ndarray] = None) -> float:
    """Largest ``|mu(s) q(s, s') - mu(s') q(s', s)|`` over all pairs."""
    if q is None:
        q = build_generator(n)
    flux = _mu(n)[:, None] * q
    return float(np.abs(flux - flux.T).max())


@dataclass
class BijectionReport:
    n: int
    pairs: int
    counterexamples: List[Tuple[Tuple[int, ...], Tuple[int, ...], List[int]]]
    pushforward_error: float

    @property
    def ok(self) -> bool:
        return not self.counterexamples and self.pushforward_error < 1e-12


def check_unique_toppling_bijection(n: int) -> BijectionReport:
    """For every ordered pair of distinct recurrent states, count the sites
    whose toppling map sends the first to the second; also push the uniform
    measure on recurrent states through every toppling map."""
    space = StateSpace(n)
    table = _transition_table(space)
    rec = [space.index[s] for s in recurrent_set(n)]
    bad = []
    pairs = 0
    for a in rec:
        for b in rec:
            if a == b:
                continue
            pairs += 1
            sites = [k - n for k in range(2 * n + 1) if table[a, k] == b]
            if len(sites) != 1:
                bad.append((space.states[a], space.states[b], sites))
    mu = _mu(n)
    err = 0.0
    for k in range(2 * n + 1):
        push = np.zeros(len(space))
        np.add.at(push, table[:, k], mu)
        err = max(err, float(np.abs(push - mu).max()))
    return BijectionReport(n, pairs, bad, err)


def transient_distribution(n: int, s0, t: float, q: Optional[np.ndarray] = None,
                           eps: float = 1e-10) -> np.ndarray:
    """Row ``s0`` of ``exp(t q)`` by uniformization.

    With ``L = max |q_ii|`` and ``P = I + q / L`` the law is
    ``sum_k Poisson(L t)[k] e_{s0} P^k``; the sum stops once the Poisson
    upper tail is below ``eps``, which bounds the total-variation error.
    """
    if q is None:
        q = build_generator(n)
    space_size = q.shape[0]
    if not isinstance(s0, (int, np.integer)):
        s0 = StateSpace(n).index_of(s0)
    p0 = np.zeros(space_size)
    p0[s0] = 1.0
    if t == 0:
        return p0
    lam = float(np.abs(np.diag(q)).max())
    P = np.eye(space_size) + q / lam
    rate = lam * t
    k_max = int(stats.poisson.isf(eps, rate)) + 1
    while stats.poisson.sf(k_max, rate) >= eps:
        k_max += 1
    weights = stats.poisson.pmf(np.arange(k_max + 1), rate)
    out = np.zeros(space_size)
    v = p0
    for w in weights:
        out += w * v
        v = v @ P
    return out


@dataclass
class LemmaReport:
    n: int
    trials: int
    failures: List[GrainField]

    @property
    def ok(self) -> bool:
        return not self.failures


def check_lemma_excess(n: int, trials: int, seed=None, max_extra: int = 6) -> LemmaReport:
    """Random grain fields whose central half ``|i| <= n // 2`` carries at
    least ``12 n`` grains; every stabilization must be recurrent.

    Each field has ``1 + Uniform{0..max_extra}`` grains per site, and the
    central shortfall is then added at uniformly chosen central sites.
    """
    rng = np.random.default_rng(seed)
    h = n // 2
    fails = []
    for _ in range(trials):
        c = 1 + rng.integers(0, max_extra + 1, size=2 * n + 1)
        central = slice(n - h, n + h + 1)
        short = 12 * n - int(c[central].sum())
        if short > 0:
            np.add.at(c, n - h + rng.integers(0, 2 * h + 1, size=short), 1)
        xi = GrainField(-n, n, c)
        eta = stabilize(n, xi)
        if np.count_nonzero(eta.heights == 1) > 1:
            fails.append(xi)
    return LemmaReport(n, trials, fails)


def distribution_csv(n: int, weights: Sequence[float]) -> str:
    """CSV with columns ``state_index,heights,weight``."""
    space = StateSpace(n)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state_index", "heights", "weight"])
    for k, p in enumerate(weights):
        w.writerow([k, space.heights_text(k), repr(float(p))])
    return buf.getvalue()


def generator_csv(q: np.ndarray) -> str:
    """Sparse triplets ``row,col,rate`` of the nonzero entries."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", "col", "rate"])
    for r, c in zip(*np.nonzero(q)):
        w.writerow([int(r), int(c), repr(float(q[r, c]))])
    return buf.getvalue()
