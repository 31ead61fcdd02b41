"""Pointwise generator on interval-local observables and its Taylor series.

Configurations with infinitely many ones are viewed as the sequence of ones
``... < X_{-1} < X_0 < X_1 < ...`` (``X_0`` the first one at or right of
the origin) with height 2 everywhere in between.  An observable is
``N``-local when it reads only the intervals ``I_{-N} .. I_N`` where
``I_j = (X_{j-1}, X_j]``.  For such ``f`` only grains added inside
``I_{-N-1} .. I_{N+1}`` change ``f``, and ``Lf`` is ``(N+1)``-local.

Iterates ``L^d f`` are computed on tuples of one-positions.  A grain on a
one removes it; a grain strictly between consecutive ones ``l < i < r``
replaces them by the single one ``l + r - i``.

Not every cylinder-like observable fits.  ``f(eta) = sum_x exp(-|x|) eta(x)``
depends on every site with geometrically small weight, so it reads
arbitrarily many intervals and is not ``N``-local for any ``N``.  It
cannot be wrapped as a :class:`LocalFunction`, and the series machinery
here does not apply to it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .errors import DepthLimit, RadiusExceeded
from .lattice import HeightConfig, Tail, decency_report, interval_decomposition
from .toppling import topple_add

logger = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 8
DEFAULT_N_MAX = 64

__all__ = [
    "LocalFunction",
    "SeriesResult",
    "BUILTINS",
    "builtin",
    "apply_L",
    "iterate_Ln",
    "iterate_all",
    "bound_Ln",
    "radius",
    "taylor_semigroup",
]


@dataclass(frozen=True)
class LocalFunction:
    """An ``N``-local observable.

    ``func`` receives a :class:`HeightConfig` whose window covers
    ``I_{-N} .. I_N`` (its tail may be unspecified) and must not read
    outside those intervals.
    """

    name: str
    N: int
    sup_norm: float
    func: Callable[[HeightConfig], float]
    monotone: bool = False

    def __call__(self, eta: HeightConfig) -> float:
        return float(self.func(eta))


def _occ0(eta):
    return eta[0] - 1


def _pair01(eta):
    return float(eta[0] == 2 and eta[1] == 2)


def interval_length(k: int, cap: Optional[int] = None) -> LocalFunction:
    """``|I_k|``, optionally capped at ``cap``; ``|k|``-local."""

    def f(eta):
        v = interval_decomposition(eta, k, k).length(k)
        return v if cap is None else min(v, cap)

    name = f"interval-len {k}" + ("" if cap is None else f" {cap}")
    return LocalFunction(name, abs(k), math.inf if cap is None else float(cap), f)


BUILTINS: Dict[str, LocalFunction] = {
    "occ0": LocalFunction("occ0", 0, 1.0, _occ0, monotone=True),
    "pair01": LocalFunction("pair01", 0, 1.0, _pair01, monotone=True),
}


def builtin(name: str) -> LocalFunction:
    """Look up ``occ0``, ``pair01`` or ``interval-len k [cap]``."""
    tok = name.replace("_", "-").split()
    if tok and tok[0] == "interval-len":
        if len(tok) not in (2, 3):
            raise ValueError("usage: interval-len k [cap]")
        return interval_length(int(tok[1]), int(tok[2]) if len(tok) == 3 else None)
    try:
        return BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown observable {name!r}; choose occ0, pair01 or interval-len k") from None


# ---------------------------------------------------------------------- #
# one application of L
# ---------------------------------------------------------------------- #
def apply_L(f: LocalFunction, eta: HeightConfig) -> Tuple[float, Tuple[int, int]]:
    """``Lf(eta)`` summed over ``I_{-N-1} .. I_{N+1}``.

    Returns the value and the interval index range that was summed.
    """
    j = f.N + 1
    dec = interval_decomposition(eta, -j, j)
    f0 = f(eta)
    total = 0.0
    for i in dec.sites():
        total += f(topple_add(i, eta).config) - f0
    return total, (-j, j)


# ---------------------------------------------------------------------- #
# iterates on one-position tuples
# ---------------------------------------------------------------------- #
def _ones_tuple(eta: HeightConfig, M: int) -> Tuple[int, ...]:
    dec = interval_decomposition(eta, -M, M)
    return tuple(dec.ones[j] for j in range(-M - 1, M + 1))


def _leaf_config(ones: Tuple[int, ...]) -> HeightConfig:
    lo, hi = ones[0], ones[-1]
    h = np.full(hi - lo + 1, 2, dtype=np.int8)
    h[np.asarray(ones) - lo] = 1
    return HeightConfig(lo, hi, h, Tail.UNSPEC)


def _recentre(ones: Tuple[int, ...], M: int) -> Tuple[int, ...]:
    """Keep ``X_{-M-1} .. X_M`` of a tuple that has at least that many on each side."""
    p0 = next(k for k, x in enumerate(ones) if x >= 0)
    return ones[p0 - M - 1 : p0 + M + 1]


class _Iterator:
    def __init__(self, f: LocalFunction):
        self.f = f
        self.memo: Dict[Tuple[int, Tuple[int, ...]], float] = {}

    def value(self, d: int, ones: Tuple[int, ...]) -> float:
        """``L^d f`` at the configuration whose ones ``X_{-M-1} .. X_M``
        (``M = N + d``) are ``ones``."""
        key = (d, ones)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        if d == 0:
            v = self.f(_leaf_config(ones))
        else:
            M = self.f.N + d
            here = self.value(d - 1, ones[1:-1])
            v = 0.0
            for k in range(1, len(ones)):
                l, r = ones[k - 1], ones[k]
                # grains strictly inside (l, r): merge l and r into one at l + r - i
                for i in range(l + 1, r):
                    nxt = ones[: k - 1] + ones[k + 1 :]
                    new = l + r - i
                    nxt = tuple(sorted(nxt + (new,)))
                    v += self.value(d - 1, _recentre(nxt, M - 1)) - here
                # grain on the one at r
                nxt = ones[:k] + ones[k + 1 :]
                v += self.value(d - 1, _recentre(nxt, M - 1)) - here
        self.memo[key] = v
        return v


def iterate_Ln(f: LocalFunction, eta: HeightConfig, n: int,
               max_depth: int = DEFAULT_MAX_DEPTH) -> float:
    """``L^n f(eta)`` by the recursion ``L^{d} f = sum_i [L^{d-1} f(T_i .) - L^{d-1} f]``.

    Raises
    ------
    DepthLimit
        If ``n > max_depth``.
    InsufficientWindow
        If ``eta`` does not resolve ``I_{-N-n} .. I_{N+n}``.
    """
    if n > max_depth:
        raise DepthLimit(n, max_depth)
    if n == 0:
        return f(eta)
    return _Iterator(f).value(n, _ones_tuple(eta, f.N + n))


def iterate_all(f: LocalFunction, eta: HeightConfig, K: int) -> List[float]:
    """``[L^0 f(eta), ..., L^K f(eta)]`` sharing one memo table."""
    it = _Iterator(f)
    out = [f(eta)]
    if K > 0:
        ones = _ones_tuple(eta, f.N + K)
        for d in range(1, K + 1):
            trim = K - d
            out.append(it.value(d, ones[trim : len(ones) - trim]))
    return out


# ---------------------------------------------------------------------- #
# bounds and the series
# ---------------------------------------------------------------------- #
def _interval_sum(eta: HeightConfig, R: int) -> int:
    """``|I_{-R}| + ... + |I_R|``."""
    dec = interval_decomposition(eta, -R, R)
    return dec.ones[R] - dec.ones[-R - 1]


def bound_Ln(f: LocalFunction, eta: HeightConfig, n: int) -> float:
    """``(|I_{-N-n}| + ... + |I_{N+n}|)^n 2^n ||f||``; ``||f||`` for ``n = 0``."""
    if n == 0:
        return f.sup_norm
    return float(_interval_sum(eta, f.N + n)) ** n * 2.0**n * f.sup_norm


def _a_value(eta: HeightConfig, n_max: int) -> float:
    # finitely many critical sites: every far interval has length 1
    if eta.tail is Tail.ONES:
        return 1.0
    return decency_report(eta, n_max).a_estimate


def radius(eta: HeightConfig, n_max: int = DEFAULT_N_MAX) -> float:
    """``1 / (4 e a)`` with ``a`` the averaged interval length of ``eta``.

    ``a = 1`` for configurations with a ones tail; otherwise the window
    estimate of :func:`sandpile1d.lattice.decency_report` is used.
    """
    return 1.0 / (4.0 * math.e * _a_value(eta, n_max))


@dataclass(frozen=True)
class SeriesResult:
    value: float
    K: int
    tail_bound: float
    radius: float
    t: float
    tail_is_rigorous: bool
    terms: Tuple[float, ...] = ()


class _TailModel:
    """Bounds ``B_k`` and a ratio bound valid for all larger ``k``.

    Beyond a known index ``k1`` the interval sums grow as
    ``S_k <= 2 a k + c``; then
    ``B_{k+1} t / ((k+1) B_k) <= 2 t e (2a + c / (k + 1))`` and the tail
    after ``K`` is at most ``term_{K+1} / (1 - r)``.
    """

    def __init__(self, f: LocalFunction, eta: HeightConfig, t: float, a: float, k1: int):
        self.f, self.t, self.a = f, t, a
        self.S = {k: _interval_sum(eta, f.N + k) for k in range(0, k1 + 1)}
        self.k1 = k1
        self.c = max(0.0, max(self.S[k] - 2 * a * k for k in self.S))

    def S_of(self, k: int) -> float:
        if k in self.S:
            return self.S[k]
        return 2 * self.a * k + self.c

    def log_term(self, k: int) -> float:
        if k == 0:
            return math.log(self.f.sup_norm) if self.f.sup_norm > 0 else -math.inf
        if self.t == 0:
            return -math.inf
        return (k * math.log(self.S_of(k)) + k * math.log(2.0 * self.t)
                + math.log(self.f.sup_norm) - math.lgamma(k + 1))

    def ratio(self, k: int) -> float:
        return 2 * self.t * math.e * (2 * self.a + self.c / (k + 1))

    def tail_after(self, K: int) -> float:
        k = max(K + 1, self.k1 + 1)
        # explicit terms between K + 1 and k1, then the geometric tail
        head = sum(math.exp(self.log_term(j)) for j in range(K + 1, k))
        r = self.ratio(k)
        if r >= 1:
            return math.inf
        return head + math.exp(self.log_term(k)) / (1 - r)


def taylor_semigroup(f: LocalFunction, eta: HeightConfig, t: float, tol: float = 1e-8,
                     max_depth: int = DEFAULT_MAX_DEPTH, n_max: int = DEFAULT_N_MAX,
                     k_search: int = 200) -> SeriesResult:
    """Partial sum ``sum_{k <= K} t^k L^k f(eta) / k!`` with a tail bound below ``tol``.

    ``K`` is the smallest order whose bound-based remainder is below
    ``tol``.  The remainder is rigorous when ``eta`` has a ones tail; for
    other tails it relies on the window estimate of ``a``.

    Raises
    ------
    RadiusExceeded
        If ``t`` is not below :func:`radius`.
    DepthLimit
        If the required ``K`` exceeds ``max_depth``.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if not math.isfinite(f.sup_norm):
        raise ValueError(f"{f.name} is unbounded; the series bound needs a finite sup norm")
    a = _a_value(eta, n_max)
    rad = 1.0 / (4.0 * math.e * a)
    if t >= rad:
        raise RadiusExceeded(f"t = {t} is not below the radius {rad:.6g}")
    rigorous = eta.tail is Tail.ONES
    if t == 0:
        return SeriesResult(f(eta), 0, 0.0, rad, t, rigorous, (f(eta),))
    k1 = _known_depth(eta, f.N, k_search)
    model = _TailModel(f, eta, t, a, k1)
    K = next((k for k in range(k_search) if model.tail_after(k) < tol), None)
    if K is None:
        raise DepthLimit(k_search, max_depth)
    if K > max_depth:
        raise DepthLimit(K, max_depth)
    logger.info("series for %s: K = %d, naive cost ~ %.3g toppling evaluations",
                f.name, K, math.prod(model.S_of(k) for k in range(1, K + 1)))
    derivs = iterate_all(f, eta, K)
    terms = tuple(d * t**k / math.factorial(k) for k, d in enumerate(derivs))
    return SeriesResult(math.fsum(terms), K, model.tail_after(K), rad, t, rigorous, terms)


def _known_depth(eta: HeightConfig, N: int, k_search: int) -> int:
    """Largest ``k`` for which ``I_{-N-k} .. I_{N+k}`` is resolvable and, for a
    ones tail, far enough that every further interval has length 1."""
    if eta.tail is Tail.ONES:
        crit = eta.critical_sites()
        span = 0 if crit.size == 0 else int(np.abs(crit).max()) + 1
        return span + 1
    k = 0
    while k < k_search:
        try:
            _interval_sum(eta, N + k + 1)
        except Exception:
            break
        k += 1
    return k
