"""Height configurations on Z with values in {1, 2}.

A configuration is stored as a dense window ``[lo, hi]`` plus a tail
convention saying what lies outside the window.  The tail is one of

* ``Tail.ONES``   -- every outside site has height 1 (finitely many critical
  sites, all inside the window),
* ``Tail.TWOS``   -- every outside site has height 2 (only used for the
  all-twos configuration and its finite perturbations),
* ``Tail.UNSPEC`` -- nothing is known outside; reading there is an error.

The module also provides the decomposition of a configuration into the
intervals between consecutive ones, and the finite-window diagnostics used
to estimate the averaged interval length ``a`` and the density of ones.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InsufficientWindow

__all__ = [
    "Tail",
    "HeightConfig",
    "CriticalSet",
    "IntervalDecomposition",
    "DecencyReport",
    "from_critical_set",
    "critical_set_of",
    "interval_decomposition",
    "decency_report",
    "leq",
]


class Tail(enum.Enum):
    ONES = "ones"
    TWOS = "twos"
    UNSPEC = "unspec"

    @property
    def height(self) -> Optional[int]:
        return {Tail.ONES: 1, Tail.TWOS: 2}.get(self)


def _as_heights(values) -> np.ndarray:
    arr = np.array(values, dtype=np.int8).ravel()
    if arr.size and not np.all((arr == 1) | (arr == 2)):
        raise ValueError("heights must all be 1 or 2")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HeightConfig:
    """Configuration ``eta`` with heights in {1, 2}.

    Parameters
    ----------
    lo, hi : int
        Inclusive window bounds, ``lo <= hi``.
    heights : array_like
        ``hi - lo + 1`` values in {1, 2}; ``heights[k]`` is the height at
        site ``lo + k``.
    tail : Tail
        What lies outside the window.

    Instances are immutable.  Equality and hashing are semantic: two
    configurations with different windows but the same heights everywhere
    compare equal (for ``UNSPEC`` tails the windows must match exactly).
    """

    lo: int
    hi: int
    heights: np.ndarray
    tail: Tail = Tail.ONES
    _key: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        lo, hi = int(self.lo), int(self.hi)
        if hi < lo:
            raise ValueError(f"empty window [{lo}, {hi}]")
        h = _as_heights(self.heights)
        if h.size != hi - lo + 1:
            raise ValueError(
                f"window [{lo}, {hi}] needs {hi - lo + 1} heights, got {h.size}"
            )
        tail = Tail(self.tail)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "heights", h)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "_key", self._canonical_key())

    # ------------------------------------------------------------------ #
    # constructors
    # ------------------------------------------------------------------ #
    @classmethod
    def all_ones(cls, lo: int = 0, hi: int = 0) -> "HeightConfig":
        return cls(lo, hi, np.ones(hi - lo + 1, dtype=np.int8), Tail.ONES)

    @classmethod
    def all_twos(cls, lo: int = 0, hi: int = 0) -> "HeightConfig":
        return cls(lo, hi, np.full(hi - lo + 1, 2, dtype=np.int8), Tail.TWOS)

    @classmethod
    def from_heights(
        cls, lo: int, heights: Sequence[int], tail: Tail = Tail.ONES
    ) -> "HeightConfig":
        return cls(lo, lo + len(heights) - 1, heights, tail)

    @classmethod
    def periodic(
        cls, pattern: Sequence[int], lo: int, hi: int, tail: Tail = Tail.UNSPEC
    ) -> "HeightConfig":
        """Window of the periodic configuration ``x -> pattern[x mod p]``."""
        p = len(pattern)
        return cls(lo, hi, [pattern[x % p] for x in range(lo, hi + 1)], tail)

    @classmethod
    def from_text(cls, text: str) -> "HeightConfig":
        """Parse ``lo hi tail h(lo) ... h(hi)``; tail is ones, twos or unspec."""
        tokens = text.split()
        if len(tokens) < 4:
            raise ValueError("expected 'lo hi tail h(lo) ... h(hi)'")
        lo, hi = int(tokens[0]), int(tokens[1])
        return cls(lo, hi, [int(v) for v in tokens[3:]], Tail(tokens[2].lower()))

    def to_text(self) -> str:
        body = " ".join(str(int(v)) for v in self.heights)
        return f"{self.lo} {self.hi} {self.tail.value} {body}"

    # ------------------------------------------------------------------ #
    # reads
    # ------------------------------------------------------------------ #
    def __getitem__(self, x: int) -> int:
        if self.lo <= x <= self.hi:
            return int(self.heights[x - self.lo])
        h = self.tail.height
        if h is None:
            raise InsufficientWindow(
                f"site {x} outside window [{self.lo}, {self.hi}] with unspecified tail"
            )
        return h

    def window(self, lo: int, hi: int) -> "HeightConfig":
        """Same configuration stored on ``[lo, hi]`` (crop or extend)."""
        if lo == self.lo and hi == self.hi:
            return self
        if self.tail is Tail.UNSPEC and (lo < self.lo or hi > self.hi):
            raise InsufficientWindow(
                f"cannot extend [{self.lo}, {self.hi}] to [{lo}, {hi}]: tail unspecified"
            )
        fill = self.tail.height or 1
        out = np.full(hi - lo + 1, fill, dtype=np.int8)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo : b - lo + 1] = self.heights[a - self.lo : b - self.lo + 1]
        return HeightConfig(lo, hi, out, self.tail)

    def covering(self, lo: int, hi: int) -> "HeightConfig":
        """Extend the window so that it contains ``[lo, hi]``."""
        return self.window(min(lo, self.lo), max(hi, self.hi))

    def with_sites(self, changes: Iterable[Tuple[int, int]]) -> "HeightConfig":
        """Return a copy with ``eta(x) = h`` for every ``(x, h)`` in changes."""
        changes = list(changes)
        if not changes:
            return self
        xs = [x for x, _ in changes]
        base = self.covering(min(xs), max(xs))
        out = base.heights.copy()
        for x, h in changes:
            out[x - base.lo] = h
        return HeightConfig(base.lo, base.hi, out, base.tail)

    def truncate(self, m: int) -> "HeightConfig":
        """``eta'_m``: equal to eta on ``[-m, m]`` and 1 elsewhere."""
        inner = self.window(-m, m)
        return HeightConfig(-m, m, inner.heights, Tail.ONES)

    def clamp(self, n: int) -> "HeightConfig":
        """``eta^n``: alias of :meth:`truncate` used for finite volumes."""
        return self.truncate(n)

    def critical_sites(self) -> np.ndarray:
        """Critical sites inside the window."""
        return np.flatnonzero(self.heights == 2) + self.lo

    def ones(self) -> np.ndarray:
        """Sites with height 1 inside the window."""
        return np.flatnonzero(self.heights == 1) + self.lo

    # ------------------------------------------------------------------ #
    # equality
    # ------------------------------------------------------------------ #
    def _canonical_key(self) -> tuple:
        h, lo = self.heights, self.lo
        fill = self.tail.height
        if fill is not None:
            idx = np.flatnonzero(h != fill)
            if idx.size == 0:
                return (self.tail, 0, 0, bytes([fill]))
            a, b = int(idx[0]), int(idx[-1])
            return (self.tail, lo + a, lo + b, h[a : b + 1].tobytes())
        return (self.tail, lo, self.hi, h.tobytes())

    def canonical(self) -> "HeightConfig":
        tail, lo, hi, raw = self._key
        return HeightConfig(lo, hi, np.frombuffer(raw, dtype=np.int8), tail)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HeightConfig):
            return NotImplemented
        return self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __le__(self, other: "HeightConfig") -> bool:
        return leq(self, other)

    def __ge__(self, other: "HeightConfig") -> bool:
        return leq(other, self)

    def __repr__(self) -> str:
        body = "".join(str(int(v)) for v in self.heights)
        return f"HeightConfig([{self.lo},{self.hi}] {body} tail={self.tail.value})"


def leq(xi: HeightConfig, eta: HeightConfig) -> bool:
    """Pointwise order ``xi <= eta`` over all of Z."""
    if Tail.UNSPEC in (xi.tail, eta.tail):
        # Only the unspecified side's window is known; compare there.
        known = [c for c in (xi, eta) if c.tail is Tail.UNSPEC]
        lo, hi = known[0].lo, known[0].hi
        if any((c.lo, c.hi) != (lo, hi) for c in known):
            raise InsufficientWindow("order undecidable outside the stored windows")
    else:
        lo, hi = min(xi.lo, eta.lo), max(xi.hi, eta.hi)
        if xi.tail.height > eta.tail.height:
            return False
    return not np.any(xi.window(lo, hi).heights > eta.window(lo, hi).heights)


@dataclass(frozen=True)
class CriticalSet:
    """Finite, sorted, duplicate-free set of critical sites."""

    sites: Tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sites", tuple(sorted({int(x) for x in self.sites})))

    @classmethod
    def of(cls, sites: Iterable[int]) -> "CriticalSet":
        return cls(tuple(sites))

    def __len__(self) -> int:
        return len(self.sites)

    def __iter__(self) -> Iterator[int]:
        return iter(self.sites)

    def __contains__(self, x) -> bool:
        return x in set(self.sites)


def from_critical_set(A) -> HeightConfig:
    """The configuration ``eta_A``: height 2 exactly on A, 1 elsewhere."""
    sites = CriticalSet.of(A).sites
    if not sites:
        return HeightConfig.all_ones()
    lo, hi = sites[0], sites[-1]
    h = np.ones(hi - lo + 1, dtype=np.int8)
    h[np.asarray(sites) - lo] = 2
    return HeightConfig(lo, hi, h, Tail.ONES)


def critical_set_of(eta: HeightConfig) -> CriticalSet:
    if eta.tail is not Tail.ONES:
        raise InsufficientWindow("critical set is finite only for a ones tail")
    return CriticalSet(tuple(int(x) for x in eta.critical_sites()))


# ---------------------------------------------------------------------- #
# interval decomposition
# ---------------------------------------------------------------------- #
@dataclass(frozen=True)
class IntervalDecomposition:
    """Positions ``X_j`` of the ones and intervals ``I_j = (X_{j-1}, X_j]``.

    ``ones`` maps ``j -> X_j`` for ``j_lo - 1 <= j <= j_hi``; ``intervals``
    maps ``j -> (first, last)`` (inclusive site range) for
    ``j_lo <= j <= j_hi``.
    """

    j_lo: int
    j_hi: int
    ones: Dict[int, int]
    intervals: Dict[int, Tuple[int, int]]

    def length(self, j: int) -> int:
        a, b = self.intervals[j]
        return b - a + 1

    def lengths(self) -> List[int]:
        return [self.length(j) for j in range(self.j_lo, self.j_hi + 1)]

    def sites(self) -> range:
        """All sites of ``I_{j_lo} u ... u I_{j_hi}``."""
        return range(self.ones[self.j_lo - 1] + 1, self.ones[self.j_hi] + 1)

    def interval_of(self, x: int) -> int:
        for j, (a, b) in self.intervals.items():
            if a <= x <= b:
                return j
        raise KeyError(x)


def _next_one(eta: HeightConfig, start: int, step: int) -> int:
    """First site ``x = start, start+step, ...`` with ``eta(x) = 1``."""
    x = start
    h, lo, hi = eta.heights, eta.lo, eta.hi
    while lo <= x <= hi:
        if h[x - lo] == 1:
            return x
        x += step
    if eta.tail is Tail.ONES:
        return x
    raise InsufficientWindow(
        f"no one found scanning from {start} in direction {step:+d} "
        f"inside [{lo}, {hi}] (tail {eta.tail.value})"
    )


def interval_decomposition(eta: HeightConfig, j_lo: int, j_hi: int) -> IntervalDecomposition:
    """Resolve ``X_{j_lo-1}, ..., X_{j_hi}`` and the intervals between them.

    Raises
    ------
    InsufficientWindow
        If a needed ``X_j`` lies outside the window and the tail is not ones.
    """
    if j_hi < j_lo:
        raise ValueError("j_hi < j_lo")
    ones = {0: _next_one(eta, 0, +1)}
    for j in range(1, j_hi + 1):
        ones[j] = _next_one(eta, ones[j - 1] + 1, +1)
    for j in range(-1, j_lo - 2, -1):
        ones[j] = _next_one(eta, ones[j + 1] - 1, -1)
    ones = {j: x for j, x in ones.items() if j_lo - 1 <= j <= j_hi}
    intervals = {j: (ones[j - 1] + 1, ones[j]) for j in range(j_lo, j_hi + 1)}
    return IntervalDecomposition(j_lo, j_hi, ones, intervals)


@dataclass(frozen=True)
class DecencyReport:
    """Finite-window diagnostics for decency.

    ``partial_a[n - 1] = (|I_{-n}| + ... + |I_n|) / (2n)`` for ``n = 1..n_max``.
    """

    partial_a: np.ndarray
    a_estimate: float
    rho_estimate: float
    radius: float


def decency_report(eta: HeightConfig, n_max: int) -> DecencyReport:
    """Estimate ``a(eta)``, the density of ones and the series radius.

    The cumulative sums ``C(n) = |I_{-n}| + ... + |I_n|`` grow like
    ``2 a n``; ``a_estimate`` is half the least-squares slope of ``C`` over
    ``n in [ceil(n_max / 2), n_max]``, which is exact for eventually
    periodic interval sequences.  The limsup itself is not computable from
    a window.
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    dec = interval_decomposition(eta, -n_max, n_max)
    lengths = np.array(dec.lengths(), dtype=float)
    centre = n_max
    cums = np.array(
        [lengths[centre - n : centre + n + 1].sum() for n in range(1, n_max + 1)]
    )
    partial = cums / (2.0 * np.arange(1, n_max + 1))
    ns = np.arange(math.ceil(n_max / 2), n_max + 1)
    slope = np.polyfit(ns, cums[ns - 1], 1)[0]
    a_est = float(slope / 2.0)
    rho = (2 * n_max + 1) / float(lengths.sum())
    return DecencyReport(partial, a_est, rho, 1.0 / (4.0 * math.e * a_est))
