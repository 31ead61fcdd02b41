"""Toppling maps on Z and on finite volumes, the coupling site map and
stabilization of grain fields.

Adding a grain to a configuration with heights in {1, 2} has a closed form:
if the target has height 1 it becomes 2; otherwise the avalanche is felt
only between the nearest ones on either side, which both become 2 while a
single new 1 appears at the mirror position of the target inside that
stretch.  When one side has no 1 the grain goes to the nearest one on the
other side, and when neither side has a 1 nothing changes.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import kernels
from .errors import InsufficientWindow, InvalidGrainField, InvalidSite, NotOrdered
from .lattice import HeightConfig, Tail, leq

logger = logging.getLogger(__name__)

__all__ = [
    "INF",
    "ExtNat",
    "Case",
    "TopplingOutcome",
    "GrainField",
    "k_plus",
    "k_minus",
    "topple_add",
    "phi",
    "topple_add_finite",
    "stabilize",
    "stabilize_bruteforce",
]


class _Infinity:
    """The point at infinity of the extended naturals.

    Compares above every integer.  Arithmetic is deliberately unsupported.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    __str__ = __repr__

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("sandpile1d.INF")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()
ExtNat = Union[int, _Infinity]


class Case(enum.Enum):
    """Which branch of the toppling map applied.

    ``RIGHT_ESCAPE``: no 1 to the right, the grain fills the nearest 1 on the
    left.  ``LEFT_ESCAPE``: the mirror image.
    """

    BIRTH = "Birth"
    INTERIOR = "Interior"
    RIGHT_ESCAPE = "RightEscape"
    LEFT_ESCAPE = "LeftEscape"
    ALL_TWOS = "AllTwos"

    @property
    def index(self) -> int:
        """Conventional case number 1..5."""
        return _CASE_INDEX[self]


_CASE_INDEX = {
    Case.BIRTH: 1,
    Case.INTERIOR: 2,
    Case.RIGHT_ESCAPE: 3,
    Case.LEFT_ESCAPE: 4,
    Case.ALL_TWOS: 5,
}


@dataclass(frozen=True)
class TopplingOutcome:
    config: HeightConfig
    case: Case
    k_plus: ExtNat
    k_minus: ExtNat
    hole: Optional[int] = None


def _scan(eta: HeightConfig, start: int, step: int) -> ExtNat:
    """Distance from ``start`` to the first 1 in direction ``step``."""
    h, lo, hi = eta.heights, eta.lo, eta.hi
    x = start
    while lo <= x <= hi:
        if h[x - lo] == 1:
            return abs(x - start)
        x += step
    if eta.tail is Tail.ONES:
        return abs(x - start)
    if eta.tail is Tail.TWOS:
        return INF
    raise InsufficientWindow(
        f"scan from {start} left the window [{lo}, {hi}] with unspecified tail"
    )


def k_plus(i: int, eta: HeightConfig) -> ExtNat:
    """``inf{j >= 0 : eta(i + j) = 1}``."""
    return _scan(eta, i, +1)


def k_minus(i: int, eta: HeightConfig) -> ExtNat:
    """``inf{j > 0 : eta(i - j) = 1}``."""
    d = _scan(eta, i - 1, -1)
    return INF if d is INF else d + 1


def topple_add(i: int, eta: HeightConfig) -> TopplingOutcome:
    """Add one grain at ``i`` and stabilize on Z.

    Parameters
    ----------
    i : int
        Target site.
    eta : HeightConfig
        Input configuration; windows with a ones tail are extended as needed.

    Returns
    -------
    TopplingOutcome
        The new configuration together with the branch taken.

    Raises
    ------
    InsufficientWindow
        If a scan leaves a window whose tail is unspecified.
    """
    kp = k_plus(i, eta)
    if kp == 0:
        return TopplingOutcome(eta.with_sites([(i, 2)]), Case.BIRTH, 0, k_minus(i, eta))
    km = k_minus(i, eta)
    if kp is INF and km is INF:
        return TopplingOutcome(eta, Case.ALL_TWOS, INF, INF)
    if kp is INF:
        return TopplingOutcome(eta.with_sites([(i - km, 2)]), Case.RIGHT_ESCAPE, kp, km)
    if km is INF:
        return TopplingOutcome(eta.with_sites([(i + kp, 2)]), Case.LEFT_ESCAPE, kp, km)
    hole = i + kp - km
    out = eta.with_sites([(i - km, 2), (i + kp, 2), (hole, 1)])
    return TopplingOutcome(out, Case.INTERIOR, kp, km, hole)


def phi(i: int, eta: HeightConfig, xi: HeightConfig) -> ExtNat:
    """Site at which ``xi`` topples when ``eta`` topples at ``i``.

    This is the unique site whose avalanche in ``xi`` opens a 1 at the same
    place as the avalanche at ``i`` in ``eta``, or ``INF`` when ``xi``
    already has a 1 there.

    Raises
    ------
    NotOrdered
        If ``xi <= eta`` fails.
    InvalidSite
        If ``eta(i) != 2``.
    """
    if eta[i] != 2:
        raise InvalidSite(f"eta({i}) = {eta[i]}, expected 2")
    if not leq(xi, eta):
        raise NotOrdered("phi requires xi <= eta")
    h = topple_add(i, eta).hole
    if h is None:
        # no 1 is created in eta (escape or all-twos case); xi is not moved
        return INF
    if xi[h] == 1:
        return INF
    kp, km = k_plus(h, xi), k_minus(h, xi)
    if kp is INF or km is INF:
        raise InsufficientWindow("coupling site undefined: xi has no 1 on one side")
    return h + kp - km


def topple_add_finite(n: int, i: int, eta: HeightConfig) -> HeightConfig:
    """Toppling map on ``[-n, n]`` with fixed ones outside (sand is lost there)."""
    if abs(i) > n:
        raise InvalidSite(f"site {i} outside [-{n}, {n}]")
    return topple_add(i, eta.clamp(n)).config.clamp(n)


@dataclass(frozen=True, eq=False)
class GrainField:
    """Nonnegative grain counts on ``[lo, hi]``."""

    lo: int
    hi: int
    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64).ravel()
        if c.size != self.hi - self.lo + 1:
            raise ValueError(f"window [{self.lo}, {self.hi}] needs {self.hi - self.lo + 1} counts")
        if np.any(c < 0):
            raise InvalidGrainField("grain counts must be nonnegative")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @classmethod
    def from_counts(cls, lo: int, counts) -> "GrainField":
        counts = list(counts)
        return cls(lo, lo + len(counts) - 1, counts)

    @classmethod
    def from_text(cls, text: str) -> "GrainField":
        tok = text.split()
        if len(tok) < 3:
            raise ValueError("expected 'lo hi c(lo) ... c(hi)'")
        return cls(int(tok[0]), int(tok[1]), [int(v) for v in tok[2:]])

    def to_text(self) -> str:
        return f"{self.lo} {self.hi} " + " ".join(str(int(v)) for v in self.counts)

    def on(self, n: int) -> np.ndarray:
        """Counts on ``[-n, n]``; the field must cover that volume."""
        if self.lo > -n or self.hi < n:
            raise InsufficientWindow(f"grain field [{self.lo}, {self.hi}] does not cover [-{n}, {n}]")
        c = self.counts[-n - self.lo : n - self.lo + 1]
        if np.any(c == 0):
            raise InvalidGrainField("every site of the volume needs at least one grain")
        return c


def stabilize(n: int, xi: GrainField, backend: Optional[str] = None) -> HeightConfig:
    """Start from all ones on ``[-n, n]``, add ``xi(i) - 1`` grains at each site.

    Uses the closed-form toppling map, so the cost is linear in the number of
    grains times the avalanche length.
    """
    c = xi.on(n)
    sites = np.repeat(np.arange(2 * n + 1, dtype=np.int64), c - 1)
    h = np.ones(2 * n + 1, dtype=np.int8)
    kernels.get_backend(backend).add_grains(h, sites)
    return HeightConfig(-n, n, h, Tail.ONES)


def stabilize_bruteforce(n: int, xi: GrainField, seed=None) -> HeightConfig:
    """Literal grain dynamics with a random toppling order.

    Any site holding more than two grains sends one grain to each neighbour;
    grains pushed beyond ``+-n`` disappear.
    """
    c = xi.on(n).copy()
    rng = np.random.default_rng(seed)
    w = c.size
    while True:
        unstable = np.flatnonzero(c > 2)
        if unstable.size == 0:
            break
        j = int(rng.choice(unstable))
        c[j] -= 2
        if j > 0:
            c[j - 1] += 1
        if j < w - 1:
            c[j + 1] += 1
    return HeightConfig(-n, n, c.astype(np.int8), Tail.ONES)
