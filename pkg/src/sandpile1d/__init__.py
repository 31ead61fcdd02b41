"""One-dimensional abelian sandpile laboratory.

Exact toppling dynamics, continuous-time simulation on Z and on finite
volumes, monotone couplings, exact small-volume analysis and the pointwise
generator series.
"""

__version__ = "0.1.0"

from .errors import (
    DepthLimit,
    InsufficientWindow,
    InvalidGrainField,
    InvalidSite,
    NotOrdered,
    NumericalFailure,
    RadiusExceeded,
    SandpileError,
    SizeLimit,
)
from .lattice import CriticalSet, HeightConfig, Tail, critical_set_of, from_critical_set
from .toppling import INF, GrainField, k_minus, k_plus, phi, stabilize, topple_add
from .kernels import BACKEND

__all__ = [
    "__version__",
    "BACKEND",
    "CriticalSet",
    "DepthLimit",
    "GrainField",
    "HeightConfig",
    "INF",
    "InsufficientWindow",
    "InvalidGrainField",
    "InvalidSite",
    "NotOrdered",
    "NumericalFailure",
    "RadiusExceeded",
    "SandpileError",
    "SizeLimit",
    "Tail",
    "critical_set_of",
    "from_critical_set",
    "k_minus",
    "k_plus",
    "phi",
    "stabilize",
    "topple_add",
]
