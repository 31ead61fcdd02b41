"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``SANDPILE1D_PURE_PYTHON`` is set to a non-empty value,
the pure-Python module is used.  Both expose ``add_grains``, ``run_chain``,
``avalanche_jumps`` and ``run_coupled`` with identical results per seed.
"""

import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

DONE = _pykernels.DONE
GROW = _pykernels.GROW
MAX_EVENTS = _pykernels.MAX_EVENTS

try:
    from . import _ckernels
except ImportError:  # pragma: no cover - depends on the build
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available_backends():
    """Names of the importable backends."""
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module called ``name`` (default: the active one)."""
    if name is None:
        return active
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown or unavailable backend {name!r}") from None


if os.environ.get("SANDPILE1D_PURE_PYTHON") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"
active = _BACKENDS[BACKEND]
logger.debug("kernel backend: %s", BACKEND)
