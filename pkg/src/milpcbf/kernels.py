"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy implementation in ``_pykernels`` is used. Setting the environment
variable ``MILPCBF_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pykernels

OPTIMAL = _pykernels.OPTIMAL
UNBOUNDED = _pykernels.UNBOUNDED
INFEASIBLE = _pykernels.INFEASIBLE
ITER_LIMIT = _pykernels.ITER_LIMIT

BACKENDS = {"python": _pykernels}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["compiled"] = _ckernels

if _ckernels is not None and os.environ.get("MILPCBF_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "compiled"
else:
    BACKEND = "python"

_active = BACKENDS[BACKEND]


def get(name=None):
    """Return the kernel module ``name`` (default: the active backend)."""
    if name is None:
        return _active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None


def use(name):
    """Switch the process-wide backend; returns the previous name."""
    global _active, BACKEND
    mod = get(name)
    prev = BACKEND
    _active, BACKEND = mod, name
    return prev
