"""Hot kernels with a compiled backend and a pure-Python fallback.

The Cython extension is used when it has been built and importable; setting
``DISTDUALPROX_PURE=1`` forces the pure-Python implementation.
"""

import os

from . import _pykernels as python_backend
from ._pykernels import G_BOX, G_L1, G_L1BOX, G_ZERO

compiled_backend = None
if os.environ.get("DISTDUALPROX_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

box_qp = _active.box_qp
weighted_pg_run = _active.weighted_pg_run

__all__ = [
    "BACKEND",
    "G_BOX",
    "G_L1",
    "G_L1BOX",
    "G_ZERO",
    "box_qp",
    "compiled_backend",
    "python_backend",
    "weighted_pg_run",
]
