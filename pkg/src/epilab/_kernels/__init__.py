"""Grid energy kernels with a compile-time fast path.

The compiled extension is preferred when it imported cleanly; setting
EPILAB_PURE_PYTHON=1 forces the NumPy fallback.  Both expose the same two
functions with identical semantics:

    energy(values, active, free, q, kappa, h) -> float
    energy_and_grad(values, active, free, q, kappa, h) -> (float, grad)
"""

import os

from . import numpy_impl

if os.environ.get("EPILAB_PURE_PYTHON") == "1":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import _grid_cy as _impl  # type: ignore[no-redef]
        BACKEND = "compiled"
    except ImportError:
        _impl = numpy_impl
        BACKEND = "numpy"

energy = _impl.energy
energy_and_grad = _impl.energy_and_grad


def backend_name() -> str:
    return BACKEND
