"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``GAITMTFL_BACKEND``:

* unset or ``numba``: use the numba-compiled kernels (falling back to
  numpy with a note in ``BACKEND_NAME`` if numba cannot be imported);
* ``numpy``: force the pure-numpy implementations.

Both backends expose the same functions with identical semantics; only
floating-point summation order differs. ``benchmarks/bench_backends.py``
compares their throughput.
"""

import os

from . import numpy_backend

LOSS_LOGISTIC = numpy_backend.LOSS_LOGISTIC
LOSS_LEAST_SQUARES = numpy_backend.LOSS_LEAST_SQUARES

_requested = os.environ.get("GAITMTFL_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise RuntimeError(
        f"GAITMTFL_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numba":
    try:
        from . import numba_backend as _impl

        BACKEND_NAME = "numba"
    except ImportError:
        _impl = numpy_backend
        BACKEND_NAME = "numpy (numba unavailable)"
else:
    _impl = numpy_backend
    BACKEND_NAME = "numpy"

logistic_value_grad = _impl.logistic_value_grad
least_squares_value_grad = _impl.least_squares_value_grad
prox_solve = _impl.prox_solve
gmm_fit_diag = _impl.gmm_fit_diag


def warmup():
    """Pre-compile the numba kernels (no-op on the numpy backend)."""
    fn = getattr(_impl, "warmup", None)
    if fn is not None:
        fn()


def active_backend():
    return BACKEND_NAME
