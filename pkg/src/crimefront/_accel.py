"""Backend switch for the hot time-stepping kernels.

Set ``CRIMEFRONT_BACKEND=numpy`` to force the pure numpy/LAPACK path even
when numba is importable.
"""

import os

BACKEND_ENV = "CRIMEFRONT_BACKEND"

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAS_NUMBA = numba is not None


def requested_backend():
    value = os.environ.get(BACKEND_ENV, "numba").strip().lower()
    if value not in ("numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {value!r}")
    return value


def use_numba():
    return HAS_NUMBA and requested_backend() == "numba"


if HAS_NUMBA:
    njit = numba.njit(cache=False, nogil=True)
else:  # pragma: no cover
    def njit(fn):
        return fn
