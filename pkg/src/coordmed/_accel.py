"""
Numba shim.

Set ``COORDMED_BACKEND=numpy`` to run every kernel through its pure-numpy
twin instead of the JIT-compiled loop version.  Without numba installed the
numpy path is used regardless of the flag.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

ENV_FLAG = "COORDMED_BACKEND"

NUMBA_AVAILABLE = numba is not None


def requested_backend():
    value = os.environ.get(ENV_FLAG, "numba").strip().lower()
    if value not in ("numba", "numpy"):
        raise ValueError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {value!r}")
    return value


def njit(*args, **kwargs):
    if numba is None:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)
