"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting the
environment variable ``MEMSTDP_BACKEND=numpy`` (read at import time) forces the
pure-numpy implementations instead; ``MEMSTDP_BACKEND=numba`` makes a missing
numba an error rather than a silent fallback.
"""
import os

_requested = os.environ.get("MEMSTDP_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ImportError(f"MEMSTDP_BACKEND must be auto, numba or numpy, not {_requested!r}")

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

if _requested == "numba" and not HAVE_NUMBA:
    raise ImportError("MEMSTDP_BACKEND=numba but numba is not installed")

DEFAULT_BACKEND = "numba" if (HAVE_NUMBA and _requested != "numpy") else "numpy"


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func


def resolve(backend=None):
    if backend is None:
        return DEFAULT_BACKEND
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend
