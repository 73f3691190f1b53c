"""Optional numba acceleration for the numeric kernels.

Kernels are written in the numba-compatible subset of numpy. When numba is
importable and ``SWITCHDWELL_DISABLE_JIT`` is unset (or ``0``), they are
compiled with ``numba.njit``; otherwise the plain Python functions are used
unchanged. The uncompiled function is always reachable as ``kernel.py_func``.
"""
import os

_FLAG = "SWITCHDWELL_DISABLE_JIT"


def _jit_requested():
    return os.environ.get(_FLAG, "0").strip().lower() in ("", "0", "false", "no")


try:
    if not _jit_requested():
        raise ImportError
    import numba

    JIT_ENABLED = True
except ImportError:
    numba = None
    JIT_ENABLED = False


def kernel(func):
    """Compile ``func`` with numba when enabled, else return it untouched."""
    if JIT_ENABLED:
        compiled = numba.njit(cache=True, nogil=True)(func)
        return compiled
    func.py_func = func
    return func
