"""Numba toggle for the hot kernels.

Kernels compile with numba's ``@njit`` when numba imports cleanly and the
``CHRONOFLOW_NO_NUMBA`` environment variable is unset.  Setting
``CHRONOFLOW_NO_NUMBA=1`` selects the interpreted numpy fallback: the same
source runs uncompiled, and because all randomness is pre-drawn outside the
kernels the two paths return bit-identical results.
"""

import os


def _detect() -> bool:
    flag = os.environ.get("CHRONOFLOW_NO_NUMBA", "").strip().lower()
    if flag in {"1", "true", "yes", "on"}:
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


NUMBA_ENABLED = _detect()

if NUMBA_ENABLED:
    from numba import njit
else:
    def njit(*args, **kwargs):
        # identity decorator, tolerant of both @njit and @njit(...) forms
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


def jit_kernel(func):
    """Compile ``func`` when numba is active, otherwise return it unchanged."""
    if NUMBA_ENABLED:
        return njit(cache=True)(func)
    return func


def python_impl(kernel):
    """The uncompiled implementation of a kernel (fallback path)."""
    return getattr(kernel, "py_func", kernel)
