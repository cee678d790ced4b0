"""Optional numba acceleration for the hot kernels.

Every kernel in :mod:`cursive.kernels` is written as a plain numpy function
and compiled with ``@njit`` when numba is available. Setting the environment
variable ``CURSIVE_NUMBA=0`` (before import) selects the pure-numpy fallback:
the same function object runs uncompiled, so both paths share one source of
truth. ``kernel.py_func`` exposes the uncompiled version for benchmarking
when the JIT is active.
"""

from __future__ import annotations

import os

NUMBA_ENABLED = os.environ.get("CURSIVE_NUMBA", "1") != "0"

if NUMBA_ENABLED:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover - numba is a hard dep, belt+braces
        NUMBA_ENABLED = False


def maybe_njit(func=None, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    if func is not None:
        return maybe_njit(**kwargs)(func)
    if not NUMBA_ENABLED:
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _njit(**kwargs)


def py_func(kernel):
    """Return the pure-python implementation backing a (possibly jitted) kernel."""
    return getattr(kernel, "py_func", kernel)
