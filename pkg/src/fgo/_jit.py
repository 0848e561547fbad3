"""Numba switch.

Set ``FGO_DISABLE_JIT=1`` to run every kernel through its pure-numpy
implementation instead of the compiled loops. When numba is not importable
the numpy path is used unconditionally.
"""
import os

_DISABLED = os.environ.get("FGO_DISABLE_JIT", "").strip().lower() in ("1", "true", "yes", "on")

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba_njit = None
    HAVE_NUMBA = False

USE_JIT = HAVE_NUMBA and not _DISABLED


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, otherwise the identity decorator.

    The fallback keeps the loop kernels importable (and testable, slowly) on
    machines without numba.
    """
    kwargs.setdefault("cache", True)

    def wrap(fn):
        if HAVE_NUMBA:
            return _numba_njit(**kwargs)(fn)
        return fn

    if len(args) == 1 and callable(args[0]):
        return wrap(args[0])
    return wrap
