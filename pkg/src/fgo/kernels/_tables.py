from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def cos_table(n: int) -> np.ndarray:
    """``M[i, t] = cos(pi / n * (t + 1/2) * i)``; rows are frequencies."""
    i = np.arange(n, dtype=np.float64)[:, None]
    t = np.arange(n, dtype=np.float64)[None, :]
    table = np.cos(np.pi / n * (t + 0.5) * i)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def synthesis_table(n: int) -> np.ndarray:
    """``W[t, i]`` such that ``x = W[:, :f] @ C[:f]`` inverts the unscaled DCT-II."""
    weights = np.full(n, 2.0 / n)
    weights[0] = 1.0 / n
    table = cos_table(n).T * weights[None, :]
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def projector_stack(n: int) -> np.ndarray:
    """``P[f]`` is the time-domain low-pass projector keeping ``f`` modes, f = 0..n.

    ``P[0]`` is exactly zero and ``P[n]`` exactly the identity.
    """
    m = cos_table(n)
    w = synthesis_table(n)
    stack = np.empty((n + 1, n, n))
    stack[0] = 0.0
    for f in range(1, n):
        stack[f] = w[:, :f] @ m[:f, :]
    stack[n] = np.eye(n)
    stack.setflags(write=False)
    return stack


@lru_cache(maxsize=None)
def orthonormal_scale(n: int) -> np.ndarray:
    """Per-coefficient factors turning the unscaled DCT-II into the orthonormal one."""
    s = np.full(n, np.sqrt(2.0 / n))
    s[0] = np.sqrt(1.0 / n)
    s.setflags(write=False)
    return s
