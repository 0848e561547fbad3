"""DCT-II/III transform pair, band projectors and a single-level Haar split.

Chunks are time-major arrays. A single chunk is ``(N, D)``; a stack of chunks
is ``(B, N, D)``; a 1-D array is treated as a single chunk with ``D = 1``.
Every function returns an array of the same rank it was given.

The DCT pair is the unscaled one::

    C[i] = sum_n a[n] cos(pi/N (n + 1/2) i)
    a[n] = (C[0] + 2 sum_{1 <= i < f} C[i] cos(pi/N (n + 1/2) i)) / N

so ``dct_inverse(dct_forward(a), N) == a``. Energy statements use the
orthonormal rescaling from :func:`orthonormal_coefficients`.
"""
from dataclasses import dataclass

import numpy as np

from . import kernels


def _as_stack(x):
    """Return ``(stack, restore)`` where ``stack`` is float64 ``(B, N, D)``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :, None], lambda y: y[0, :, 0]
    if arr.ndim == 2:
        return arr[None], lambda y: y[0]
    if arr.ndim == 3:
        return arr, lambda y: y
    raise ValueError(f"expected a chunk of rank 1-3, got shape {arr.shape}")


def check_chunk(x, even=False):
    """Validate an action chunk (or stack of chunks) and return it as float64."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim not in (1, 2, 3) or arr.size == 0:
        raise ValueError(f"invalid chunk shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("chunk contains non-finite entries")
    n = arr.shape[0] if arr.ndim == 1 else arr.shape[-2]
    if even and n % 2:
        raise ValueError(f"Haar operations need an even chunk length, got N={n}")
    return arr


def chunk_length(x) -> int:
    arr = np.asarray(x)
    return arr.shape[0] if arr.ndim == 1 else arr.shape[-2]


def _check_cutoff(f, n):
    if isinstance(f, (bool, np.bool_)) or int(f) != f:
        raise ValueError(f"cut-off must be an integer, got {f!r}")
    f = int(f)
    if not 0 <= f <= n:
        raise ValueError(f"cut-off {f} outside [0, {n}]")
    return f


def dct_forward(chunk):
    """Unscaled DCT-II along the time axis, one column per action dimension."""
    stack, restore = _as_stack(check_chunk(chunk))
    return restore(kernels.dct_forward(np.ascontiguousarray(stack)))


def dct_inverse(spectrum, f=None):
    """Reconstruct a chunk from its first ``f`` DCT coefficients (``f=None`` means all)."""
    stack, restore = _as_stack(spectrum)
    n = stack.shape[1]
    f = n if f is None else _check_cutoff(f, n)
    return restore(kernels.dct_inverse(np.ascontiguousarray(stack), f))


def low_pass(chunk, f):
    """Keep the first ``f`` DCT modes.

    ``f == N`` returns an exact copy and ``f == 0`` exact zeros, so the full-band
    filter is a true identity rather than an identity up to rounding.
    """
    stack, restore = _as_stack(check_chunk(chunk))
    n = stack.shape[1]
    f = _check_cutoff(f, n)
    if f == n:
        return restore(stack.copy())
    if f == 0:
        return restore(np.zeros_like(stack))
    cutoffs = np.full(stack.shape[0], f, dtype=np.int64)
    return restore(kernels.lowpass_varying(np.ascontiguousarray(stack), cutoffs))


def low_pass_each(chunks, cutoffs):
    """Low-pass a ``(B, N, D)`` stack with one cut-off per chunk."""
    stack = check_chunk(chunks)
    if stack.ndim != 3:
        raise ValueError("low_pass_each expects a (B, N, D) stack")
    n = stack.shape[1]
    cutoffs = np.asarray(cutoffs, dtype=np.int64)
    if cutoffs.shape != (stack.shape[0],):
        raise ValueError("need exactly one cut-off per chunk")
    if cutoffs.min(initial=0) < 0 or cutoffs.max(initial=0) > n:
        raise ValueError(f"cut-offs outside [0, {n}]")
    return kernels.lowpass_varying(np.ascontiguousarray(stack), cutoffs)


def high_pass(chunk, f):
    """Complement of :func:`low_pass`: ``chunk - low_pass(chunk, f)``."""
    arr = check_chunk(chunk)
    n = chunk_length(arr)
    f = _check_cutoff(f, n)
    if f == n:
        return np.zeros_like(arr)
    if f == 0:
        return arr.copy()
    return arr - low_pass(arr, f)


def orthonormal_coefficients(chunk):
    """DCT coefficients rescaled so that their squared sum equals the chunk energy."""
    coeffs = dct_forward(chunk)
    n = chunk_length(coeffs)
    scale = kernels.orthonormal_scale(n)
    if np.ndim(coeffs) == 1:
        return coeffs * scale
    return coeffs * scale[:, None]


def band_energy(chunk, f):
    """Squared Frobenius norms ``(low, high)`` of the two bands split at ``f``.

    For a stack of chunks both values are per-chunk arrays.
    """
    arr = check_chunk(chunk)
    _check_cutoff(f, chunk_length(arr))
    low = low_pass(arr, f)
    high = arr - low
    axes = tuple(range(max(arr.ndim - 2, 0), arr.ndim))
    return np.sum(low**2, axis=axes), np.sum(high**2, axis=axes)


def mode_energy(chunk):
    """Per-mode energy (orthonormal DCT coefficients squared, summed over dims)."""
    coeffs = orthonormal_coefficients(chunk)
    if np.ndim(coeffs) == 1:
        return coeffs**2
    return np.sum(coeffs**2, axis=-1)


def projector_matrix(n, f, dims=1):
    """Matrix of the low-pass filter acting on a row-major flattened ``(n, dims)`` chunk."""
    f = _check_cutoff(f, n)
    p = kernels.projector_stack(n)[f]
    if dims == 1:
        return np.array(p)
    return np.kron(p, np.eye(dims))


def orthonormal_basis(n):
    """Columns are the orthonormal DCT basis vectors in the time domain."""
    return kernels.cos_table(n).T * kernels.orthonormal_scale(n)[None, :]


@dataclass(frozen=True)
class HaarPair:
    approx: np.ndarray
    detail: np.ndarray

    def energies(self):
        axes = tuple(range(max(self.approx.ndim - 2, 0), self.approx.ndim))
        return np.sum(self.approx**2, axis=axes), np.sum(self.detail**2, axis=axes)


def haar_decompose(chunk):
    """Orthonormal single-level Haar split into approximation and detail halves."""
    arr = check_chunk(chunk, even=True)
    stack, restore = _as_stack(arr)
    approx, detail = kernels.haar_forward(np.ascontiguousarray(stack))
    return HaarPair(restore(approx), restore(detail))


def haar_reconstruct(pair):
    approx = np.asarray(pair.approx, dtype=np.float64)
    detail = np.asarray(pair.detail, dtype=np.float64)
    if approx.shape != detail.shape:
        raise ValueError(f"approx {approx.shape} and detail {detail.shape} differ in shape")
    a_stack, restore = _as_stack(approx)
    d_stack, _ = _as_stack(detail)
    return restore(kernels.haar_inverse(np.ascontiguousarray(a_stack), np.ascontiguousarray(d_stack)))
