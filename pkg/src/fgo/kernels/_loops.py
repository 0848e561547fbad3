"""Explicit-loop kernels compiled with numba.

Each public function mirrors the signature of its counterpart in
``_numpy`` and must agree with it to rounding error.
"""
import math

import numpy as np

from .._jit import njit
from ._tables import cos_table, synthesis_table

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@njit
def _analysis(x, table):
    b, n, d = x.shape
    out = np.zeros((b, n, d))
    for s in range(b):
        for i in range(n):
            for t in range(n):
                c = table[i, t]
                for j in range(d):
                    out[s, i, j] += c * x[s, t, j]
    return out


@njit
def _synthesis(coeffs, table, f):
    b, n, d = coeffs.shape
    out = np.zeros((b, n, d))
    for s in range(b):
        for t in range(n):
            for i in range(f):
                w = table[t, i]
                for j in range(d):
                    out[s, t, j] += w * coeffs[s, i, j]
    return out


@njit
def _lowpass_rows(x, analysis, synthesis, cutoffs):
    b, n, d = x.shape
    out = np.zeros((b, n, d))
    coeff = np.empty((n, d))
    for s in range(b):
        f = cutoffs[s]
        if f >= n:
            out[s] = x[s]
            continue
        if f <= 0:
            continue
        coeff[:] = 0.0
        for i in range(f):
            for t in range(n):
                c = analysis[i, t]
                for j in range(d):
                    coeff[i, j] += c * x[s, t, j]
        for t in range(n):
            for i in range(f):
                w = synthesis[t, i]
                for j in range(d):
                    out[s, t, j] += w * coeff[i, j]
    return out


def dct_forward(x):
    return _analysis(x, cos_table(x.shape[1]))


def dct_inverse(coeffs, f):
    return _synthesis(coeffs, synthesis_table(coeffs.shape[1]), int(f))


def lowpass_varying(x, cutoffs):
    n = x.shape[1]
    return _lowpass_rows(x, cos_table(n), synthesis_table(n), np.asarray(cutoffs, dtype=np.int64))


@njit
def haar_forward(x):
    b, n, d = x.shape
    m = n // 2
    approx = np.empty((b, m, d))
    detail = np.empty((b, m, d))
    for s in range(b):
        for k in range(m):
            for j in range(d):
                e = x[s, 2 * k, j]
                o = x[s, 2 * k + 1, j]
                approx[s, k, j] = (e + o) * _INV_SQRT2
                detail[s, k, j] = (e - o) * _INV_SQRT2
    return approx, detail


@njit
def haar_inverse(approx, detail):
    b, m, d = approx.shape
    out = np.empty((b, 2 * m, d))
    for s in range(b):
        for k in range(m):
            for j in range(d):
                a = approx[s, k, j]
                h = detail[s, k, j]
                out[s, 2 * k, j] = (a + h) * _INV_SQRT2
                out[s, 2 * k + 1, j] = (a - h) * _INV_SQRT2
    return out


@njit
def third_difference(x):
    b, n, d = x.shape
    out = np.empty((b, n - 3, d))
    for s in range(b):
        for t in range(3, n):
            for j in range(d):
                out[s, t - 3, j] = (
                    x[s, t, j] - 3.0 * x[s, t - 1, j] + 3.0 * x[s, t - 2, j] - x[s, t - 3, j]
                )
    return out


@njit
def total_variation(x):
    b, n, d = x.shape
    out = np.zeros(b)
    for s in range(b):
        acc = 0.0
        for t in range(n - 1):
            for j in range(d):
                acc += abs(x[s, t + 1, j] - x[s, t, j])
        out[s] = acc / (d * (n - 1))
    return out


@njit
def gelu(z):
    out = np.empty_like(z)
    flat_in = z.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        v = flat_in[i]
        flat_out[i] = 0.5 * v * (1.0 + math.tanh(_SQRT_2_OVER_PI * (v + _GELU_C * v * v * v)))
    return out


@njit
def gelu_grad(z):
    out = np.empty_like(z)
    flat_in = z.ravel()
    flat_out = out.ravel()
    for i in range(flat_in.size):
        v = flat_in[i]
        t = math.tanh(_SQRT_2_OVER_PI * (v + _GELU_C * v * v * v))
        dinner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * v * v)
        flat_out[i] = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner
    return out
