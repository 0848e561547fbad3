"""Vectorised numpy kernels. Inputs are float64 arrays shaped (batch, time, dims)."""
import numpy as np

from ._tables import cos_table, projector_stack, synthesis_table

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
_GELU_C = 0.044715


def dct_forward(x):
    return np.einsum("it,btd->bid", cos_table(x.shape[1]), x)


def dct_inverse(coeffs, f):
    n = coeffs.shape[1]
    if f == 0:
        return np.zeros_like(coeffs)
    w = synthesis_table(n)[:, :f]
    return np.einsum("ti,bid->btd", w, coeffs[:, :f, :])


def lowpass_varying(x, cutoffs):
    stack = projector_stack(x.shape[1])
    return np.einsum("bts,bsd->btd", stack[cutoffs], x)


def haar_forward(x):
    even = x[:, 0::2, :]
    odd = x[:, 1::2, :]
    return (even + odd) / np.sqrt(2.0), (even - odd) / np.sqrt(2.0)


def haar_inverse(approx, detail):
    b, m, d = approx.shape
    out = np.empty((b, 2 * m, d))
    out[:, 0::2, :] = (approx + detail) / np.sqrt(2.0)
    out[:, 1::2, :] = (approx - detail) / np.sqrt(2.0)
    return out


def third_difference(x):
    return x[:, 3:, :] - 3.0 * x[:, 2:-1, :] + 3.0 * x[:, 1:-2, :] - x[:, :-3, :]


def total_variation(x):
    return np.abs(np.diff(x, axis=1)).mean(axis=(1, 2))


def gelu(z):
    inner = _SQRT_2_OVER_PI * (z + _GELU_C * z**3)
    return 0.5 * z * (1.0 + np.tanh(inner))


def gelu_grad(z):
    inner = _SQRT_2_OVER_PI * (z + _GELU_C * z**3)
    t = np.tanh(inner)
    dinner = _SQRT_2_OVER_PI * (1.0 + 3.0 * _GELU_C * z**2)
    return 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * dinner
