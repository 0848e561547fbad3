"""Frequency-conditioned noise predictors.

Both predictors expose ``predict(noisy, k, context, f)`` with ``noisy`` shaped
``(B, N, D)``, ``context`` shaped ``(B, C)`` and ``k``/``f`` either scalars or
per-sample integer arrays. The result is the predicted injected noise, shaped
like ``noisy``.
"""
import math

import numpy as np

from . import kernels
from .spectral import orthonormal_basis, projector_matrix
from .tensorio import load_tensors, save_tensors

REGULARIZER = 1e-10


def embed_scalar(value, dim, max_period=10000.0):
    """Sinusoidal embedding ``[sin(v w_0), cos(v w_0), sin(v w_1), ...]``.

    ``w_j = max_period ** (-j / (dim / 2))``. Accepts a scalar or a 1-D array and
    returns ``(dim,)`` or ``(B, dim)`` respectively.
    """
    if dim <= 0 or dim % 2:
        raise ValueError(f"embedding dimension must be a positive even number, got {dim}")
    values = np.asarray(value, dtype=np.float64)
    scalar = values.ndim == 0
    values = np.atleast_1d(values)
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half) / half)
    angles = values[:, None] * freqs[None, :]
    out = np.empty((values.size, dim))
    out[:, 0::2] = np.sin(angles)
    out[:, 1::2] = np.cos(angles)
    return out[0] if scalar else out


def _per_sample(value, batch):
    arr = np.asarray(value)
    if arr.ndim == 0:
        return np.full(batch, int(arr), dtype=np.int64)
    if arr.shape != (batch,):
        raise ValueError(f"expected {batch} per-sample values, got shape {arr.shape}")
    return arr.astype(np.int64)


def _check_inputs(noisy, context, chunk_len, dims, context_dim):
    noisy = np.asarray(noisy, dtype=np.float64)
    if noisy.ndim != 3 or noisy.shape[1:] != (chunk_len, dims):
        raise ValueError(f"noisy must be (B, {chunk_len}, {dims}), got {noisy.shape}")
    if not np.all(np.isfinite(noisy)):
        raise FloatingPointError("non-finite denoiser input")
    b = noisy.shape[0]
    if context is None:
        context = np.zeros((b, context_dim))
    context = np.asarray(context, dtype=np.float64)
    if context.ndim == 1:
        context = np.broadcast_to(context, (b, context.size))
    if context.shape != (b, context_dim):
        raise ValueError(f"context must be (B, {context_dim}), got {context.shape}")
    return noisy, context


class MlpDenoiser:
    """Dense network over ``[flat(noisy), embed(k), embed(f), context]``.

    ``depth`` hidden layers of width ``hidden`` with a tanh-form GELU, then a
    linear read-out to ``N * D`` values. Gradients are computed by hand.
    """

    def __init__(self, chunk_len, dims, context_dim=4, hidden=64, depth=3, embed_dim=16, seed=0):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        self.chunk_len = int(chunk_len)
        self.dims = int(dims)
        self.context_dim = int(context_dim)
        self.hidden = int(hidden)
        self.depth = int(depth)
        self.embed_dim = int(embed_dim)
        if self.embed_dim % 2:
            raise ValueError("embed_dim must be even")
        rng = np.random.default_rng(seed)
        sizes = [self.input_dim] + [self.hidden] * self.depth + [self.output_dim]
        self.params = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            self.params.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
            self.params.append(np.zeros(fan_out))

    @property
    def input_dim(self):
        return self.chunk_len * self.dims + 2 * self.embed_dim + self.context_dim

    @property
    def output_dim(self):
        return self.chunk_len * self.dims

    @property
    def param_names(self):
        names = []
        for i in range(len(self.params) // 2):
            names += [f"W{i}", f"b{i}"]
        return names

    def _features(self, noisy, k, context, f):
        noisy, context = _check_inputs(noisy, context, self.chunk_len, self.dims, self.context_dim)
        b = noisy.shape[0]
        ks = _per_sample(k, b)
        fs = _per_sample(f, b)
        return np.concatenate(
            [noisy.reshape(b, -1), embed_scalar(ks, self.embed_dim), embed_scalar(fs, self.embed_dim), context],
            axis=1,
        )

    def _forward(self, h):
        pre = []
        acts = [h]
        n_layers = len(self.params) // 2
        for i in range(n_layers):
            z = acts[-1] @ self.params[2 * i] + self.params[2 * i + 1]
            if i < n_layers - 1:
                pre.append(z)
                acts.append(kernels.gelu(z))
            else:
                acts.append(z)
        return acts, pre

    def predict(self, noisy, k, context, f):
        h = self._features(noisy, k, context, f)
        acts, _ = self._forward(h)
        return acts[-1].reshape(h.shape[0], self.chunk_len, self.dims)

    def loss_and_grad(self, noisy, k, context, f, target):
        """Mean squared error against ``target`` and its gradient for every parameter."""
        target = np.asarray(target, dtype=np.float64)
        h = self._features(noisy, k, context, f)
        b = h.shape[0]
        if target.shape != (b, self.chunk_len, self.dims):
            raise ValueError(f"target shape {target.shape} does not match batch")
        acts, pre = self._forward(h)
        resid = acts[-1] - target.reshape(b, -1)
        loss = float(np.mean(resid**2))
        grads = [None] * len(self.params)
        delta = 2.0 * resid / resid.size
        n_layers = len(self.params) // 2
        for i in reversed(range(n_layers)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.params[2 * i].T) * kernels.gelu_grad(pre[i - 1])
        return loss, grads

    def config(self):
        return {
            "chunk_len": self.chunk_len,
            "dims": self.dims,
            "context_dim": self.context_dim,
            "hidden": self.hidden,
            "depth": self.depth,
            "embed_dim": self.embed_dim,
        }

    def state_tensors(self):
        return dict(zip(self.param_names, self.params))

    def save(self, path, extra_tensors=None, meta=None):
        tensors = self.state_tensors()
        tensors.update(extra_tensors or {})
        header_meta = {"kind": "mlp_denoiser", "model": self.config()}
        header_meta.update(meta or {})
        save_tensors(path, tensors, meta=header_meta, layer_count=len(self.params) // 2)

    @classmethod
    def from_tensors(cls, tensors, header):
        meta = header.get("meta", {})
        if meta.get("kind") != "mlp_denoiser":
            raise ValueError("container does not hold an MLP denoiser")
        model = cls(**meta["model"])
        if header.get("layer_count") != len(model.params) // 2:
            raise ValueError("layer count in header does not match the model config")
        for i, name in enumerate(model.param_names):
            if tensors[name].shape != model.params[i].shape:
                raise ValueError(f"tensor {name} has shape {tensors[name].shape}")
            model.params[i] = tensors[name].copy()
        return model

    @classmethod
    def load(cls, path):
        tensors, header = load_tensors(path)
        return cls.from_tensors(tensors, header)


class GaussianOracle:
    """Exact MMSE noise predictor when the clean chunks are Gaussian.

    For data ``A0 ~ N(mu, Sigma)`` (flattened row-major over ``(N, D)``) and
    cut-off ``f`` the f-truncated clean law is ``N(P mu, P Sigma P^T)``.
    ``mean`` may be a fixed ``(N, D)`` array or a callable mapping a
    ``(B, C)`` context to ``(B, N, D)`` means, which gives a conditional
    oracle with context-independent covariance.
    """

    def __init__(self, schedule, mean, cov, context_dim=4, chunk_len=None, dims=None):
        self.schedule = schedule
        self.context_dim = int(context_dim)
        cov = np.asarray(cov, dtype=np.float64)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("covariance must be square")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        if np.linalg.eigvalsh(cov).min() < -1e-10:
            raise ValueError("covariance must be positive semi-definite")
        self.cov = cov
        if callable(mean):
            if chunk_len is None or dims is None:
                raise ValueError("a callable mean needs explicit chunk_len and dims")
            self._mean_fn = mean
            self.mean = None
            self.chunk_len, self.dims = int(chunk_len), int(dims)
        else:
            self._mean_fn = None
            self.mean = np.asarray(mean, dtype=np.float64)
            if self.mean.ndim == 1:
                self.mean = self.mean[:, None]
            self.chunk_len, self.dims = self.mean.shape
        if cov.shape[0] != self.chunk_len * self.dims:
            raise ValueError(f"covariance must be {self.chunk_len * self.dims} square")
        self.mode_var = None
        self._gains = {}

    @classmethod
    def from_mode_variances(cls, schedule, mode_var, mean=None, context_dim=4, dims=None):
        """Covariance diagonal in orthonormal DCT space.

        ``mode_var`` is ``(N,)`` (shared by every dimension) or ``(N, D)``.
        """
        mode_var = np.asarray(mode_var, dtype=np.float64)
        if mode_var.ndim == 1:
            if dims is None:
                dims = 1 if mean is None or callable(mean) else np.asarray(mean).reshape(mode_var.size, -1).shape[1]
            mode_var = np.repeat(mode_var[:, None], dims, axis=1)
        if np.any(mode_var < 0):
            raise ValueError("mode variances must be non-negative")
        n, d = mode_var.shape
        basis = np.kron(orthonormal_basis(n), np.eye(d))
        cov = basis @ np.diag(mode_var.reshape(-1)) @ basis.T
        cov = 0.5 * (cov + cov.T)
        if mean is None:
            mean = np.zeros((n, d))
        oracle = cls(schedule, mean, cov, context_dim=context_dim, chunk_len=n, dims=d)
        oracle.mode_var = mode_var
        return oracle

    def _means(self, context, b):
        if self._mean_fn is None:
            return np.broadcast_to(self.mean.reshape(1, -1), (b, self.chunk_len * self.dims))
        means = np.asarray(self._mean_fn(context), dtype=np.float64)
        return means.reshape(b, -1)

    def _gain(self, k, f):
        key = (int(k), int(f))
        if key not in self._gains:
            ab = self.schedule.alpha_bar(k)
            p = projector_matrix(self.chunk_len, f, self.dims)
            cov_f = p @ self.cov @ p.T
            system = ab * cov_f + (1.0 - ab + REGULARIZER) * np.eye(cov_f.shape[0])
            gain = np.linalg.solve(system, cov_f).T
            self._gains[key] = (p, gain)
        return self._gains[key]

    def predict(self, noisy, k, context, f):
        noisy, context = _check_inputs(noisy, context, self.chunk_len, self.dims, self.context_dim)
        b = noisy.shape[0]
        ks = _per_sample(k, b)
        fs = _per_sample(f, b)
        x = noisy.reshape(b, -1)
        means = self._means(context, b)
        out = np.empty_like(x)
        pairs = np.stack([ks, fs], axis=1)
        for kk, ff in np.unique(pairs, axis=0):
            rows = np.nonzero((ks == kk) & (fs == ff))[0]
            if not 1 <= kk <= self.schedule.n_steps:
                raise ValueError(f"step {kk} outside [1, {self.schedule.n_steps}]")
            ab = self.schedule.alpha_bar(int(kk))
            p, gain = self._gain(kk, ff)
            pm = means[rows] @ p.T
            resid = x[rows] - np.sqrt(ab) * pm
            clean = pm + np.sqrt(ab) * resid @ gain.T
            out[rows] = (x[rows] - np.sqrt(ab) * clean) / np.sqrt(1.0 - ab)
        return out.reshape(b, self.chunk_len, self.dims)
