"""Synthetic noisy demonstrations and a receding-horizon integrator environment."""
from dataclasses import asdict, dataclass

import numpy as np

from .spectral import low_pass, orthonormal_basis
from .sampler import temporal_ensemble
from .tensorio import load_tensors, save_tensors

# standard deviation of each clean DCT mode, in units of sqrt(N)
MODE_SCALES = (1.0, 0.6, 0.3, 0.15, 0.1, 0.05)


@dataclass(frozen=True)
class DemoSpec:
    n_demos: int = 2000
    chunk_len: int = 16
    dims: int = 2
    f_clean: int = 3
    jitter_std: float = 0.1
    pause_prob: float = 0.1
    jerk_prob: float = 0.1
    context_dim: int = 4
    impulse_scale: float = 3.0
    pause_min: int = 2
    pause_max: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.n_demos < 1 or self.chunk_len < 1 or self.dims < 1 or self.context_dim < 1:
            raise ValueError("n_demos, chunk_len, dims and context_dim must be positive")
        if not 0 < self.f_clean <= self.chunk_len:
            raise ValueError(f"f_clean must lie in [1, {self.chunk_len}]")
        if not (0 <= self.pause_prob <= 1 and 0 <= self.jerk_prob <= 1):
            raise ValueError("contamination probabilities must lie in [0, 1]")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be non-negative")
        if not 1 <= self.pause_min <= self.pause_max:
            raise ValueError("invalid pause length range")


@dataclass
class TrajectoryDataset:
    contexts: np.ndarray
    chunks: np.ndarray
    clean_chunks: np.ndarray
    spec: DemoSpec
    paused: np.ndarray = None
    jerked: np.ndarray = None

    def __len__(self):
        return self.chunks.shape[0]

    def save(self, path):
        tensors = {"contexts": self.contexts, "chunks": self.chunks, "clean_chunks": self.clean_chunks}
        if self.paused is not None:
            tensors["paused"] = self.paused.astype(np.float64)
            tensors["jerked"] = self.jerked.astype(np.float64)
        save_tensors(path, tensors, meta={"kind": "dataset", "spec": asdict(self.spec)})

    @classmethod
    def load(cls, path):
        tensors, header = load_tensors(path)
        meta = header["meta"]
        if meta.get("kind") != "dataset":
            raise ValueError(f"{path} does not hold a dataset")
        paused = tensors.get("paused")
        jerked = tensors.get("jerked")
        return cls(
            contexts=tensors["contexts"],
            chunks=tensors["chunks"],
            clean_chunks=tensors["clean_chunks"],
            spec=DemoSpec(**meta["spec"]),
            paused=None if paused is None else paused.astype(bool),
            jerked=None if jerked is None else jerked.astype(bool),
        )


def make_context(start, goal, context_dim):
    """``[start || goal]`` padded with zeros or truncated to ``context_dim`` columns."""
    ctx = np.concatenate([np.atleast_2d(start), np.atleast_2d(goal)], axis=1)
    out = np.zeros((ctx.shape[0], context_dim))
    width = min(context_dim, ctx.shape[1])
    out[:, :width] = ctx[:, :width]
    return out


def clean_chunks(rng, count, chunk_len, dims, f_clean):
    """Chunks whose spectrum lives on the first ``f_clean`` DCT modes."""
    scales = np.array([MODE_SCALES[min(i, len(MODE_SCALES) - 1)] for i in range(f_clean)])
    coeffs = rng.standard_normal((count, f_clean, dims)) * scales[None, :, None] * np.sqrt(chunk_len)
    basis = orthonormal_basis(chunk_len)[:, :f_clean]
    return np.einsum("ti,bid->btd", basis, coeffs)


def generate(spec: DemoSpec) -> TrajectoryDataset:
    rng = np.random.default_rng(spec.seed)
    m, n, d = spec.n_demos, spec.chunk_len, spec.dims
    clean = clean_chunks(rng, m, n, d, spec.f_clean)
    jitter = rng.standard_normal((m, n, d)) * spec.jitter_std
    chunks = clean + jitter if spec.jitter_std > 0 else clean.copy()

    paused = rng.random(m) < spec.pause_prob
    lengths = rng.integers(spec.pause_min, spec.pause_max + 1, size=m)
    starts = rng.integers(0, n, size=m)
    jerked = rng.random(m) < spec.jerk_prob
    jerk_at = rng.integers(0, n, size=m)
    signs = rng.choice([-1.0, 1.0], size=(m, d))
    for i in np.nonzero(paused)[0]:
        s = starts[i]
        chunks[i, s:s + lengths[i]] = chunks[i, s]
    for i in np.nonzero(jerked)[0]:
        chunks[i, jerk_at[i]] += spec.impulse_scale * spec.jitter_std * signs[i]

    contexts = make_context(clean[:, 0], clean[:, -1], spec.context_dim)
    return TrajectoryDataset(contexts, chunks, clean, spec, paused=paused, jerked=jerked)


def environment(env_seed, spec: DemoSpec):
    """Start state, goal and the clean chunk they were drawn from for one episode."""
    rng = np.random.default_rng([int(env_seed), 7919])
    chunk = clean_chunks(rng, 1, spec.chunk_len, spec.dims, spec.f_clean)[0]
    return chunk[0].copy(), chunk[-1].copy(), chunk


def _smooth(chunks, smoother):
    kind = smoother[0] if isinstance(smoother, tuple) else smoother
    if kind in (None, "none", "ensemble"):
        return chunks
    if kind == "lowpass":
        return low_pass(chunks, int(smoother[1]))
    raise ValueError(f"unknown smoother {smoother!r}")


def rollout_many(policy, env_seeds, horizon, execute_m, spec: DemoSpec, smoother="none"):
    """Run one episode per seed in lock-step; returns executed ``(E, T, D)`` trajectories.

    ``policy`` maps a ``(E, C)`` context batch to ``(E, N, D)`` chunks. The
    executed action becomes the next state (single integrator). ``smoother``
    is ``"none"``, ``("lowpass", f)`` or ``("ensemble", decay)``.
    """
    n = spec.chunk_len
    if not 1 <= execute_m <= n:
        raise ValueError(f"execute_m must lie in [1, {n}]")
    if horizon < execute_m:
        raise ValueError("horizon must be at least execute_m")
    episodes = [environment(s, spec) for s in env_seeds]
    state = np.array([e[0] for e in episodes])
    goal = np.array([e[1] for e in episodes])
    ensemble = isinstance(smoother, tuple) and smoother[0] == "ensemble"
    history = [[] for _ in env_seeds]
    executed = np.empty((len(env_seeds), horizon, spec.dims))
    t = 0
    replans = 0
    while t < horizon:
        ctx = make_context(state, goal, spec.context_dim)
        try:
            chunks = np.asarray(policy(ctx), dtype=np.float64)
        except Exception as exc:
            raise RuntimeError(f"policy failed at step {t}") from exc
        chunks = _smooth(chunks, smoother)
        replans += 1
        steps = min(execute_m, horizon - t)
        for e in range(len(env_seeds)):
            if ensemble:
                history[e].append((t, chunks[e]))
                history[e] = [(s, c) for s, c in history[e] if t - s < n]
        for j in range(steps):
            if ensemble:
                for e in range(len(env_seeds)):
                    executed[e, t + j] = temporal_ensemble(history[e], t + j, smoother[1])
            else:
                executed[:, t + j] = chunks[:, j]
        state = executed[:, t + steps - 1].copy()
        t += steps
    return executed, replans


def rollout(policy, env_seed, horizon, execute_m, spec: DemoSpec, smoother="none"):
    """Single-episode wrapper around :func:`rollout_many`; ``policy`` maps ``(C,)`` to ``(N, D)``."""

    def batched(ctx):
        return np.asarray(policy(ctx[0]))[None]

    traj, replans = rollout_many(batched, [env_seed], horizon, execute_m, spec, smoother)
    return traj[0], replans
