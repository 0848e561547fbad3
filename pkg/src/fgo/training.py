"""Multi-band diffusion training with an Adam optimizer.

Randomness is drawn from streams derived from ``(seed, purpose, epoch, batch)``
so that a run resumed at an epoch boundary reproduces the uninterrupted run.
The diffusion stream (steps and noise) is separate from the cut-off stream,
which makes full-band training with ``p_base = 1, f_base = N`` draw exactly the
same steps and noise as :func:`standard_train_step`.
"""
import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .schedule import FgoConfig, NoiseSchedule, sample_cutoffs
from .spectral import low_pass_each
from .tensorio import load_tensors

log = logging.getLogger(__name__)

SHUFFLE, DIFFUSION, CUTOFF = 0, 1, 2


def stream(seed, purpose, *key):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(purpose, *map(int, key))))


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    b1: float = 0.9
    b2: float = 0.999
    eps_hat: float = 1e-8
    checkpoint_every: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.b1 < 1 and 0 <= self.b2 < 1):
            raise ValueError("moment decay rates must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def optimizer_update(params, grads, state: AdamState, cfg: TrainConfig):
    """One bias-corrected Adam step, in place on ``params`` and ``state``."""
    if len(params) != len(grads):
        raise ValueError("parameter and gradient lists differ in length")
    state.t += 1
    c1 = 1.0 - cfg.b1**state.t
    c2 = 1.0 - cfg.b2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= cfg.b1
        m += (1.0 - cfg.b1) * g
        v *= cfg.b2
        v += (1.0 - cfg.b2) * g * g
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps_hat)
    return params, state


@dataclass
class StepRecord:
    loss: float
    f: np.ndarray
    k: np.ndarray


def _diffusion_draws(rng, batch, shape, sched):
    ks = rng.integers(1, sched.n_steps + 1, size=batch)
    eps = rng.standard_normal((batch, *shape))
    return ks, eps


def _apply(model, contexts, clean, ks, fs, eps, sched, state, cfg):
    ab = sched.alpha_bars[ks - 1][:, None, None]
    noisy = np.sqrt(ab) * clean + np.sqrt(1.0 - ab) * eps
    loss, grads = model.loss_and_grad(noisy, ks, contexts, fs, eps)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite training loss (k={ks[:4]}, f={fs[:4]})")
    optimizer_update(model.params, grads, state, cfg)
    return loss


def train_step(model, contexts, chunks, sched: NoiseSchedule, fgo: FgoConfig, state: AdamState,
               cfg: TrainConfig, diffusion_rng, cutoff_rng):
    """One multi-band update on a batch of ``(context, clean chunk)`` pairs.

    Per sample: step ``k ~ U{1..K}``, cut-off from the KFC-aware sampler,
    target ``L_f(A0)``, noise ``eps``, then the MSE gradient step.
    """
    chunks = np.asarray(chunks, dtype=np.float64)
    batch = chunks.shape[0]
    ks, eps = _diffusion_draws(diffusion_rng, batch, chunks.shape[1:], sched)
    fs = sample_cutoffs(cutoff_rng, ks, fgo, sched.n_steps)
    clean = low_pass_each(chunks, fs)
    loss = _apply(model, contexts, clean, ks, fs, eps, sched, state, cfg)
    return StepRecord(loss, fs, ks)


def standard_train_step(model, contexts, chunks, sched: NoiseSchedule, state: AdamState,
                        cfg: TrainConfig, diffusion_rng):
    """Plain diffusion update on unfiltered chunks, conditioned on the full band."""
    chunks = np.asarray(chunks, dtype=np.float64)
    batch = chunks.shape[0]
    ks, eps = _diffusion_draws(diffusion_rng, batch, chunks.shape[1:], sched)
    fs = np.full(batch, chunks.shape[1], dtype=np.int64)
    loss = _apply(model, contexts, chunks, ks, fs, eps, sched, state, cfg)
    return StepRecord(loss, fs, ks)


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)
    epoch_losses: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    seconds: float = 0.0
    seed: int = 0
    cutoff_counts: np.ndarray = None

    @property
    def final_loss(self):
        return self.epoch_losses[-1] if self.epoch_losses else float("nan")

    def write_csv(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["step", "epoch", "loss", "f", "k"])
            for step, epoch, loss, f, k in self.rows:
                writer.writerow([step, epoch, repr(float(loss)), f, k])


def save_checkpoint(path, model, state: AdamState, epoch, step, meta=None):
    extra = {}
    for i, (m, v) in enumerate(zip(state.m, state.v)):
        extra[f"adam_m{i}"] = m
        extra[f"adam_v{i}"] = v
    header = {"train": {"epoch": int(epoch), "step": int(step), "adam_t": int(state.t)}}
    header.update(meta or {})
    model.save(path, extra_tensors=extra, meta=header)


def load_checkpoint(path, model_cls=None):
    """Return ``(model, adam_state, epoch, step, header)``."""
    from .denoiser import MlpDenoiser

    model_cls = model_cls or MlpDenoiser
    tensors, header = load_tensors(path)
    model = model_cls.from_tensors(tensors, header)
    info = header["meta"].get("train", {"epoch": 0, "step": 0, "adam_t": 0})
    n = len(model.params)
    if "adam_m0" in tensors:
        state = AdamState([tensors[f"adam_m{i}"] for i in range(n)], [tensors[f"adam_v{i}"] for i in range(n)],
                          info["adam_t"])
    else:
        state = AdamState.zeros_like(model.params)
    return model, state, info["epoch"], info["step"], header


def train(model, contexts, chunks, sched: NoiseSchedule, fgo: FgoConfig, cfg: TrainConfig, *,
          standard=False, state=None, start_epoch=0, start_step=0, checkpoint_path=None, report=None):
    """Shuffled mini-batch epochs of :func:`train_step` (or :func:`standard_train_step`).

    ``state``/``start_epoch``/``start_step`` resume a run from a checkpoint
    written at an epoch boundary.
    """
    contexts = np.asarray(contexts, dtype=np.float64)
    chunks = np.asarray(chunks, dtype=np.float64)
    m = chunks.shape[0]
    if m == 0:
        raise ValueError("empty dataset")
    if contexts.shape[0] != m:
        raise ValueError("contexts and chunks differ in length")
    state = state or AdamState.zeros_like(model.params)
    report = report or TrainReport(seed=cfg.seed)
    if report.cutoff_counts is None:
        report.cutoff_counts = np.zeros(chunks.shape[1] + 1, dtype=np.int64)
    started = time.perf_counter()
    step = start_step
    for epoch in range(start_epoch, cfg.epochs):
        order = stream(cfg.seed, SHUFFLE, epoch).permutation(m)
        epoch_total = 0.0
        n_batches = 0
        for b, lo in enumerate(range(0, m, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            drng = stream(cfg.seed, DIFFUSION, epoch, b)
            if standard:
                rec = standard_train_step(model, contexts[idx], chunks[idx], sched, state, cfg, drng)
            else:
                crng = stream(cfg.seed, CUTOFF, epoch, b)
                rec = train_step(model, contexts[idx], chunks[idx], sched, fgo, state, cfg, drng, crng)
            report.losses.append(rec.loss)
            report.rows.append((step, epoch, rec.loss, int(rec.f[0]), int(rec.k[0])))
            report.cutoff_counts += np.bincount(rec.f, minlength=chunks.shape[1] + 1)
            epoch_total += rec.loss
            n_batches += 1
            step += 1
        report.epoch_losses.append(epoch_total / n_batches)
        log.debug("epoch %d loss %.6f", epoch, report.epoch_losses[-1])
        if checkpoint_path and cfg.checkpoint_every and (epoch + 1) % cfg.checkpoint_every == 0:
            try:
                save_checkpoint(checkpoint_path, model, state, epoch + 1, step)
            except OSError as exc:
                raise OSError(f"checkpoint write failed at epoch {epoch + 1}: {exc}") from exc
    report.seconds += time.perf_counter() - started
    for p in model.params:
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("non-finite parameter after training")
    return report
