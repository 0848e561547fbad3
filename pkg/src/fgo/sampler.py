"""Reverse samplers: plain ancestral DDPM and frequency-guided sampling.

Both samplers draw the initial state first and then one standard-normal
array per step with non-zero ``sigma_k``, so two runs sharing a generator
seed consume identical noise.
"""
from dataclasses import dataclass

import numpy as np

from .schedule import FgoConfig, NoiseSchedule, forward_diffuse
from .spectral import band_energy, check_chunk, high_pass, low_pass


@dataclass
class SampleTrace:
    """Per-step record of a reverse run; index 0 is step ``K``, the last index step 1."""

    ks: np.ndarray
    f_ks: np.ndarray
    omegas: np.ndarray
    states: np.ndarray
    eps_base: np.ndarray
    eps_fine: np.ndarray
    eps_tilde: np.ndarray
    final: np.ndarray

    @property
    def n_records(self):
        return self.ks.size

    def clean_estimates(self, sched: NoiseSchedule):
        """``(A^k - sqrt(1 - abar_k) eps_tilde) / sqrt(abar_k)`` for every record."""
        ab = np.array([sched.alpha_bar(int(k)) for k in self.ks])[:, None, None, None]
        return (self.states - np.sqrt(1.0 - ab) * self.eps_tilde) / np.sqrt(ab)

    def band_rows(self, sample, f_base):
        """CSV rows ``(k, f_k, omega_k, low_energy, high_energy)`` for one sample."""
        low, high = band_energy(self.states[:, sample], f_base)
        return [
            (int(k), int(fk), float(w), float(lo), float(hi))
            for k, fk, w, lo, hi in zip(self.ks, self.f_ks, self.omegas, low, high)
        ]


def _initial_state(rng, batch, n, d, x_init):
    if x_init is not None:
        x = np.array(x_init, dtype=np.float64)
        if x.shape != (batch, n, d):
            raise ValueError(f"x_init must be ({batch}, {n}, {d}), got {x.shape}")
        return x
    return rng.standard_normal((batch, n, d))


def _reverse_step(x, eps, k, sched, rng, deterministic, clip=None):
    zeta, gamma, sigma = sched.coefficients(k)
    if clip is None:
        out = zeta * (x - gamma * eps)
    else:
        out = _clipped_mean(x, eps, k, sched, clip)
    if sigma > 0.0 and not deterministic:
        out = out + sigma * rng.standard_normal(x.shape)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite state after reverse step k={k}")
    return out


def _clipped_mean(x, eps, k, sched, clip):
    """Posterior mean from a clean estimate clipped to ``[-clip, clip]``.

    Without clipping this equals ``zeta_k (x - gamma_k eps)``; clipping keeps
    an imperfect noise estimate from being amplified by the large ``zeta_K``
    of capped cosine schedules.
    """
    ab = sched.alpha_bar(k)
    ab_prev = sched.alpha_bar(k - 1)
    alpha = sched.alphas[k - 1]
    x0 = np.clip((x - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab), -clip, clip)
    c0 = np.sqrt(ab_prev) * (1.0 - alpha) / (1.0 - ab)
    ct = np.sqrt(alpha) * (1.0 - ab_prev) / (1.0 - ab)
    return c0 * x0 + ct * x


def _context(model, context, n_samples):
    if context is None:
        if n_samples is None:
            raise ValueError("give either a context batch or n_samples")
        return np.zeros((n_samples, model.context_dim))
    context = np.asarray(context, dtype=np.float64)
    if context.ndim == 1:
        context = np.broadcast_to(context, (n_samples or 1, context.size))
    return context


def branch_noise(model, x, k, context, f, sched, complete_band=True):
    """Noise estimate for the branch conditioned on cut-off ``f``.

    The network sees ``L_f(x)``. With ``complete_band`` the estimate is kept
    on the retained band and the band above ``f`` is filled with
    ``H_f(x) / sqrt(1 - abar_k)``, the exact noise there for data with no
    energy above ``f``. Without it the raw network output is returned.
    """
    n = x.shape[1]
    eps = model.predict(low_pass(x, f), sched.model_step(k), context, f)
    if not complete_band or f == n:
        return eps
    ab = sched.alpha_bar(k)
    return low_pass(eps, f) + high_pass(x, f) / np.sqrt(1.0 - ab)


def sample_unguided(model, context, sched: NoiseSchedule, rng, n_samples=None, *,
                    deterministic=False, x_init=None, return_trace=False, clip=None):
    """Ancestral DDPM sampling conditioned on the full band at every step.

    ``clip`` bounds the implied clean chunk at every step; ``None`` keeps the
    plain ``zeta_k (x - gamma_k eps)`` update.
    """
    context = _context(model, context, n_samples)
    batch = context.shape[0]
    n, d = model.chunk_len, model.dims
    x = _initial_state(rng, batch, n, d, x_init)
    records = [] if return_trace else None
    for k in range(sched.n_steps, 0, -1):
        eps = model.predict(x, sched.model_step(k), context, n)
        if records is not None:
            records.append((k, n, 1.0, x, eps, eps, eps))
        x = _reverse_step(x, eps, k, sched, rng, deterministic, clip)
    if return_trace:
        return x, _pack(records, x)
    return x


def sample_fgo(model, context, sched: NoiseSchedule, fgo: FgoConfig, rng, n_samples=None, *,
               deterministic=False, x_init=None, complete_band=True, record=True, clip=None):
    """Frequency-guided reverse sampling.

    At step ``k``: ``eps = (1 - w_k) eps(L_fbase(x), f_base) + w_k eps(L_fk(x), f_k)``
    followed by the usual DDPM update. ``clip`` bounds the clean estimate
    as in :func:`sample_unguided`. Returns ``(chunks, trace)``; the trace
    is ``None`` when ``record`` is false.
    """
    if fgo.chunk_len != model.chunk_len:
        raise ValueError("guidance config chunk length does not match the model")
    context = _context(model, context, n_samples)
    batch = context.shape[0]
    n, d = model.chunk_len, model.dims
    n_steps = sched.n_steps
    x = _initial_state(rng, batch, n, d, x_init)
    records = [] if record else None
    for k in range(n_steps, 0, -1):
        f_k = fgo.f_k(k, n_steps)
        w = fgo.omega_k(k, n_steps)
        eps_base = branch_noise(model, x, k, context, fgo.f_base, sched, complete_band)
        eps_fine = branch_noise(model, x, k, context, f_k, sched, complete_band)
        eps = (1.0 - w) * eps_base + w * eps_fine
        if records is not None:
            records.append((k, f_k, w, x, eps_base, eps_fine, eps))
        x = _reverse_step(x, eps, k, sched, rng, deterministic, clip)
    return x, (_pack(records, x) if records is not None else None)


def _pack(records, final):
    ks, fks, ws, xs, eb, ef, et = zip(*records)
    return SampleTrace(
        ks=np.array(ks, dtype=np.int64),
        f_ks=np.array(fks, dtype=np.int64),
        omegas=np.array(ws, dtype=np.float64),
        states=np.stack(xs),
        eps_base=np.stack(eb),
        eps_fine=np.stack(ef),
        eps_tilde=np.stack(et),
        final=final,
    )


def truncated_noisy_state_exact(a_k, a_0, k, f, sched: NoiseSchedule):
    """``A^{k,f} = A^k - sqrt(abar_k) H_f(A^0)``; needs the clean chunk, so test use only."""
    a_k = check_chunk(a_k)
    a_0 = check_chunk(a_0)
    if a_k.shape != a_0.shape:
        raise ValueError(f"shape mismatch {a_k.shape} vs {a_0.shape}")
    return a_k - np.sqrt(sched.alpha_bar(k)) * high_pass(a_0, f)


def smooth_lowpass_baseline(chunk, f):
    """Post-hoc low-pass of a sampled chunk."""
    return low_pass(chunk, f)


def temporal_ensemble(history, now, decay=0.01):
    """Exponentially weighted average of every chunk's action at time ``now``.

    ``history`` holds ``(issue_time, chunk)`` pairs where ``chunk[j]`` is the
    action planned for ``issue_time + j``. Weights are ``exp(-decay * age)``.
    """
    if decay <= 0:
        raise ValueError("decay must be positive")
    actions = []
    weights = []
    for issued, chunk in history:
        chunk = np.asarray(chunk, dtype=np.float64)
        offset = now - issued
        if 0 <= offset < chunk.shape[0]:
            actions.append(chunk[offset])
            weights.append(np.exp(-decay * offset))
    if not actions:
        raise ValueError(f"no chunk in the history covers time {now}")
    weights = np.array(weights)
    return np.tensordot(weights / weights.sum(), np.array(actions), axes=1)


__all__ = [
    "SampleTrace",
    "branch_noise",
    "forward_diffuse",
    "sample_fgo",
    "sample_unguided",
    "smooth_lowpass_baseline",
    "temporal_ensemble",
    "truncated_noisy_state_exact",
]
