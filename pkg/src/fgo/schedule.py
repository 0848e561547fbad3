"""Noise schedules, reverse-step coefficients and the cut-off/guidance schedules."""
from dataclasses import dataclass, field

import numpy as np

SCHEDULE_KINDS = ("linear-beta", "cosine", "squared-cosine")
VARIANCE_KINDS = ("posterior", "beta")
PROGRESS_KINDS = ("linear", "cosine")
MAX_BETA = 0.999


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step diffusion coefficients for steps ``k = 1..K`` (stored at index ``k - 1``).

    ``variance="posterior"`` uses the DDPM posterior standard deviation for
    ``sigmas``; ``"beta"`` uses ``sqrt(1 - alpha_k)``, which keeps the sample
    variance closer to the data at coarse step counts. Either way the final
    step is noiseless unless ``final_step_noise=True``, which sets it to
    ``sqrt(1 - alpha_1)``.
    """

    alphas: np.ndarray
    kind: str = "squared-cosine"
    final_step_noise: bool = False
    timesteps: tuple = None
    variance: str = "posterior"
    alpha_bars: np.ndarray = field(init=False, repr=False)
    zetas: np.ndarray = field(init=False, repr=False)
    gammas: np.ndarray = field(init=False, repr=False)
    sigmas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=np.float64)
        if alphas.ndim != 1 or alphas.size < 1:
            raise ValueError("need at least one diffusion step")
        if np.any(alphas <= 0.0) or np.any(alphas > 1.0):
            raise ValueError("alphas must lie in (0, 1]")
        alpha_bars = np.cumprod(alphas)
        prev = np.concatenate([[1.0], alpha_bars[:-1]])
        one_minus = 1.0 - alpha_bars
        with np.errstate(divide="ignore", invalid="ignore"):
            gammas = np.where(one_minus > 0, (1.0 - alphas) / np.sqrt(one_minus), 0.0)
            var = np.where(one_minus > 0, (1.0 - prev) / one_minus * (1.0 - alphas), 0.0)
        if self.variance == "beta":
            var = 1.0 - alphas
            var[0] = 0.0
        elif self.variance != "posterior":
            raise ValueError(f"unknown variance kind {self.variance!r}; expected one of {VARIANCE_KINDS}")
        sigmas = np.sqrt(np.clip(var, 0.0, None))
        if self.final_step_noise:
            sigmas[0] = np.sqrt(1.0 - alphas[0])
        if self.timesteps is not None:
            if len(self.timesteps) != alphas.size:
                raise ValueError("need one model timestep per reverse step")
            object.__setattr__(self, "timesteps", tuple(int(t) for t in self.timesteps))
        for name, value in (
            ("alphas", alphas),
            ("alpha_bars", alpha_bars),
            ("zetas", 1.0 / np.sqrt(alphas)),
            ("gammas", gammas),
            ("sigmas", sigmas),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def n_steps(self) -> int:
        return self.alphas.size

    def alpha_bar(self, k: int) -> float:
        """``alpha_bar_k`` with the convention ``alpha_bar_0 = 1``."""
        if not 0 <= k <= self.n_steps:
            raise ValueError(f"step {k} outside [0, {self.n_steps}]")
        return 1.0 if k == 0 else float(self.alpha_bars[k - 1])

    def model_step(self, k: int) -> int:
        """Step index the denoiser was trained with for reverse step ``k``."""
        return k if self.timesteps is None else self.timesteps[k - 1]

    def coefficients(self, k: int):
        """``(zeta_k, gamma_k, sigma_k)`` for a reverse step ``k >= 1``."""
        if not 1 <= k <= self.n_steps:
            raise ValueError(f"step {k} outside [1, {self.n_steps}]")
        i = k - 1
        return float(self.zetas[i]), float(self.gammas[i]), float(self.sigmas[i])


def _betas_from_alpha_bar(fn, n_steps):
    t = np.arange(n_steps + 1) / n_steps
    bars = fn(t)
    bars = bars / bars[0]
    betas = 1.0 - bars[1:] / bars[:-1]
    return np.clip(betas, 0.0, MAX_BETA)


def make_schedule(n_steps: int, kind: str = "squared-cosine", *, beta_start=1e-4, beta_end=2e-2,
                  offset=0.008, final_step_noise=False, variance="posterior") -> NoiseSchedule:
    """Build a noise schedule.

    ``linear-beta`` spaces ``beta_k`` linearly in ``[beta_start, beta_end]``;
    ``squared-cosine`` is the ``cos^2`` alpha-bar curve with a small offset;
    ``cosine`` uses the unsquared cosine curve, which destroys signal more
    slowly early on. Betas are capped at 0.999.
    """
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError(f"n_steps must be a positive integer, got {n_steps!r}")
    n_steps = int(n_steps)
    if kind == "linear-beta":
        betas = np.linspace(beta_start, beta_end, n_steps)
    elif kind == "squared-cosine":
        betas = _betas_from_alpha_bar(lambda t: np.cos((t + offset) / (1 + offset) * np.pi / 2) ** 2, n_steps)
    elif kind == "cosine":
        betas = _betas_from_alpha_bar(lambda t: np.cos((t + offset) / (1 + offset) * np.pi / 2), n_steps)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}; expected one of {SCHEDULE_KINDS}")
    # strictly decreasing alpha_bar needs every alpha < 1
    betas = np.maximum(betas, 1e-12)
    return NoiseSchedule(1.0 - betas, kind=kind, final_step_noise=final_step_noise, variance=variance)


def respace(sched: NoiseSchedule, n_steps: int) -> NoiseSchedule:
    """Sub-sample ``n_steps`` evenly spaced steps of a trained schedule.

    The new schedule keeps the original alpha-bar values at the chosen steps
    and remembers them via ``timesteps`` so samplers query the denoiser with
    the step it was trained on.
    """
    if not 1 <= n_steps <= sched.n_steps:
        raise ValueError(f"cannot respace {sched.n_steps} steps to {n_steps}")
    if n_steps == sched.n_steps:
        return sched
    steps = np.unique(np.round(np.linspace(1, sched.n_steps, n_steps)).astype(np.int64))
    bars = sched.alpha_bars[steps - 1]
    prev = np.concatenate([[1.0], bars[:-1]])
    return NoiseSchedule(bars / prev, kind=sched.kind, final_step_noise=sched.final_step_noise,
                         variance=sched.variance, timesteps=tuple(sched.model_step(int(t)) for t in steps))


def forward_diffuse(chunk, k: int, eps, sched: NoiseSchedule):
    """``sqrt(abar_k) * chunk + sqrt(1 - abar_k) * eps``; ``k = 0`` returns the chunk."""
    chunk = np.asarray(chunk, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if chunk.shape != eps.shape:
        raise ValueError(f"noise shape {eps.shape} does not match chunk shape {chunk.shape}")
    ab = sched.alpha_bar(k)
    if k == 0:
        return chunk.copy()
    return np.sqrt(ab) * chunk + np.sqrt(1.0 - ab) * eps


def _progress(k, n_steps, kind):
    if not 0 <= k <= n_steps:
        raise ValueError(f"step {k} outside [0, {n_steps}]")
    remaining = 1.0 - k / n_steps
    if kind == "linear":
        return remaining
    if kind == "cosine":
        return (1.0 - np.cos(np.pi * remaining)) / 2.0
    raise ValueError(f"unknown schedule kind {kind!r}; expected one of {PROGRESS_KINDS}")


def f_k_schedule(k: int, n_steps: int, f_base: int, n: int, kind: str = "linear") -> int:
    """Cut-off used for the fine branch at reverse step ``k`` (``f_K = f_base``, ``f_0 = N``).

    Rounding is half-to-even.
    """
    value = f_base + (n - f_base) * _progress(k, n_steps, kind)
    return int(np.round(value))


def omega_k_schedule(k: int, n_steps: int, kind="linear", omega=None) -> float:
    """Guidance weight at step ``k``. ``kind="constant"`` returns ``omega`` for every step."""
    if kind == "constant":
        if omega is None or omega < 0:
            raise ValueError("constant guidance weight must be given and non-negative")
        if not 0 <= k <= n_steps:
            raise ValueError(f"step {k} outside [0, {n_steps}]")
        return float(omega)
    return float(_progress(k, n_steps, kind))


def kfc_f_max(k: int, n_steps: int, f_base: int, n: int, beta: float) -> int:
    """Noise-level dependent upper bound on the training cut-off.

    ``beta = 0`` gives ``N`` at every step, including ``k = K`` (``0 ** 0 = 1``).
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    if not 0 <= k <= n_steps:
        raise ValueError(f"step {k} outside [0, {n_steps}]")
    remaining = 1.0 - k / n_steps
    return int(np.round(f_base + (n - f_base) * remaining**beta))


@dataclass(frozen=True)
class FgoConfig:
    """Guidance hyper-parameters shared by training and sampling."""

    chunk_len: int
    f_base: int = 3
    p_base: float = 0.2
    beta: float = 0.5
    kfc_enabled: bool = True
    f_schedule: str = "linear"
    omega_schedule: str = "linear"
    omega_const: float = 1.0

    def __post_init__(self):
        if self.chunk_len < 1:
            raise ValueError("chunk_len must be positive")
        if not 0 <= self.f_base <= self.chunk_len:
            raise ValueError(f"f_base {self.f_base} outside [0, {self.chunk_len}]")
        if not 0.0 <= self.p_base <= 1.0:
            raise ValueError("p_base must be a probability")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if self.f_schedule not in PROGRESS_KINDS:
            raise ValueError(f"unknown f schedule {self.f_schedule!r}")
        if self.omega_schedule not in PROGRESS_KINDS + ("constant",):
            raise ValueError(f"unknown omega schedule {self.omega_schedule!r}")
        if self.omega_const < 0:
            raise ValueError("constant guidance weight must be non-negative")

    def f_k(self, k: int, n_steps: int) -> int:
        return f_k_schedule(k, n_steps, self.f_base, self.chunk_len, self.f_schedule)

    def omega_k(self, k: int, n_steps: int) -> float:
        return omega_k_schedule(k, n_steps, self.omega_schedule, self.omega_const)

    def f_max(self, k: int, n_steps: int) -> int:
        if not self.kfc_enabled:
            return self.chunk_len
        return kfc_f_max(k, n_steps, self.f_base, self.chunk_len, self.beta)


def sample_cutoff(rng: np.random.Generator, k: int, cfg: FgoConfig, n_steps: int) -> int:
    """Training cut-off for one sample at diffusion step ``k``.

    Consumes one uniform draw, plus one integer draw when the base band is not
    selected.
    """
    if rng.random() < cfg.p_base:
        return cfg.f_base
    f_max = cfg.f_max(k, n_steps)
    assert f_max >= cfg.f_base, "f_max fell below f_base"
    return int(rng.integers(cfg.f_base, f_max + 1))


def sample_cutoffs(rng: np.random.Generator, ks, cfg: FgoConfig, n_steps: int) -> np.ndarray:
    """Vectorised :func:`sample_cutoff` for a batch of steps.

    Always consumes ``2 * len(ks)`` draws, so the stream position does not
    depend on which samples picked the base band.
    """
    ks = np.asarray(ks, dtype=np.int64)
    use_base = rng.random(ks.size) < cfg.p_base
    if cfg.kfc_enabled:
        highs = np.array([cfg.f_max(int(k), n_steps) for k in ks], dtype=np.int64)
    else:
        highs = np.full(ks.size, cfg.chunk_len, dtype=np.int64)
    assert np.all(highs >= cfg.f_base), "f_max fell below f_base"
    uniform = rng.integers(cfg.f_base, highs + 1)
    return np.where(use_base, cfg.f_base, uniform).astype(np.int64)


def cutoff_distribution(k: int, cfg: FgoConfig, n_steps: int) -> np.ndarray:
    """Exact probability of each cut-off ``0..N`` under :func:`sample_cutoff`."""
    probs = np.zeros(cfg.chunk_len + 1)
    f_max = cfg.f_max(k, n_steps)
    width = f_max - cfg.f_base + 1
    probs[cfg.f_base] += cfg.p_base
    probs[cfg.f_base:f_max + 1] += (1.0 - cfg.p_base) / width
    return probs
