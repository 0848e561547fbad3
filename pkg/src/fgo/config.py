"""Flat ``key = value`` run configuration.

One setting per line, ``#`` starts a comment, no sections. Unknown keys are
an error so typos do not silently fall back to defaults.
"""
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .datagen import DemoSpec
from .schedule import FgoConfig, make_schedule, respace
from .training import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # data
    n_demos: int = 2000
    chunk_len: int = 16
    dims: int = 2
    f_clean: int = 3
    jitter_std: float = 0.1
    pause_prob: float = 0.1
    jerk_prob: float = 0.1
    context_dim: int = 4
    # network and optimizer
    hidden: int = 128
    depth: int = 3
    embed_dim: int = 16
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    b1: float = 0.9
    b2: float = 0.999
    eps_hat: float = 1e-8
    checkpoint_every: int = 0
    # diffusion and guidance
    schedule: str = "squared-cosine"
    k_train: int = 100
    k_infer: int = 50
    final_step_noise: bool = False
    variance: str = "posterior"
    f_base: int = 3
    p_base: float = 0.2
    beta: float = 0.5
    kfc: bool = True
    f_schedule: str = "linear"
    omega_schedule: str = "linear"
    omega_const: float = 1.0
    complete_band: bool = True
    clip: float = -1.0  # < 0: bound from the training data, 0: no clipping
    # oracle mode
    oracle_mode_var: tuple = (2.0, 1.5, 1.0, 0.8, 0.7, 0.6, 0.5, 0.5)
    oracle_mean: float = 0.0
    # sampling and rollouts
    count: int = 16
    episodes: int = 50
    horizon: int = 48
    execute_m: int = 8
    lowpass_f: int = 4
    ensemble_decay: float = 0.01
    # metrics
    window: int = 32
    dt: float = 1.0
    # ablations
    ablate_omegas: tuple = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5)
    ablate_seeds: tuple = (0, 1, 2)
    ablate_metric: str = "jerk_rms"
    seed: int = 0

    def __post_init__(self):
        try:
            self.demo_spec()
            self.train_config()
            self.fgo_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.train_schedule()
        if self.k_infer < 1 or self.k_infer > self.k_train:
            raise ConfigError("k_infer must lie in [1, k_train]")
        if self.window < 1 or self.dt <= 0:
            raise ConfigError("window must be >= 1 and dt positive")
        if self.ablate_metric not in ("jerk_rms", "atv"):
            raise ConfigError("ablate_metric must be jerk_rms or atv")
        if self.count < 0 or self.episodes < 1:
            raise ConfigError("count must be >= 0 and episodes >= 1")
        if not 0 <= self.lowpass_f <= self.chunk_len:
            raise ConfigError(f"lowpass_f must lie in [0, {self.chunk_len}]")

    def demo_spec(self, seed=None):
        return DemoSpec(
            n_demos=self.n_demos, chunk_len=self.chunk_len, dims=self.dims, f_clean=self.f_clean,
            jitter_std=self.jitter_std, pause_prob=self.pause_prob, jerk_prob=self.jerk_prob,
            context_dim=self.context_dim, seed=self.seed if seed is None else seed,
        )

    def train_config(self, seed=None):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
            seed=self.seed if seed is None else seed, b1=self.b1, b2=self.b2, eps_hat=self.eps_hat,
            checkpoint_every=self.checkpoint_every,
        )

    def fgo_config(self):
        return FgoConfig(
            chunk_len=self.chunk_len, f_base=self.f_base, p_base=self.p_base, beta=self.beta,
            kfc_enabled=self.kfc, f_schedule=self.f_schedule, omega_schedule=self.omega_schedule,
            omega_const=self.omega_const,
        )

    def train_schedule(self):
        try:
            return make_schedule(self.k_train, self.schedule, final_step_noise=self.final_step_noise,
                                 variance=self.variance)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def infer_schedule(self):
        sched = self.train_schedule()
        return sched if self.k_infer == self.k_train else respace(sched, self.k_infer)

    def training_key(self):
        """Settings that change a trained model; inference-only knobs are excluded."""
        names = ("n_demos", "chunk_len", "dims", "f_clean", "jitter_std", "pause_prob", "jerk_prob",
                 "context_dim", "hidden", "depth", "embed_dim", "epochs", "batch_size", "learning_rate",
                 "b1", "b2", "eps_hat", "schedule", "k_train", "f_base", "p_base", "beta", "kfc")
        return tuple((n, getattr(self, n)) for n in names)

    def with_overrides(self, **changes):
        try:
            return replace(self, **changes)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


_FIELDS = {f.name: f for f in fields(RunConfig)}
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _convert(name, raw):
    default = _FIELDS[name].default
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            kind = type(default[0])
            return tuple(kind(v) for v in raw.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None
    return raw


def parse_config(text, base=None):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return (base or RunConfig()).with_overrides(**values)


def load_config(path=None):
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def dump_config(cfg: RunConfig):
    lines = []
    for f in fields(RunConfig):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            value = ", ".join(repr(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
