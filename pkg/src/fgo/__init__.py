"""Frequency-guided diffusion sampling for action chunks."""
from .denoiser import GaussianOracle, MlpDenoiser, embed_scalar
from .sampler import SampleTrace, sample_fgo, sample_unguided
from .schedule import FgoConfig, NoiseSchedule, make_schedule

__version__ = "0.1.0"

__all__ = [
    "FgoConfig",
    "GaussianOracle",
    "MlpDenoiser",
    "NoiseSchedule",
    "SampleTrace",
    "embed_scalar",
    "make_schedule",
    "sample_fgo",
    "sample_unguided",
]
