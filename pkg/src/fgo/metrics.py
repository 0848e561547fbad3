"""Smoothness metrics and frequency reports for executed trajectories."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectral import haar_decompose, mode_energy

APPROACH_WINDOW = 32


def _trajectory(x, min_len, what):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{what} expects a (T, D) trajectory, got shape {arr.shape}")
    if arr.shape[0] < min_len:
        raise ValueError(f"{what} needs at least {min_len} time steps, got {arr.shape[0]}")
    return np.ascontiguousarray(arr)


def atv(trajectory):
    """Action total variation: mean absolute step-to-step change per dimension."""
    arr = _trajectory(trajectory, 2, "atv")
    return float(kernels.total_variation(arr[None])[0])


def jerk(trajectory, dt=1.0):
    """Backward third differences ``(a_t - 3a_{t-1} + 3a_{t-2} - a_{t-3}) / dt^3``, shape ``(T-3, D)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    arr = _trajectory(trajectory, 4, "jerk_rms")
    return kernels.third_difference(arr[None])[0] / dt**3


def jerk_rms(trajectory, dt=1.0):
    """RMS over the ``T - 3`` valid steps of the Euclidean norm of the jerk vector."""
    j = jerk(trajectory, dt)
    return float(np.sqrt(np.mean(np.sum(j**2, axis=1))))


def approach_window(trajectory, window=APPROACH_WINDOW):
    if window < 1:
        raise ValueError("window must be at least 1")
    return np.asarray(trajectory)[:window]


@dataclass(frozen=True)
class MetricsReport:
    atv: float
    jerk_rms: float
    band_profile: np.ndarray
    n_steps_used: int


def evaluate(trajectory, window=APPROACH_WINDOW, dt=1.0):
    """Metrics over the approach window of one episode."""
    part = _trajectory(approach_window(trajectory, window), 4, "evaluate")
    return MetricsReport(
        atv=atv(part),
        jerk_rms=jerk_rms(part, dt),
        band_profile=mode_energy(part),
        n_steps_used=part.shape[0],
    )


def aggregate(values):
    """``(mean, std)`` across episodes, population standard deviation."""
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def frequency_evolution(trace):
    """Mean Haar ``(approx, detail)`` energy of each recorded state, one row per step.

    Energies are averaged over the samples in the trace batch, so a trace with
    a single sample reports that sample's energies.
    """
    states = np.asarray(trace.states)
    if states.shape[-2] % 2:
        raise ValueError("Haar analysis needs an even chunk length")
    rows = np.empty((states.shape[0], 2))
    for i, state in enumerate(states):
        low, high = haar_decompose(state).energies()
        rows[i] = np.mean(low), np.mean(high)
    return rows
