import numpy as np
import pytest
from hypothesis import given, strategies as st

from fgo.metrics import aggregate, approach_window, atv, evaluate, frequency_evolution, jerk, jerk_rms
from fgo.sampler import SampleTrace


def test_atv_hand_examples():
    assert atv(np.zeros((5, 2))) == 0.0
    assert atv(np.array([0.0, 1.0, 3.0])) == 1.5
    assert atv(np.array([[0.0, 0.0], [1.0, 2.0]])) == 1.5


def test_jerk_hand_examples():
    assert jerk_rms(np.ones((7, 3))) == 0.0
    t = np.arange(10.0)
    assert jerk_rms(t**3) == 6.0
    assert jerk_rms(2 * t - 1) == 0.0
    np.testing.assert_array_equal(jerk(t**3)[:, 0], np.full(7, 6.0))


def test_jerk_scales_with_dt():
    t = np.arange(8.0)
    assert jerk_rms(t**3, dt=0.5) == pytest.approx(6.0 / 0.125)


def test_jerk_is_root_mean_square_of_vector_norm():
    traj = np.array([[0, 0], [1, 0], [0, 2], [3, 1], [1, 1]], dtype=float)
    j = traj[3:] - 3 * traj[2:-1] + 3 * traj[1:-2] - traj[:-3]
    assert jerk_rms(traj) == pytest.approx(np.sqrt(np.mean(np.sum(j**2, axis=1))))
    # the first backward stencil, written out by hand
    np.testing.assert_array_equal(j[0], [3 - 0 + 3 - 0, 1 - 6 + 0 - 0])


@given(st.integers(4, 40), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_jerk_vanishes_on_quadratics(n, a, b, c):
    t = np.arange(n, dtype=float)
    assert jerk_rms(a + b * t + c * t**2) < 1e-9 * max(1.0, abs(c) * n**2)


@given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 2**31), st.floats(0.1, 10))
def test_atv_invariances(t, d, seed, scale):
    traj = np.random.default_rng(seed).standard_normal((t, d))
    shift = np.random.default_rng(seed + 1).standard_normal(d)
    assert atv(traj + shift) == pytest.approx(atv(traj), abs=1e-12)
    assert atv(scale * traj) == pytest.approx(scale * atv(traj), rel=1e-12)
    perm = np.random.default_rng(seed).permutation(d)
    assert atv(traj[:, perm]) == pytest.approx(atv(traj), rel=1e-12)
    if t >= 4:
        assert jerk_rms(traj[:, perm]) == pytest.approx(jerk_rms(traj), rel=1e-12)


def test_short_trajectories_rejected():
    with pytest.raises(ValueError):
        atv(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        jerk_rms(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        jerk_rms(np.zeros((5, 2)), dt=0)


def test_approach_window():
    traj = np.arange(200.0).reshape(100, 2)
    np.testing.assert_array_equal(approach_window(traj), traj[:32])
    assert approach_window(traj[:10], 32).shape == (10, 2)
    assert approach_window(traj, 1).shape == (1, 2)
    with pytest.raises(ValueError):
        approach_window(traj, 0)


def test_evaluate_report():
    t = np.arange(50.0)
    traj = np.stack([t**3 / 1000, np.zeros(50)], axis=1)
    rep = evaluate(traj, window=32)
    assert rep.n_steps_used == 32
    assert rep.jerk_rms == pytest.approx(0.006)
    assert rep.atv == pytest.approx(atv(traj[:32]))
    assert rep.band_profile.shape == (32,) and np.all(rep.band_profile >= 0)
    assert rep.band_profile.sum() == pytest.approx(np.sum(traj[:32] ** 2))


def test_aggregate_population_std():
    assert aggregate([1.0, 3.0]) == (2.0, 1.0)


def _trace(states):
    return SampleTrace(ks=np.arange(len(states), 0, -1), f_ks=None, omegas=None, states=states,
                       eps_base=None, eps_fine=None, eps_tilde=None, final=states[-1])


def test_frequency_evolution_zero_and_shape():
    out = frequency_evolution(_trace(np.zeros((5, 3, 8, 1))))
    assert out.shape == (5, 2) and np.all(out == 0)


def test_frequency_evolution_energy_sums():
    states = np.random.default_rng(1).standard_normal((4, 6, 8, 2))
    out = frequency_evolution(_trace(states))
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=1), np.mean(np.sum(states**2, axis=(2, 3)), axis=1), atol=1e-9)


def test_frequency_evolution_single_sample_is_identity():
    states = np.random.default_rng(2).standard_normal((3, 1, 4, 1))
    out = frequency_evolution(_trace(states))
    even, odd = states[:, 0, 0::2, 0], states[:, 0, 1::2, 0]
    np.testing.assert_allclose(out[:, 1], np.sum((even - odd) ** 2 / 2, axis=1), atol=1e-12)


def test_frequency_evolution_rejects_odd_length():
    with pytest.raises(ValueError):
        frequency_evolution(_trace(np.zeros((2, 1, 5, 1))))
