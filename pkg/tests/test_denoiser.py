import numpy as np
import pytest

from fgo.denoiser import GaussianOracle, MlpDenoiser, embed_scalar
from fgo.schedule import forward_diffuse, make_schedule
from fgo.spectral import low_pass, orthonormal_basis, projector_matrix


def numeric_grad_check(model, batch, rng, h=1e-6, entries=None):
    """Worst relative error between analytic and central-difference gradients."""
    noisy, ks, ctx, fs, target = batch
    _, grads = model.loss_and_grad(noisy, ks, ctx, fs, target)
    worst = 0.0
    for p, g in zip(model.params, grads):
        idx = list(np.ndindex(p.shape))
        if entries is not None and len(idx) > entries:
            idx = [idx[i] for i in rng.choice(len(idx), entries, replace=False)]
        for i in idx:
            old = p[i]
            p[i] = old + h
            up = model.loss_and_grad(noisy, ks, ctx, fs, target)[0]
            p[i] = old - h
            down = model.loss_and_grad(noisy, ks, ctx, fs, target)[0]
            p[i] = old
            num = (up - down) / (2 * h)
            denom = max(abs(num), abs(g[i]), 1e-7)
            worst = max(worst, abs(num - g[i]) / denom)
    return worst


def random_batch(model, rng, b=5, n_steps=50):
    noisy = rng.standard_normal((b, model.chunk_len, model.dims))
    ks = rng.integers(1, n_steps + 1, size=b)
    fs = rng.integers(0, model.chunk_len + 1, size=b)
    ctx = rng.standard_normal((b, model.context_dim))
    target = rng.standard_normal(noisy.shape)
    return noisy, ks, ctx, fs, target


def test_embedding_at_zero_alternates():
    assert np.array_equal(embed_scalar(0, 8), [0, 1, 0, 1, 0, 1, 0, 1])


def test_embedding_is_deterministic_and_batched():
    np.testing.assert_array_equal(embed_scalar(7, 16), embed_scalar(7, 16))
    batch = embed_scalar(np.array([1, 7]), 16)
    np.testing.assert_array_equal(batch[1], embed_scalar(7, 16))


def test_embedding_does_not_alias_over_used_ranges():
    for dim in (8, 16):
        e = embed_scalar(np.arange(0, 1001), dim)
        d2 = np.sum((e[:, None, :] - e[None, :, :]) ** 2, axis=-1)
        np.fill_diagonal(d2, np.inf)
        assert d2.min() > 1e-6
    # one full turn of the fastest frequency still moves the slower components
    assert not np.allclose(embed_scalar(3, 16), embed_scalar(3 + 2 * np.pi, 16))


def test_embedding_rejects_odd_dim():
    with pytest.raises(ValueError):
        embed_scalar(1, 7)


def test_zero_network_predicts_zero(rng):
    m = MlpDenoiser(6, 2, context_dim=3, hidden=8, depth=2)
    for p in m.params:
        p[...] = 0.0
    noisy, ks, ctx, fs, _ = random_batch(m, rng)
    assert np.array_equal(m.predict(noisy, ks, ctx, fs), np.zeros_like(noisy))
    loss, grads = m.loss_and_grad(noisy, ks, ctx, fs, np.zeros_like(noisy))
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads)


def test_loss_is_mean_squared_error(rng):
    m = MlpDenoiser(4, 1, context_dim=2, hidden=8, depth=2, seed=3)
    noisy, ks, ctx, fs, target = random_batch(m, rng, b=1)
    pred = m.predict(noisy, ks, ctx, fs)
    loss, _ = m.loss_and_grad(noisy, ks, ctx, fs, target)
    assert loss == pytest.approx(np.mean((pred - target) ** 2), rel=1e-14)


@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = MlpDenoiser(4, 2, context_dim=3, hidden=8, depth=2, embed_dim=4, seed=seed)
    assert numeric_grad_check(m, random_batch(m, rng), rng) < 1e-4


def test_predict_is_deterministic(rng):
    m = MlpDenoiser(8, 2, seed=1)
    noisy, ks, ctx, fs, _ = random_batch(m, rng)
    assert np.array_equal(m.predict(noisy, ks, ctx, fs), m.predict(noisy, ks, ctx, fs))


def test_input_validation(rng):
    m = MlpDenoiser(8, 2)
    with pytest.raises(ValueError):
        m.predict(np.zeros((2, 7, 2)), 1, None, 8)
    with pytest.raises(FloatingPointError):
        m.predict(np.full((1, 8, 2), np.nan), 1, None, 8)
    with pytest.raises(ValueError):
        m.predict(np.zeros((2, 8, 2)), [1, 2, 3], None, 8)


def test_save_load_round_trip(tmp_path, rng):
    m = MlpDenoiser(8, 2, hidden=16, depth=2, seed=4)
    m.save(tmp_path / "m.fgt", meta={"note": "x"})
    back = MlpDenoiser.load(tmp_path / "m.fgt")
    assert back.config() == m.config()
    for a, b in zip(m.params, back.params):
        assert np.array_equal(a, b)
    noisy, ks, ctx, fs, _ = random_batch(m, rng)
    assert np.array_equal(m.predict(noisy, ks, ctx, fs), back.predict(noisy, ks, ctx, fs))


def test_point_mass_oracle_recovers_injected_noise(rng):
    s = make_schedule(30)
    mu = rng.standard_normal((6, 2))
    oracle = GaussianOracle(s, mu, np.zeros((12, 12)))
    for k in (1, 10, 30):
        eps = rng.standard_normal((1, 6, 2))
        x = forward_diffuse(mu[None], k, eps, s)
        np.testing.assert_allclose(oracle.predict(x, k, None, 6), eps, atol=1e-7)


def _epsilon_space_oracle(x, k, f, mean, cov, s):
    """E[eps | x] from the joint Gaussian of (eps, x), written in noise space."""
    ab = s.alpha_bar(k)
    p = projector_matrix(mean.shape[0], f, mean.shape[1])
    m = np.sqrt(ab) * p @ mean.reshape(-1)
    cov_x = ab * p @ cov @ p.T + (1 - ab) * np.eye(p.shape[0])
    return np.sqrt(1 - ab) * np.linalg.solve(cov_x, (x.reshape(len(x), -1) - m).T).T


@pytest.mark.parametrize("k,f", [(1, 8), (5, 3), (20, 0), (40, 6)])
def test_oracle_matches_noise_space_formula(k, f, rng):
    s = make_schedule(40)
    a = rng.standard_normal((16, 16))
    cov = a @ a.T / 16
    mean = rng.standard_normal((8, 2))
    oracle = GaussianOracle(s, mean, cov)
    x = rng.standard_normal((5, 8, 2)) * 2
    expect = _epsilon_space_oracle(x, k, f, mean, cov, s).reshape(x.shape)
    np.testing.assert_allclose(oracle.predict(x, k, None, f), expect, atol=1e-6)


def test_oracle_is_the_lowest_mse_predictor(rng):
    s = make_schedule(50)
    mv = np.array([2.0, 1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.05])
    oracle = GaussianOracle.from_mode_variances(s, mv)
    n = 10000
    basis = orthonormal_basis(8)
    a0 = (basis @ (rng.standard_normal((n, 8)) * np.sqrt(mv)).T).T[:, :, None]
    eps = rng.standard_normal(a0.shape)
    k, f = 25, 5
    x = forward_diffuse(low_pass(a0, f), k, eps, s)
    pred = oracle.predict(x, k, None, f)
    best = np.mean((pred - eps) ** 2)
    ab = s.alpha_bar(k)
    rivals = {
        "jittered oracle": pred + 0.05 * rng.standard_normal(eps.shape),
        "scaled input": x * np.sqrt(1 - ab),
        "shrunk oracle": 0.97 * pred,
        "unfiltered oracle": oracle.predict(x, k, None, 8),
    }
    for name, guess in rivals.items():
        assert best < np.mean((guess - eps) ** 2), name


def test_oracle_reconstruction_stays_in_band(rng):
    s = make_schedule(50)
    mv = np.array([1.0, 0.8, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0])
    oracle = GaussianOracle.from_mode_variances(s, mv)
    x = rng.standard_normal((20, 8, 1))
    for k in (3, 25, 50):
        ab = s.alpha_bar(k)
        clean = (x - np.sqrt(1 - ab) * oracle.predict(x, k, None, 5)) / np.sqrt(ab)
        assert np.linalg.norm(low_pass(clean, 3) - clean) < 1e-8 * max(1.0, np.linalg.norm(clean))


def test_conditional_oracle_uses_context(rng):
    s = make_schedule(20)
    oracle = GaussianOracle.from_mode_variances(
        s, np.ones(4), mean=lambda c: np.repeat(c[:, None, :1], 4, axis=1), context_dim=2, dims=1)
    x = rng.standard_normal((2, 4, 1))
    ctx = np.array([[0.0, 0.0], [3.0, 0.0]])
    out = oracle.predict(x, 5, ctx, 4)
    single = oracle.predict(x[1:], 5, ctx[1:], 4)
    np.testing.assert_allclose(out[1:], single, atol=1e-12)
    assert not np.allclose(out[0], out[1])


def test_oracle_rejects_bad_covariance():
    s = make_schedule(5)
    with pytest.raises(ValueError):
        GaussianOracle(s, np.zeros((2, 1)), np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        GaussianOracle(s, np.zeros((2, 1)), -np.eye(2))
    with pytest.raises(ValueError):
        GaussianOracle(s, lambda c: c, np.eye(2))
