import numpy as np
import pytest

from fgo.denoiser import GaussianOracle, MlpDenoiser
from fgo.schedule import FgoConfig, cutoff_distribution, make_schedule, sample_cutoffs
from fgo.spectral import low_pass_each, orthonormal_basis
from fgo.training import (AdamState, TrainConfig, TrainReport, load_checkpoint, optimizer_update,
                          save_checkpoint, train)

CHI2_99 = {13: 27.68824961045705}


def gaussian_data(rng, n, mode_var):
    basis = orthonormal_basis(len(mode_var))
    return (basis @ (rng.standard_normal((n, len(mode_var))) * np.sqrt(mode_var)).T).T[:, :, None]


@pytest.fixture
def small_problem():
    rng = np.random.default_rng(3)
    chunks = rng.standard_normal((96, 8, 2))
    contexts = rng.standard_normal((96, 4))
    return contexts, chunks, make_schedule(20)


def test_zero_gradients_leave_parameters_unchanged():
    params = [np.array([1.0, -2.0]), np.array([[0.5]])]
    before = [p.copy() for p in params]
    state = AdamState.zeros_like(params)
    optimizer_update(params, [np.zeros(2), np.zeros((1, 1))], state, TrainConfig())
    for a, b in zip(params, before):
        assert np.array_equal(a, b)


def test_adam_step_by_hand():
    cfg = TrainConfig(learning_rate=0.1, b1=0.0, b2=0.0, eps_hat=1e-8)
    params = [np.array([0.0])]
    state = AdamState.zeros_like(params)
    for step in range(1, 4):
        optimizer_update(params, [np.array([1.0])], state, cfg)
        assert params[0][0] == pytest.approx(-step * 0.1 / (1 + 1e-8), rel=1e-15)


def test_adam_bias_correction_first_step():
    # with default decays the first corrected step is lr * g / (|g| + eps)
    cfg = TrainConfig(learning_rate=0.01)
    params = [np.array([1.0, 1.0])]
    state = AdamState.zeros_like(params)
    optimizer_update(params, [np.array([3.0, -0.5])], state, cfg)
    np.testing.assert_allclose(params[0], [1 - 0.01 * 3 / (3 + 1e-8), 1 + 0.01 * 0.5 / (0.5 + 1e-8)], rtol=1e-12)


def test_optimizer_rejects_mismatched_gradients():
    params = [np.zeros(2)]
    with pytest.raises(ValueError):
        optimizer_update(params, [np.zeros(3)], AdamState.zeros_like(params), TrainConfig())


def test_invalid_train_config():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        TrainConfig(b1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)


def test_training_is_deterministic(small_problem):
    contexts, chunks, sched = small_problem
    runs = []
    for _ in range(2):
        m = MlpDenoiser(8, 2, hidden=16, depth=2, seed=1)
        rep = train(m, contexts, chunks, sched, FgoConfig(8), TrainConfig(epochs=3, batch_size=32, seed=5))
        runs.append((rep.losses, [p.copy() for p in m.params]))
    assert runs[0][0] == runs[1][0]
    for a, b in zip(runs[0][1], runs[1][1]):
        assert np.array_equal(a, b)


def test_full_band_training_reduces_to_standard(small_problem):
    contexts, chunks, sched = small_problem
    cfg = TrainConfig(epochs=3, batch_size=32, seed=9)
    a = MlpDenoiser(8, 2, hidden=16, depth=2, seed=2)
    b = MlpDenoiser(8, 2, hidden=16, depth=2, seed=2)
    ra = train(a, contexts, chunks, sched, FgoConfig(8, f_base=8, p_base=1.0), cfg)
    rb = train(b, contexts, chunks, sched, FgoConfig(8), cfg, standard=True)
    assert ra.losses == rb.losses
    assert set(np.nonzero(ra.cutoff_counts)[0]) == {8}


def test_one_epoch_visits_every_sample_once(small_problem):
    contexts, chunks, sched = small_problem
    seen = []

    class Spy(MlpDenoiser):
        def loss_and_grad(self, noisy, k, context, f, target):
            seen.extend(context[:, 0].tolist())
            return super().loss_and_grad(noisy, k, context, f, target)

    ids = np.arange(len(chunks), dtype=np.float64)
    ctx = contexts.copy()
    ctx[:, 0] = ids
    train(Spy(8, 2, hidden=8, depth=1), ctx, chunks, sched, FgoConfig(8), TrainConfig(epochs=1, batch_size=40))
    assert sorted(seen) == ids.tolist()


def test_resume_matches_uninterrupted_run(small_problem, tmp_path):
    contexts, chunks, sched = small_problem
    fgo = FgoConfig(8)
    full = MlpDenoiser(8, 2, hidden=16, depth=2, seed=0)
    ref = train(full, contexts, chunks, sched, fgo, TrainConfig(epochs=4, batch_size=32, seed=1))

    first = MlpDenoiser(8, 2, hidden=16, depth=2, seed=0)
    cfg = TrainConfig(epochs=2, batch_size=32, seed=1, checkpoint_every=2)
    rep = train(first, contexts, chunks, sched, fgo, cfg, checkpoint_path=tmp_path / "c.fgt")
    model, state, epoch, step, _ = load_checkpoint(tmp_path / "c.fgt")
    assert (epoch, step, state.t) == (2, 6, 6)
    rest = train(model, contexts, chunks, sched, fgo, TrainConfig(epochs=4, batch_size=32, seed=1),
                 state=state, start_epoch=epoch, start_step=step)
    assert rep.losses + rest.losses == ref.losses
    for a, b in zip(model.params, full.params):
        assert np.array_equal(a, b)


def test_checkpoint_round_trip(tmp_path):
    m = MlpDenoiser(4, 1, hidden=8, depth=2, seed=3)
    state = AdamState([p + 1 for p in m.params], [p * 2 for p in m.params], 17)
    save_checkpoint(tmp_path / "c.fgt", m, state, 5, 40)
    back, st, epoch, step, header = load_checkpoint(tmp_path / "c.fgt")
    assert (epoch, step, st.t) == (5, 40, 17)
    for a, b in zip(state.m + state.v, st.m + st.v):
        assert np.array_equal(a, b)
    assert header["meta"]["kind"] == "mlp_denoiser"


def test_cutoff_histogram_matches_mixture(small_problem):
    rng = np.random.default_rng(0)
    chunks = rng.standard_normal((20000, 16, 1))
    contexts = np.zeros((20000, 4))
    fgo = FgoConfig(16, f_base=3, p_base=0.2, kfc_enabled=False)
    m = MlpDenoiser(16, 1, hidden=4, depth=1)
    rep = train(m, contexts, chunks, make_schedule(10), fgo, TrainConfig(epochs=1, batch_size=500))
    probs = cutoff_distribution(5, fgo, 10)
    support = probs > 0
    expected = probs[support] * rep.cutoff_counts.sum()
    stat = np.sum((rep.cutoff_counts[support] - expected) ** 2 / expected)
    assert stat < CHI2_99[int(support.sum()) - 1]
    assert rep.cutoff_counts.sum() == 20000


def test_loss_csv_is_reproducible(small_problem, tmp_path):
    contexts, chunks, sched = small_problem
    texts = []
    for i in range(2):
        m = MlpDenoiser(8, 2, hidden=8, depth=1)
        rep = train(m, contexts, chunks, sched, FgoConfig(8), TrainConfig(epochs=2, batch_size=32))
        rep.write_csv(tmp_path / f"l{i}.csv")
        texts.append((tmp_path / f"l{i}.csv").read_bytes())
    assert texts[0] == texts[1]
    lines = texts[0].decode().splitlines()
    assert lines[0] == "step,epoch,loss,f,k" and len(lines) == 1 + 6


def test_train_input_errors(small_problem):
    contexts, chunks, sched = small_problem
    m = MlpDenoiser(8, 2)
    with pytest.raises(ValueError):
        train(m, contexts[:5], chunks, sched, FgoConfig(8), TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train(m, contexts[:0], chunks[:0], sched, FgoConfig(8), TrainConfig(epochs=1))


def test_training_approaches_oracle_error():
    """2000 Adam steps on Gaussian data get within 10% of the irreducible error."""
    rng = np.random.default_rng(0)
    sched = make_schedule(100)
    mode_var = np.array([2.0, 1.0, 0.5, 0.3, 0.2, 0.1, 0.05, 0.05])
    fgo = FgoConfig(8, f_base=2, p_base=0.2, beta=0.5)
    data = gaussian_data(rng, 32000, mode_var)
    model = MlpDenoiser(8, 1, 4, hidden=64, depth=3, seed=0)
    rep = train(model, np.zeros((len(data), 4)), data, sched, fgo,
                TrainConfig(epochs=16, batch_size=256, learning_rate=3e-3))
    assert len(rep.losses) == 2000
    assert rep.epoch_losses[-1] < rep.epoch_losses[0]

    oracle = GaussianOracle.from_mode_variances(sched, mode_var)
    n = 20000
    a0 = gaussian_data(rng, n, mode_var)
    draws = np.random.default_rng(5)
    ks = draws.integers(1, 101, n)
    fs = sample_cutoffs(draws, ks, fgo, 100)
    eps = draws.standard_normal(a0.shape)
    ab = sched.alpha_bars[ks - 1][:, None, None]
    x = np.sqrt(ab) * low_pass_each(a0, fs) + np.sqrt(1 - ab) * eps
    floor = np.mean((oracle.predict(x, ks, None, fs) - eps) ** 2)
    achieved = np.mean((model.predict(x, ks, np.zeros((n, 4)), fs) - eps) ** 2)
    assert achieved <= 1.10 * floor


def test_report_defaults():
    rep = TrainReport()
    assert np.isnan(rep.final_loss)
