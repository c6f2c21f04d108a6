import numpy as np
import pytest

from staug.forecaster import (
    LinearForecastModel,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    load_model,
    loss_and_grad,
    mae,
    mse,
    predict,
    save_model,
    train,
)
from staug.sampling import ConfigError
from staug.series import MultivariateSeries, ShapeError, WindowPair, enumerate_windows


def doubling_windows(n, seed, c=1, d=8, h=4):
    """Exactly linear task: every future step equals twice the last history value."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(n):
        hist = rng.standard_normal((c, d))
        out.append(WindowPair(hist, np.repeat(2 * hist[:, -1:], h, axis=1), k))
    return out


def test_zero_model_predicts_zero():
    m = LinearForecastModel.zeros(2, 5, 3)
    out = predict(m, np.random.default_rng(0).standard_normal((2, 5)))
    assert out.shape == (2, 3) and np.all(out == 0)


def test_persistence_weights_follow_layout():
    c, d, h = 3, 5, 4
    m = LinearForecastModel.zeros(c, d, h)
    for ch in range(c):
        m.weights[ch * h:(ch + 1) * h, ch * d + d - 1] = 1.0
    hist = np.random.default_rng(1).standard_normal((c, d))
    np.testing.assert_array_equal(predict(m, hist), np.repeat(hist[:, -1:], h, axis=1))


def test_predict_shape_error():
    with pytest.raises(ShapeError):
        predict(LinearForecastModel.zeros(2, 5, 3), np.zeros((2, 4)))


def test_metric_examples():
    assert mse([[1.0, 2.0]], [[0.0, 4.0]]) == 2.5
    assert mae([[1.0, 2.0]], [[0.0, 4.0]]) == 1.5
    t = np.random.default_rng(0).standard_normal((3, 4))
    assert mse(t + 2, t) == pytest.approx(4.0) and mae(t + 2, t) == pytest.approx(2.0)
    assert mse(t, t) == 0.0
    with pytest.raises(ShapeError):
        mse(np.zeros((2, 3)), np.zeros((3, 2)))


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    c, d, h, n = 3, 4, 2, 6
    m = LinearForecastModel(rng.standard_normal((c * h, c * d)), rng.standard_normal(c * h), c, d, h)
    hist = rng.standard_normal((n, c, d))
    fut = rng.standard_normal((n, c, h))
    _, g_w, g_b = loss_and_grad(m, hist, fut)
    eps = 1e-6
    num_w = np.zeros_like(m.weights)
    for idx in np.ndindex(*m.weights.shape):
        p, q = m.copy(), m.copy()
        p.weights[idx] += eps
        q.weights[idx] -= eps
        num_w[idx] = (loss_and_grad(p, hist, fut)[0] - loss_and_grad(q, hist, fut)[0]) / (2 * eps)
    num_b = np.zeros_like(m.bias)
    for i in range(m.bias.size):
        p, q = m.copy(), m.copy()
        p.bias[i] += eps
        q.bias[i] -= eps
        num_b[i] = (loss_and_grad(p, hist, fut)[0] - loss_and_grad(q, hist, fut)[0]) / (2 * eps)
    assert np.linalg.norm(g_w - num_w) / np.linalg.norm(num_w) < 1e-5
    assert np.linalg.norm(g_b - num_b) / np.linalg.norm(num_b) < 1e-5


def test_learns_exactly_linear_task():
    tr, held = doubling_windows(256, 0), doubling_windows(64, 1)
    cfg = TrainConfig(learning_rate=0.05, decay=0.98, epochs=150, batch_size=32, seed=3)
    model, losses = train(LinearForecastModel.zeros(1, 8, 4), tr, cfg=cfg)
    assert losses[-1] < 1e-3
    assert evaluate(model, held)["mse"] < 1e-3
    # closed-form least squares through the same layout
    X = np.array([np.append(w.history.reshape(-1), 1.0) for w in tr])
    Y = np.array([w.future.reshape(-1) for w in tr])
    sol = np.linalg.lstsq(X, Y, rcond=None)[0]
    np.testing.assert_allclose(model.weights, sol[:-1].T, atol=0.05)


def test_loss_trace_deterministic_and_settles():
    tr = doubling_windows(128, 5)
    cfg = TrainConfig(learning_rate=0.05, decay=0.9, epochs=30, batch_size=16, seed=11)
    _, a = train(LinearForecastModel.zeros(1, 8, 4), tr, cfg=cfg)
    _, b = train(LinearForecastModel.zeros(1, 8, 4), tr, cfg=cfg)
    assert a == b
    assert all(later <= earlier + 1e-6 for earlier, later in zip(a[3:], a[4:]))


def test_zero_model_on_standardized_targets():
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((2, 600))
    vals = (vals - vals.mean(axis=1, keepdims=True)) / vals.std(axis=1, keepdims=True)
    ws = enumerate_windows(MultivariateSeries(vals), 24, 12, stride=6)
    assert len(ws) >= 50
    target_var = np.mean([np.mean(w.future ** 2) for w in ws])
    got = evaluate(LinearForecastModel.zeros(2, 24, 12), ws)["mse"]
    assert abs(got - target_var) <= 0.1 * target_var
    assert abs(got - 1.0) < 0.1


def test_evaluate_does_not_touch_inputs():
    ws = doubling_windows(20, 2)
    m = LinearForecastModel(np.random.default_rng(1).standard_normal((4, 8)), np.zeros(4), 1, 8, 4)
    before = m.weights.copy()
    first = evaluate(m, ws)
    assert evaluate(m, ws) == first
    np.testing.assert_array_equal(m.weights, before)
    perfect = evaluate(m, [WindowPair(w.history, predict(m, w.history)) for w in ws])
    assert perfect["mse"] < 1e-24 and perfect["mae"] < 1e-12
    with pytest.raises(ConfigError):
        evaluate(m, [])


def test_divergence_is_reported():
    tr = doubling_windows(64, 0)
    cfg = TrainConfig(learning_rate=1e6, decay=1.0, epochs=20, batch_size=8)
    with pytest.raises(TrainingDiverged) as err, np.errstate(over="ignore", invalid="ignore"):
        train(LinearForecastModel.zeros(1, 8, 4), tr, cfg=cfg)
    assert err.value.epoch >= 0


def test_augmenter_receives_index_and_key():
    tr = doubling_windows(10, 0)
    seen = []

    def spy(i, key):
        seen.append((i, key))
        return tr[i]

    train(LinearForecastModel.zeros(1, 8, 4), tr, spy, TrainConfig(learning_rate=0.01, epochs=2, batch_size=4))
    assert len(seen) == 20
    assert sorted(i for i, k in seen if k[0] == 0) == list(range(10))


def test_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(learning_rate=0)
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0)
    with pytest.raises(ConfigError):
        TrainConfig(decay=1.5)
    with pytest.raises(ConfigError):
        train(LinearForecastModel.zeros(1, 2, 2), [])


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    m = LinearForecastModel(rng.standard_normal((6, 12)), rng.standard_normal(6), 3, 4, 2)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert (back.c, back.d, back.h) == (3, 4, 2)
    np.testing.assert_array_equal(back.weights, m.weights)
    np.testing.assert_array_equal(back.bias, m.bias)
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_model(tmp_path / "bad.json")
