import numpy as np
import pytest
from scipy.special import expit
from sklearn.base import clone

from timeadaptive.gated import (GRUClassifier, GRUForecaster, TrainConfig, backward,
                                classification_arrays, forward,
                                gated_generate, gated_step, init_gated, loss_and_grad, train)
from timeadaptive.numerics import make_rng
from timeadaptive.series import SampledSeries
from timeadaptive.timegrid import TimeTransform

TF = TimeTransform.fixed("linear", 1.0)


def _model(variant, H=6, n_in=2, n_out=3, seed=0):
    return init_gated(variant, H, n_in, n_out, None if variant == "gru" else TF, rng=seed)


def naive_gru(model, xs, dts):
    """Per-step update written from the gate equations, one sequence."""
    h = np.zeros(model.n_hidden)
    out = []
    for x, d in zip(xs, dts):
        xb = np.concatenate([[1.0], x, [d] if model.variant == "grut" else []])
        z = expit(model.Wz @ xb + model.Uz @ h)
        r = expit(model.Wr @ xb + model.Ur @ h)
        c = np.tanh(model.Wh @ xb + model.Uh @ (r * h))
        g = z * d if model.variant == "tagru" else z
        h = (1 - g) * h + g * c
        out.append(model.W_out[:, 0] + model.W_out[:, 1:] @ h)
    return np.array(out)


@pytest.mark.parametrize("variant", ["gru", "grut", "tagru"])
def test_forward_matches_naive(variant):
    m = _model(variant)
    rng = make_rng(1)
    X = rng.normal(size=(12, 2))
    dt = rng.uniform(0.1, 1.0, size=12)
    Y, _ = forward(m, X, dt)
    np.testing.assert_allclose(Y, naive_gru(m, X, dt), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("variant", ["gru", "grut", "tagru"])
def test_step_matches_forward(variant):
    m = _model(variant)
    X = make_rng(2).normal(size=(5, 2))
    dt = np.linspace(0.2, 1.0, 5)
    _, cache = forward(m, X, dt)
    h = np.zeros(m.n_hidden)
    for t in range(5):
        h, gates = gated_step(m, h, X[t], dt[t])
        assert set(gates) == {"z", "r", "candidate"}
    np.testing.assert_allclose(h, cache["H"][0, -1], rtol=1e-13)


def test_tagru_unit_step_is_gru():
    g = _model("gru", seed=4)
    t = init_gated("tagru", 6, 2, 3, TF, rng=4)
    X = make_rng(3).normal(size=(4, 9, 2))
    np.testing.assert_array_equal(forward(g, X)[0], forward(t, X, np.ones((4, 9)))[0])


def test_zero_step_holds_state():
    m = _model("tagru")
    h0 = make_rng(5).uniform(-0.5, 0.5, 6)
    h, _ = gated_step(m, h0, [0.3, -0.2], 0.0)
    np.testing.assert_array_equal(h, h0)


def test_tagru_rejects_steps_above_one():
    with pytest.raises(ValueError):
        forward(_model("tagru"), np.zeros((3, 2)), np.array([0.5, 1.5, 0.2]))


@pytest.mark.parametrize("variant", ["gru", "grut", "tagru"])
@pytest.mark.parametrize("task", ["classify", "regress"])
def test_gradients_match_central_differences(variant, task):
    m = _model(variant, H=5, n_in=2, n_out=3 if task == "classify" else 2, seed=7)
    rng = make_rng(8)
    X = rng.normal(size=(3, 10, 2))
    dt = rng.uniform(0.05, 1.0, size=(3, 10))
    target = rng.integers(0, 3, 3) if task == "classify" else rng.normal(size=(3, 10, 2))
    _, grads = loss_and_grad(m, X, dt, target, task, washout=2)
    eps = 1e-5
    for name, p in m.params().items():
        num = np.empty_like(p)
        for idx in np.ndindex(p.shape):
            losses = []
            for sgn in (1, -1):
                q = p.copy()
                q[idx] += sgn * eps
                losses.append(loss_and_grad(m.with_params({**m.params(), name: q}), X, dt,
                                            target, task, washout=2)[0])
            num[idx] = (losses[0] - losses[1]) / (2 * eps)
        denom = np.maximum(np.abs(num) + np.abs(grads[name]), 1e-8)
        assert np.max(np.abs(num - grads[name]) / denom) < 1e-5, name


def test_backward_rejects_foreign_cache():
    a, b = _model("gru", seed=1), _model("gru", seed=2)
    Y, cache = forward(a, np.zeros((4, 2)))
    with pytest.raises(ValueError):
        backward(b, cache, np.ones_like(Y))


def test_param_counts():
    for H, n_in, n_out in [(100, 1, 8), (8, 3, 2)]:
        gru = init_gated("gru", H, n_in, n_out, rng=0).n_params
        assert gru == 3 * H * (n_in + 1) + 3 * H * H + n_out * (H + 1)
        assert init_gated("tagru", H, n_in, n_out, TF, rng=0).n_params == gru
        assert init_gated("grut", H, n_in, n_out, TF, rng=0).n_params == gru + 3 * H


def test_training_reduces_validation_loss_and_keeps_best():
    rng = make_rng(0)
    X = rng.normal(size=(64, 8, 1))
    y = (X[:, :, 0].mean(axis=1) > 0).astype(int)
    m = init_gated("gru", 8, 1, 2, rng=1)
    data = (X[:48], np.ones((48, 8)), y[:48])
    val = (X[48:], np.ones((16, 8)), y[48:])
    cfg = TrainConfig(task="classify", epochs=30, batch_size=16, lr=1e-2)
    best, hist = train(m, data, val, cfg)
    assert len(hist) == 30
    assert min(h["val_loss"] for h in hist) < hist[0]["val_loss"]
    assert best.info["best_val_loss"] == pytest.approx(min(h["val_loss"] for h in hist))
    assert best.info["optimizer"] == "adam"


def test_training_is_deterministic():
    rng = make_rng(3)
    X = rng.normal(size=(20, 5, 1))
    y = rng.integers(0, 2, 20)
    cfg = TrainConfig(task="classify", epochs=3, batch_size=8, seed=4)
    runs = [train(init_gated("gru", 4, 1, 2, rng=0), (X, np.ones((20, 5)), y),
                  (X, np.ones((20, 5)), y), cfg)[0] for _ in range(2)]
    np.testing.assert_array_equal(runs[0].Uz, runs[1].Uz)


class TestEstimators:
    def test_classifier(self):
        rng = make_rng(0)
        seqs, y = [], []
        for i in range(60):
            c = i % 2
            t = np.sort(rng.choice(50, size=6, replace=False)).astype(float)
            seqs.append(SampledSeries(t, (2 * c - 1) + 0.2 * rng.normal(size=6)))
            y.append(c)
        clf = GRUClassifier(variant="tagru", n_hidden=6, epochs=40, lr=1e-2, random_state=0)
        assert clone(clf).get_params()["n_hidden"] == 6
        clf.fit(seqs, y)
        assert clf.score(seqs, y) > 0.9
        assert clf.decision_function(seqs).shape == (60, 2)

    def test_forecaster_and_generation(self):
        t = np.cumsum(make_rng(1).uniform(0.5, 1.5, 300))
        s = SampledSeries(t, np.sin(0.2 * t))
        est = GRUForecaster(variant="grut", n_hidden=8, epochs=5, validation_length=50,
                            random_state=0).fit(s)
        assert est.predict(s).shape == (299, 1)
        out = est.forecast(s[:100], np.diff(t[99:120]))
        assert len(out) == 20
        np.testing.assert_allclose(out.timestamps, t[100:120])

    def test_generate_needs_square_io(self):
        m = init_gated("gru", 4, 1, 2, rng=0)
        with pytest.raises(ValueError):
            gated_generate(m, SampledSeries.regular(np.zeros(5)), [1.0])


def test_ragged_classification_rejected():
    m = init_gated("gru", 4, 1, 2, rng=0)
    seqs = [SampledSeries.regular(np.zeros(5)), SampledSeries.regular(np.zeros(6))]
    with pytest.raises(ValueError, match="equal-length"):
        classification_arrays(m, seqs)
