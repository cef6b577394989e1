import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from timeadaptive.numerics import make_rng, spectral_radius
from timeadaptive.reservoir import (ESNClassifier, ESNForecaster, UntrainedModelError,
                                    classify_sequence, init_reservoir, readout_features,
                                    readout_from_states, run_generative, run_states,
                                    run_teacher_forced, sequence_features, step,
                                    train_classifier_readout, train_readout)
from timeadaptive.series import SampledSeries
from timeadaptive.timegrid import TimeTransform


def naive_trajectory(W_in, U, alpha, xs, dts, extra_dt_input=False):
    """Explicit per-unit loop, independent of the vectorized code."""
    n = U.shape[0]
    h = [0.0] * n
    out = []
    for x, dt in zip(xs, dts):
        u = list(x) + ([dt] if extra_dt_input else [])
        a = alpha * dt if not extra_dt_input else alpha
        new = []
        for i in range(n):
            s = W_in[i, 0] + sum(W_in[i, 1 + j] * u[j] for j in range(len(u)))
            s += sum(U[i, k] * h[k] for k in range(n))
            new.append((1 - a) * h[i] + a * np.tanh(s))
        h = new
        out.append(h)
    return np.array(out)


def _irregular(n, seed, dims=1):
    rng = make_rng(seed)
    t = np.concatenate([[0.0], np.cumsum(rng.uniform(0.2, 1.0, n - 1))])
    return SampledSeries(t, rng.normal(size=(n, dims)))


class TestInit:
    def test_shapes_and_radius(self):
        m = init_reservoir("esnt", n_units=30, n_in=2, radius=0.8,
                           transform=TimeTransform.fixed(), rng=0)
        assert m.W_in.shape == (30, 4)  # bias, 2 inputs, step
        assert spectral_radius(m.U) == pytest.approx(0.8, abs=1e-12)
        assert m.n_features == 1 + 3 + 30

    def test_same_seed_same_weights_across_variants(self):
        a = init_reservoir("esn", 20, rng=5)
        b = init_reservoir("taesn", 20, transform=TimeTransform.fixed(), rng=5)
        np.testing.assert_array_equal(a.W_in, b.W_in)
        np.testing.assert_array_equal(a.U, b.U)

    @pytest.mark.parametrize("kw", [{"variant": "lstm"}, {"alpha": 0.0}, {"alpha": 1.5},
                                    {"radius": 0.0}, {"n_units": 0}, {"variant": "taesn"}])
    def test_invalid(self, kw):
        base = dict(variant="esn", n_units=5, rng=0)
        base.update(kw)
        with pytest.raises(ValueError):
            init_reservoir(**base)


class TestDynamics:
    @pytest.mark.parametrize("variant", ["esn", "taesn", "esnt"])
    def test_matches_naive_loop(self, variant):
        tf = None if variant == "esn" else TimeTransform.fixed("linear", 1.0)
        m = init_reservoir(variant, 8, 2, alpha=0.6, radius=0.9, transform=tf, rng=1)
        s = _irregular(15, 2, dims=2)
        states, _ = run_teacher_forced(m, s)
        dt = np.ones(14) if variant == "esn" else s.deltas
        ref = naive_trajectory(m.W_in, m.U, m.alpha if variant != "esn" else 1.0,
                               s.values[:-1], dt if variant != "esn" else np.full(14, m.alpha),
                               extra_dt_input=variant == "esnt")
        np.testing.assert_allclose(states[1:], ref, rtol=1e-12, atol=1e-14)

    def test_unit_step_taesn_equals_esn(self):
        esn = init_reservoir("esn", 40, 1, alpha=0.3, rng=9)
        ta = init_reservoir("taesn", 40, 1, alpha=0.3, transform=TimeTransform.fixed(), rng=9)
        x = make_rng(0).normal(size=(100, 1))
        np.testing.assert_array_equal(run_states(esn, x, np.ones(100)),
                                      run_states(ta, x, np.ones(100)))

    def test_zero_step_freezes_state(self):
        m = init_reservoir("taesn", 10, 1, alpha=0.5, transform=TimeTransform.fixed(), rng=0)
        h = make_rng(1).normal(size=10)
        np.testing.assert_array_equal(step(m, h, [0.3], 0.0), h)

    def test_step_too_large_rejected(self):
        m = init_reservoir("taesn", 5, 1, alpha=0.5, transform=TimeTransform.fixed(clip=None), rng=0)
        with pytest.raises(ValueError, match="exceeds 1"):
            step(m, np.zeros(5), [1.0], 2.5)

    def test_batched_equals_individual(self):
        m = init_reservoir("taesn", 12, 1, alpha=0.4, transform=TimeTransform.fixed(), rng=3)
        rng = make_rng(4)
        X = rng.normal(size=(3, 20, 1))
        dt = rng.uniform(0.1, 1.0, size=(3, 20))
        batch = run_states(m, X, dt)
        for b in range(3):
            np.testing.assert_allclose(batch[b], run_states(m, X[b], dt[b]), rtol=0, atol=1e-15)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 10**6), alpha=st.floats(0.05, 1.0))
    def test_states_bounded(self, seed, alpha):
        m = init_reservoir("taesn", 20, 1, alpha=alpha, radius=1.3,
                           transform=TimeTransform.fixed(), rng=seed)
        x = make_rng(seed).normal(scale=10.0, size=(50, 1))
        H = run_states(m, x, make_rng(seed + 1).uniform(0, 1, 50))
        assert np.all(np.abs(H) <= 1.0)


class TestReadout:
    def test_planted_readout_recovered(self):
        m = init_reservoir("esn", 25, 1, alpha=0.5, rng=0)
        s = _irregular(400, 0)
        states, inputs = run_teacher_forced(m, s)
        F = readout_features(m, states, inputs)
        W_true = make_rng(1).normal(size=(1, F.shape[1]))
        fitted = train_readout(m, s, targets=F @ W_true.T, lam=0.0, washout=10)
        np.testing.assert_allclose(fitted.W_out, W_true, rtol=1e-6, atol=1e-8)
        assert fitted.info["train_rmse"] < 1e-8

    def test_prefix_fit_equals_full_fit_on_prefix(self):
        m = init_reservoir("taesn", 20, 1, alpha=0.5, transform=TimeTransform.fixed(), rng=2)
        s = _irregular(300, 3)
        states, inputs = run_teacher_forced(m, s)
        a = readout_from_states(m, states[:200], inputs[:200], s.values[:200], lam=1e-4, washout=20)
        b = train_readout(m, s[:200], lam=1e-4, washout=20)
        np.testing.assert_allclose(a.W_out, b.W_out, rtol=1e-10)

    def test_washout_too_long(self):
        m = init_reservoir("esn", 5, 1, rng=0)
        with pytest.raises(ValueError):
            train_readout(m, _irregular(10, 0), washout=9)

    def test_generate_untrained(self):
        m = init_reservoir("esn", 5, 1, rng=0)
        with pytest.raises(UntrainedModelError):
            run_generative(m, _irregular(10, 0), [1.0])


class TestGenerative:
    def _trained(self):
        m = init_reservoir("taesn", 30, 1, alpha=0.5, transform=TimeTransform.fixed("linear", 1.0), rng=4)
        s = _irregular(300, 5)
        return train_readout(m, s, lam=1e-3, washout=20), s

    def test_first_step_is_one_step_prediction(self):
        m, s = self._trained()
        full, inputs = run_teacher_forced(m, s[:101])
        one_step = readout_features(m, full, inputs)[-1] @ m.W_out.T
        gen = run_generative(m, s[:100], [s.deltas[99]])
        np.testing.assert_allclose(gen.values[0], one_step, rtol=1e-12)
        assert gen.timestamps[0] == pytest.approx(s.timestamps[100])

    def test_zero_horizon(self):
        m, s = self._trained()
        out = run_generative(m, s[:50], [])
        assert len(out) == 0

    def test_h0_matches_long_primer(self):
        m, s = self._trained()
        states, _ = run_teacher_forced(m, s[:120])
        a = run_generative(m, s[:120], [0.5, 0.7])
        b = run_generative(m, s[119:120], [0.5, 0.7], h0=states[-1])
        np.testing.assert_allclose(a.values, b.values, rtol=1e-13)


class TestClassification:
    def _data(self, n=40):
        rng = make_rng(0)
        seqs, y = [], []
        for i in range(n):
            c = i % 2
            L = int(rng.integers(8, 12))
            t = np.sort(rng.choice(100, size=L, replace=False)).astype(float)
            v = (1.0 if c else -1.0) + 0.1 * rng.normal(size=L)
            seqs.append(SampledSeries(t, v, label=c))
            y.append(c)
        return seqs, np.array(y)

    def test_separable_classes(self):
        seqs, y = self._data()
        m = init_reservoir("taesn", 30, 1, alpha=0.5, transform=TimeTransform("linear").fit([99.0]), rng=0)
        m = train_classifier_readout(m, seqs, y, lam=1e-3)
        pred = [int(np.argmax(classify_sequence(m, s))) for s in seqs]
        assert np.mean(np.array(pred) == y) == 1.0

    def test_batched_features_equal_single(self):
        seqs, _ = self._data(6)
        m = init_reservoir("esnt", 10, 1, transform=TimeTransform("linear").fit([99.0]), rng=1)
        F = sequence_features(m, seqs)
        for i, s in enumerate(seqs):
            np.testing.assert_allclose(F[i], sequence_features(m, [s])[0], rtol=1e-13)


class TestEstimators:
    def test_forecaster_api(self):
        s = _irregular(200, 1)
        est = ESNForecaster(variant="taesn", n_units=20, washout=10, random_state=0)
        assert clone(est).get_params()["n_units"] == 20
        with pytest.raises(NotFittedError):
            est.predict(s)
        est.fit(s)
        assert est.predict(s).shape == (200, 1)
        assert len(est.forecast(s[:50], np.ones(7))) == 7

    def test_forecaster_plain_arrays(self):
        x = np.sin(0.3 * np.arange(300))
        est = ESNForecaster(variant="esn", n_units=50, alpha=0.5, ridge=1e-8, washout=20).fit(x)
        err = est.predict(x)[50:, 0] - x[50:]
        assert np.sqrt(np.mean(err ** 2)) < 1e-3

    def test_classifier_api_and_labels(self):
        X = np.concatenate([np.full((10, 8), 1.0), np.full((10, 8), -1.0)])
        X += 0.05 * make_rng(0).normal(size=X.shape)
        y = np.array(["up"] * 10 + ["down"] * 10)
        clf = ESNClassifier(variant="esn", n_units=20, ridge=1e-3).fit(X, y)
        assert set(clf.classes_) == {"down", "up"}
        assert clf.score(X, y) == 1.0

    def test_dimension_mismatch(self):
        est = ESNForecaster(variant="esn", n_units=10, washout=5).fit(np.zeros((30, 2)) + 0.1)
        with pytest.raises(ValueError):
            est.predict(np.zeros((30, 3)))
