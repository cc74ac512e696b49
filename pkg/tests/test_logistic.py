"""Logistic regression: stable sigmoid, exact gradients, monotone descent."""

import numpy as np
import pytest

from strokelab.data_pipeline import ClassWeights, Dataset, Provenance, class_weights
from strokelab.errors import DataError
from strokelab.logistic import (
    LogisticModel,
    LogRegConfig,
    classify,
    feature_importance,
    objective_and_gradient,
    predict_proba,
    sigmoid,
    train_logreg,
)


def _dataset(n=200, d=4, seed=0, separation=2.0):
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(n, d))
    logits = separation * features[:, 0] - 0.5
    labels = (rng.random(n) < 1.0 / (1.0 + np.exp(-logits))).astype(np.int64)
    labels[0], labels[1] = 0, 1
    return Dataset(
        features=features,
        labels=labels,
        columns=tuple(f"x{i}" for i in range(d)),
        provenance=Provenance(source="memory", split="train"),
    )


class TestSigmoid:
    def test_frozen_value(self):
        # Frozen: sigma(ln 3) = 0.75.
        assert sigmoid(np.log(3.0)) == pytest.approx(0.75, abs=1e-12)

    def test_symmetry(self):
        z = np.linspace(-30, 30, 101)
        np.testing.assert_allclose(sigmoid(z) + sigmoid(-z), 1.0, atol=1e-12)

    def test_extreme_inputs_stay_inside_unit_interval(self):
        for z in (-800.0, -100.0, 0.0, 100.0, 800.0):
            p = sigmoid(z)
            assert 0.0 < p < 1.0

    def test_monotone(self):
        z = np.linspace(-20, 20, 500)
        assert np.all(np.diff(sigmoid(z)) > 0)


class TestObjective:
    def test_gradient_matches_central_differences(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            n, d = int(rng.integers(5, 40)), int(rng.integers(1, 6))
            features = rng.normal(size=(n, d))
            labels = rng.integers(0, 2, n).astype(np.float64)
            sample_w = rng.uniform(0.2, 5.0, n)
            w = rng.normal(size=d)
            b = float(rng.normal())
            lam = float(rng.uniform(0, 3))
            _, grad_w, grad_b = objective_and_gradient(features, labels, sample_w, w, b, lam)

            eps = 1e-6
            for j in range(d):
                w_hi, w_lo = w.copy(), w.copy()
                w_hi[j] += eps
                w_lo[j] -= eps
                up = objective_and_gradient(features, labels, sample_w, w_hi, b, lam)[0]
                down = objective_and_gradient(features, labels, sample_w, w_lo, b, lam)[0]
                assert grad_w[j] == pytest.approx((up - down) / (2 * eps), abs=1e-6)
            up = objective_and_gradient(features, labels, sample_w, w, b + eps, lam)[0]
            down = objective_and_gradient(features, labels, sample_w, w, b - eps, lam)[0]
            assert grad_b == pytest.approx((up - down) / (2 * eps), abs=1e-6)

    def test_bias_not_regularized(self):
        features = np.zeros((4, 2))
        labels = np.array([0.0, 1.0, 0.0, 1.0])
        sample_w = np.ones(4)
        j_small = objective_and_gradient(features, labels, sample_w, np.zeros(2), 5.0, 100.0)[0]
        j_large = objective_and_gradient(features, labels, sample_w, np.zeros(2), 5.0, 0.0)[0]
        assert j_small == pytest.approx(j_large)  # lambda only touches weights

    def test_saturated_margins_stay_finite(self):
        features = np.array([[1000.0], [-1000.0]])
        labels = np.array([0.0, 1.0])  # maximally wrong
        value, grad_w, grad_b = objective_and_gradient(
            features, labels, np.ones(2), np.ones(1), 0.0, 0.0
        )
        assert np.isfinite(value)
        assert np.isfinite(grad_w).all() and np.isfinite(grad_b)


class TestTraining:
    def test_objective_never_increases(self):
        ds = _dataset(seed=1)
        weights = class_weights(ds.labels)
        sample_w = weights.weight_vector(ds.labels)
        labels = ds.labels.astype(np.float64)

        trace = []
        config = LogRegConfig(max_iterations=300)
        # Re-run the descent manually to capture the trace.
        w = np.zeros(ds.n_features)
        b = 0.0
        lr = config.learning_rate
        value, grad_w, grad_b = objective_and_gradient(
            ds.features, labels, sample_w, w, b, config.l2_strength)
        trace.append(value)
        for _ in range(150):
            while True:
                w2, b2 = w - lr * grad_w, b - lr * grad_b
                cand = objective_and_gradient(ds.features, labels, sample_w, w2, b2,
                                              config.l2_strength)
                if np.isfinite(cand[0]) and cand[0] <= value:
                    break
                lr /= 2
            w, b = w2, b2
            value, grad_w, grad_b = cand
            trace.append(value)
        assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))

        model, iterations, final = train_logreg(ds, config)
        assert final <= trace[0]
        assert 1 <= iterations <= 300

    def test_converges_on_separable_data(self):
        rng = np.random.default_rng(2)
        features = rng.normal(size=(100, 2))
        labels = (features[:, 0] > 0).astype(np.int64)
        ds = Dataset(features=features, labels=labels, columns=("a", "b"),
                     provenance=Provenance(source="memory", split="train"))
        model, _, _ = train_logreg(ds, LogRegConfig(l2_strength=1.0, max_iterations=5000))
        preds = (predict_proba(model, features) >= 0.5).astype(int)
        assert (preds == labels).mean() > 0.95

    def test_deterministic(self):
        ds = _dataset(seed=4)
        a = train_logreg(ds, LogRegConfig(max_iterations=200))
        b = train_logreg(ds, LogRegConfig(max_iterations=200))
        np.testing.assert_array_equal(a[0].weights, b[0].weights)
        assert a[0].bias == b[0].bias
        assert a[1] == b[1] and a[2] == b[2]

    def test_gradient_tolerance_stops_early(self):
        ds = _dataset(seed=5)
        model, iterations, _ = train_logreg(
            ds, LogRegConfig(gradient_tolerance=1e-2, max_iterations=10000))
        labels = ds.labels.astype(np.float64)
        weights = class_weights(ds.labels)
        _, grad_w, grad_b = objective_and_gradient(
            ds.features, labels, weights.weight_vector(ds.labels),
            model.weights, model.bias, 1.0)
        assert max(np.max(np.abs(grad_w)), abs(grad_b)) < 1e-2
        assert iterations < 10000

    def test_single_class_rejected(self):
        ds = Dataset(
            features=np.random.default_rng(0).normal(size=(10, 2)),
            labels=np.zeros(10, dtype=np.int64),
            columns=("a", "b"),
            provenance=Provenance(source="memory", split="train"),
        )
        with pytest.raises(DataError):
            train_logreg(ds)

    def test_class_weights_shift_the_boundary(self):
        # Upweighting positives must not lower recall.
        ds = _dataset(n=400, seed=6, separation=1.0)
        balanced, _, _ = train_logreg(ds, LogRegConfig(
            class_weights=class_weights(ds.labels), max_iterations=2000))
        unweighted, _, _ = train_logreg(ds, LogRegConfig(
            class_weights=ClassWeights(1.0, 1.0), max_iterations=2000))
        positives = ds.labels == 1
        recall_balanced = (predict_proba(balanced, ds.features)[positives] >= 0.5).mean()
        recall_plain = (predict_proba(unweighted, ds.features)[positives] >= 0.5).mean()
        assert recall_balanced >= recall_plain

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            LogRegConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            LogRegConfig(l2_strength=-1.0)
        with pytest.raises(ValueError):
            LogRegConfig(max_iterations=0)


class TestPredictClassify:
    def test_bias_only_probability(self):
        model = LogisticModel(weights=np.zeros(3), bias=20.0)
        assert predict_proba(model, np.zeros(3)) > 0.999999

    def test_batch_matches_single(self):
        rng = np.random.default_rng(9)
        model = LogisticModel(weights=rng.normal(size=4), bias=0.3)
        batch = rng.normal(size=(8, 4))
        batch_probs = predict_proba(model, batch)
        for i in range(8):
            assert batch_probs[i] == pytest.approx(predict_proba(model, batch[i]))

    def test_feature_width_checked(self):
        model = LogisticModel(weights=np.zeros(3), bias=0.0)
        with pytest.raises(ValueError):
            predict_proba(model, np.zeros(4))

    def test_classify_tie_positive(self):
        assert classify(0.5, 0.5) == 1
        assert classify(0.2, 0.2) == 1
        assert classify(0.19, 0.2) == 0

    def test_classify_validates_range(self):
        with pytest.raises(ValueError):
            classify(1.5, 0.5)
        with pytest.raises(ValueError):
            classify(0.5, -0.1)


class TestImportance:
    def test_ranked_by_magnitude_with_stable_ties(self):
        model = LogisticModel(
            weights=np.array([0.5, -2.0, 0.5, 1.0]),
            bias=0.0,
            columns=("a", "b", "c", "d"),
        )
        ranking = feature_importance(model)
        assert [name for name, _ in ranking] == ["b", "d", "a", "c"]
        assert ranking[0][1] == pytest.approx(2.0)

    def test_name_count_checked(self):
        model = LogisticModel(weights=np.zeros(3), bias=0.0)
        with pytest.raises(ValueError):
            feature_importance(model, names=("a", "b"))


class TestSerialization:
    def test_round_trip(self, tmp_path):
        ds = _dataset(seed=12)
        model, iterations, objective = train_logreg(ds, LogRegConfig(max_iterations=50))
        model.threshold = 0.4
        path = tmp_path / "model.json"
        model.save(path)
        loaded = LogisticModel.load(path)
        np.testing.assert_array_equal(loaded.weights, model.weights)
        assert loaded.bias == model.bias
        assert loaded.threshold == 0.4
        assert loaded.iterations == iterations
        assert loaded.final_objective == objective
        assert loaded.columns == model.columns
        probs_a = predict_proba(model, ds.features)
        probs_b = predict_proba(loaded, ds.features)
        np.testing.assert_array_equal(probs_a, probs_b)

    def test_wrong_kind_rejected(self, tmp_path):
        path = tmp_path / "bogus.json"
        path.write_text('{"kind": "mystery"}')
        with pytest.raises(DataError):
            LogisticModel.load(path)
