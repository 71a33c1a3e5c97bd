"""
ctxrep Learning Tests
Heads, gradients, metrics, splits and training
"""

import math

import numpy as np
import orjson
import pytest

from ctxrep.engines.learning import (
    DatasetSplit,
    LinearHead,
    binary_metrics,
    evaluate,
    f1_score,
    forward,
    init_head,
    loss_and_grad,
    multiclass_metrics,
    pct_improvement,
    predict,
    softmax,
    split_dataset,
    split_pairs_by_method,
    train,
)
from ctxrep.errors import DegenerateLabels, DimensionMismatch, TooFewExamples
from ctxrep.models import EvalReport, HeadKind, TrainConfig


def sigmoid_head(weights, bias=0.0) -> LinearHead:
    return LinearHead(np.array([weights], dtype=np.float64), np.array([bias]), HeadKind.SIGMOID)


class TestForward:
    """Tests for forward, softmax and predict"""

    def test_sigmoid_values(self):
        """Should give 0.5 at zero, 1/11 at -ln 10 and 0.75 at ln 3"""
        head = sigmoid_head([1.0])
        assert forward(head, np.array([0.0])) == pytest.approx(0.5)
        assert forward(head, np.array([-math.log(10)])) == pytest.approx(1 / 11)
        assert forward(head, np.array([math.log(3)])) == pytest.approx(0.75)

    def test_batch_shape(self):
        """Should return one probability per row"""
        head = sigmoid_head([1.0, -1.0])
        assert forward(head, np.zeros((4, 2))).shape == (4,)

    def test_softmax_sums_to_one(self):
        """Should produce a distribution invariant to shifting logits"""
        z = np.array([[1.0, 2.0, 3.0], [-5.0, 0.0, 5.0]])
        assert softmax(z).sum(axis=1) == pytest.approx([1.0, 1.0])
        assert np.allclose(softmax(z), softmax(z + 100.0))

    def test_wrong_width(self):
        """Should raise DimensionMismatch for the wrong feature count"""
        with pytest.raises(DimensionMismatch):
            forward(sigmoid_head([1.0, 2.0]), np.zeros(3))

    def test_threshold(self):
        """Should split predictions at probability 0.5"""
        assert predict(sigmoid_head([1.0]), np.array([[0.01], [-0.01]])).tolist() == [1, 0]

    def test_softmax_ties_pick_lowest_index(self):
        """Should break argmax ties toward the lowest label"""
        head = LinearHead(np.zeros((3, 2)), np.zeros(3), HeadKind.SOFTMAX)
        assert predict(head, np.ones((2, 2))).tolist() == [0, 0]

    def test_sigmoid_head_has_one_output(self):
        """Should refuse a multi-output sigmoid head"""
        with pytest.raises(DimensionMismatch):
            init_head(4, 2, HeadKind.SIGMOID, 0)


class TestLoss:
    """Tests for loss_and_grad"""

    def test_zero_head_loss_is_ln2(self):
        """Should give ln 2 for an all-zero sigmoid head"""
        loss, _ = loss_and_grad(sigmoid_head([0.0, 0.0]), np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1, 0]))
        assert loss == pytest.approx(math.log(2))

    def test_confident_correct_prediction(self):
        """Should approach zero loss for confident correct predictions"""
        loss, _ = loss_and_grad(sigmoid_head([50.0]), np.array([[1.0], [-1.0]]), np.array([1, 0]))
        assert loss < 1e-6

    @pytest.mark.parametrize("kind,n_out", [(HeadKind.SIGMOID, 1), (HeadKind.SOFTMAX, 3)])
    def test_gradients_match_finite_differences(self, kind, n_out):
        """Should agree with central differences on random instances"""
        rng = np.random.default_rng(42)
        eps = 1e-5
        for instance in range(100):
            head = init_head(4, n_out, kind, instance)
            head.bias = rng.standard_normal(n_out)
            x = rng.standard_normal((5, 4))
            y = rng.integers(0, 2 if kind == HeadKind.SIGMOID else n_out, size=5)
            _, grads = loss_and_grad(head, x, y)

            numeric = np.zeros_like(head.weights)
            for index in np.ndindex(head.weights.shape):
                up, down = head.copy(), head.copy()
                up.weights[index] += eps
                down.weights[index] -= eps
                numeric[index] = (loss_and_grad(up, x, y)[0] - loss_and_grad(down, x, y)[0]) / (2 * eps)
            numeric_bias = np.zeros(n_out)
            for j in range(n_out):
                up, down = head.copy(), head.copy()
                up.bias[j] += eps
                down.bias[j] -= eps
                numeric_bias[j] = (loss_and_grad(up, x, y)[0] - loss_and_grad(down, x, y)[0]) / (2 * eps)

            assert np.allclose(grads.weights, numeric, rtol=1e-5, atol=1e-8)
            assert np.allclose(grads.bias, numeric_bias, rtol=1e-5, atol=1e-8)


def brute_binary(y_true, y_pred):
    tp = sum(1 for t, p in zip(y_true, y_pred) if t == 1 and p == 1)
    fp = sum(1 for t, p in zip(y_true, y_pred) if t == 0 and p == 1)
    fn = sum(1 for t, p in zip(y_true, y_pred) if t == 1 and p == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    accuracy = sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)
    return precision, recall, accuracy


def brute_multiclass(y_true, y_pred):
    labels = sorted(set(y_true) | set(y_pred))
    precisions, recalls = [], []
    for label in labels:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == label and p == label)
        predicted = sum(1 for p in y_pred if p == label)
        actual = sum(1 for t in y_true if t == label)
        precisions.append(tp / predicted if predicted else 0.0)
        recalls.append(tp / actual if actual else 0.0)
    accuracy = sum(1 for t, p in zip(y_true, y_pred) if t == p) / len(y_true)
    return sum(precisions) / len(labels), sum(recalls) / len(labels), accuracy


class TestMetrics:
    """Tests for metric computation and improvement percentages"""

    def test_f1_from_precision_and_recall(self):
        """Should give 0.824 for precision 0.913 and recall 0.750"""
        assert round(f1_score(0.913, 0.750), 3) == 0.824

    def test_f1_zero_when_both_zero(self):
        """Should return 0 instead of dividing by zero"""
        assert f1_score(0.0, 0.0) == 0.0

    def test_binary_against_brute_force(self):
        """Should match direct counting on random label vectors"""
        rng = np.random.default_rng(1)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            y_true = rng.integers(0, 2, size=n)
            y_pred = rng.integers(0, 2, size=n)
            precision, recall, f1, accuracy = binary_metrics(y_true, y_pred)
            expected_p, expected_r, expected_acc = brute_binary(y_true.tolist(), y_pred.tolist())
            assert precision == expected_p
            assert recall == expected_r
            assert accuracy == expected_acc
            assert f1 == f1_score(expected_p, expected_r)

    def test_multiclass_against_brute_force(self):
        """Should match macro averages over labels present in either vector"""
        rng = np.random.default_rng(2)
        for _ in range(300):
            n = int(rng.integers(1, 40))
            y_true = rng.integers(0, 5, size=n)
            y_pred = rng.integers(0, 5, size=n)
            precision, recall, f1, accuracy = multiclass_metrics(y_true, y_pred)
            expected_p, expected_r, expected_acc = brute_multiclass(y_true.tolist(), y_pred.tolist())
            assert precision == pytest.approx(expected_p)
            assert recall == pytest.approx(expected_r)
            assert accuracy == pytest.approx(expected_acc)
            assert f1 == pytest.approx(f1_score(expected_p, expected_r))

    def test_all_negative_predictions(self):
        """Should report zero precision and recall without failing"""
        assert binary_metrics(np.array([1, 1, 0]), np.array([0, 0, 0]))[:3] == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize(
        "metric,baseline,expected",
        [
            (0.856, 0.800, 7),
            (0.920, 0.800, 15),
            (0.769, 0.824, -7),
            (0.500, 0.500, 0),
            (0.9, 0.0, None),
        ],
    )
    def test_pct_improvement(self, metric, baseline, expected):
        """Should round the relative change to a whole percent"""
        assert pct_improvement(metric, baseline) == expected

    def test_evaluate_sets_improvement(self):
        """Should attach the improvement over the baseline F1"""
        head = sigmoid_head([1.0])
        x = np.array([[1.0], [2.0], [-1.0], [-2.0]])
        baseline = EvalReport(precision=0.5, recall=0.5, f1=0.5, accuracy=0.5)
        report = evaluate(head, x, np.array([1, 1, 0, 0]), baseline)
        assert report.f1 == 1.0
        assert report.pct_improvement == 100
        assert report.support == 4

    def test_evaluate_empty(self):
        """Should report zeros for an empty test set"""
        report = evaluate(sigmoid_head([1.0]), np.zeros((0, 1)), np.array([], dtype=np.int64))
        assert (report.f1, report.support) == (0.0, 0)


class TestSplits:
    """Tests for split_dataset and split_pairs_by_method"""

    @pytest.mark.parametrize("n,sizes", [(10, (8, 1, 1)), (100, (80, 10, 10)), (1679, (1343, 167, 169))])
    def test_split_sizes(self, n, sizes):
        """Should split floor(0.8n), floor(0.1n) and the remainder"""
        split = split_dataset(n, 7)
        assert split.sizes() == sizes
        combined = np.concatenate([split.train, split.validation, split.test])
        assert sorted(combined.tolist()) == list(range(n))

    def test_too_few(self):
        """Should refuse fewer than 10 examples"""
        with pytest.raises(TooFewExamples):
            split_dataset(9, 7)

    def test_seeded(self):
        """Should reproduce the same partition for the same seed"""
        assert split_dataset(50, 3).fingerprint() == split_dataset(50, 3).fingerprint()
        assert split_dataset(50, 3).fingerprint() != split_dataset(50, 4).fingerprint()

    def test_split_by_method(self):
        """Should keep only pairs whose methods share a partition"""
        methods = [f"m{i}" for i in range(30)]
        pairs = [(methods[i], methods[j]) for i in range(30) for j in range(i + 1, 30) if (i + j) % 3 == 0]
        split, dropped = split_pairs_by_method(pairs, 5)
        kept = np.concatenate([split.train, split.validation, split.test])
        assert len(kept) + dropped == len(pairs)
        assert len(set(kept.tolist())) == len(kept)

        method_part = {}
        for part, indices in enumerate((split.train, split.validation, split.test)):
            for index in indices:
                a, b = pairs[index]
                for m in (a, b):
                    assert method_part.setdefault(m, part) == part


class TestTraining:
    """Tests for train"""

    @pytest.fixture
    def separable(self):
        positives = [[k, k] for k in range(1, 11)]
        negatives = [[-k, -k] for k in range(1, 11)]
        features = np.array(positives + negatives, dtype=np.float64)
        labels = np.array([1] * 10 + [0] * 10)
        # k = 1 validates, k = 2 tests, the rest trains
        split = DatasetSplit(
            train=np.array([i for i in range(20) if i % 10 >= 2]),
            validation=np.array([0, 10]),
            test=np.array([1, 11]),
            seed=0,
        )
        return features, labels, split

    def test_learns_separable_data(self, separable):
        """Should reach test F1 1.0 on a linearly separable set"""
        features, labels, split = separable
        head = train(features, labels, split, TrainConfig(learning_rate=0.1, epochs=50, batch_size=32, seed=1))
        report = evaluate(head, features[split.test], labels[split.test])
        assert report.f1 == 1.0
        assert head.metadata["validation_scores"][head.metadata["best_epoch"]] == 1.0

    def test_zero_epochs_returns_initial_head(self, separable):
        """Should return the initialized head when no epoch runs"""
        features, labels, split = separable
        head = train(features, labels, split, TrainConfig(epochs=0, seed=4))
        assert np.array_equal(head.weights, init_head(2, 1, HeadKind.SIGMOID, 4).weights)
        assert head.metadata["best_epoch"] == 0
        assert head.metadata["steps"] == 0

    def test_deterministic(self, separable):
        """Should produce identical weights for identical inputs"""
        features, labels, split = separable
        cfg = TrainConfig(learning_rate=0.05, epochs=5, batch_size=4, seed=9)
        first = train(features, labels, split, cfg)
        second = train(features, labels, split, cfg)
        assert np.array_equal(first.weights, second.weights)
        assert np.array_equal(first.bias, second.bias)

    def test_single_class(self, separable):
        """Should raise DegenerateLabels when training holds one class"""
        features, _, split = separable
        with pytest.raises(DegenerateLabels):
            train(features, np.ones(20, dtype=np.int64), split, TrainConfig(epochs=1))

    def test_softmax_head(self):
        """Should fit a three-class problem with a softmax head"""
        rng = np.random.default_rng(0)
        centers = np.array([[5.0, 0.0], [0.0, 5.0], [-5.0, -5.0]])
        labels = np.repeat(np.arange(3), 20)
        features = centers[labels] + rng.standard_normal((60, 2)) * 0.3
        split = split_dataset(60, 2)
        head = train(features, labels, split, TrainConfig(learning_rate=0.5, epochs=30), kind=HeadKind.SOFTMAX)
        assert head.n_out == 3
        assert evaluate(head, features[split.test], labels[split.test]).accuracy == 1.0

    def test_augmented_rows_count(self, separable):
        """Should train on the swapped rows as well"""
        features, labels, split = separable
        head = train(features, labels, split, TrainConfig(epochs=1), augment=features[split.train])
        assert head.metadata["train_size"] == 2 * len(split.train)

    def test_head_serialization(self, separable):
        """Should restore a head from its JSON form"""
        features, labels, split = separable
        head = train(features, labels, split, TrainConfig(epochs=2))
        restored = LinearHead.from_dict(orjson.loads(orjson.dumps(head.to_dict(), option=orjson.OPT_SERIALIZE_NUMPY)))
        assert np.array_equal(restored.weights, head.weights)
        assert restored.kind == HeadKind.SIGMOID
        assert restored.metadata["best_epoch"] == head.metadata["best_epoch"]
