"""
ctxrep Learning
Linear heads over aggregated features: sigmoid for clone detection, softmax
for project classification. Mini-batch gradient descent, 80:10:10 splits,
validation-based epoch selection.
"""

import hashlib
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from typing import Any, Dict, Hashable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from sklearn.metrics import confusion_matrix

from ctxrep.errors import DegenerateLabels, DimensionMismatch, TooFewExamples
from ctxrep.models import EvalReport, HeadKind, TrainConfig


# ==========================================
# HEAD
# ==========================================

@dataclass
class LinearHead:
    weights: np.ndarray  # (n_out, n_in)
    bias: np.ndarray  # (n_out,)
    kind: HeadKind
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def n_in(self) -> int:
        return int(self.weights.shape[1])

    @property
    def n_out(self) -> int:
        return int(self.weights.shape[0])

    def copy(self) -> "LinearHead":
        return LinearHead(self.weights.copy(), self.bias.copy(), self.kind, dict(self.metadata))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "n_in": self.n_in,
            "n_out": self.n_out,
            "weights": self.weights,
            "bias": self.bias,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LinearHead":
        weights = np.asarray(data["weights"], dtype=np.float64).reshape(data["n_out"], data["n_in"])
        return cls(
            weights=weights,
            bias=np.asarray(data["bias"], dtype=np.float64),
            kind=HeadKind(data["kind"]),
            metadata=data.get("metadata", {}),
        )


class Gradients(NamedTuple):
    weights: np.ndarray
    bias: np.ndarray


def init_head(n_in: int, n_out: int, kind: HeadKind, seed: int) -> LinearHead:
    """Weights from uniform(-1/sqrt(n_in), 1/sqrt(n_in)), bias zero"""
    if kind == HeadKind.SIGMOID and n_out != 1:
        raise DimensionMismatch(f"a sigmoid head has one output, got {n_out}")
    bound = 1.0 / np.sqrt(n_in)
    rng = np.random.default_rng(seed)
    return LinearHead(
        weights=rng.uniform(-bound, bound, size=(n_out, n_in)),
        bias=np.zeros(n_out),
        kind=kind,
    )


def _logits(head: LinearHead, x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    if x.shape[1] != head.n_in:
        raise DimensionMismatch(f"head expects {head.n_in} features, got {x.shape[1]}")
    return x @ head.weights.T + head.bias


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -z))


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def forward(head: LinearHead, x: np.ndarray) -> np.ndarray:
    """
    Probabilities for one example (1-d x) or a batch (2-d x).
    Sigmoid heads give P(label=1); softmax heads give one row per example.
    """
    logits = _logits(head, x)
    if head.kind == HeadKind.SIGMOID:
        probabilities = sigmoid(logits[:, 0])
    else:
        probabilities = softmax(logits)
    return probabilities[0] if np.ndim(x) == 1 else probabilities


def loss_and_grad(head: LinearHead, x: np.ndarray, y: np.ndarray) -> Tuple[float, Gradients]:
    """Mean cross-entropy over the batch and its analytic gradients"""
    x = np.atleast_2d(x)
    y = np.asarray(y)
    logits = _logits(head, x)
    n = x.shape[0]

    if head.kind == HeadKind.SIGMOID:
        z = logits[:, 0]
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
        dz = (sigmoid(z) - y)[:, None] / n
    else:
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        log_probs = shifted - log_norm
        loss = float(-np.mean(log_probs[np.arange(n), y]))
        dz = np.exp(log_probs)
        dz[np.arange(n), y] -= 1.0
        dz /= n

    return loss, Gradients(weights=dz.T @ x, bias=dz.sum(axis=0))


def predict(head: LinearHead, x: np.ndarray) -> np.ndarray:
    """Threshold 0.5 for sigmoid; argmax (lowest index on ties) for softmax"""
    probabilities = forward(head, np.atleast_2d(x))
    if head.kind == HeadKind.SIGMOID:
        return (probabilities >= 0.5).astype(np.int64)
    return np.argmax(probabilities, axis=1)


# ==========================================
# SPLITS
# ==========================================

@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray
    seed: int

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        for part in (self.train, self.validation, self.test):
            digest.update(np.asarray(part, dtype=np.int64).tobytes())
            digest.update(b"|")
        return digest.hexdigest()[:16]

    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def split_dataset(n: int, seed: int) -> DatasetSplit:
    """
    80:10:10 by seeded permutation: train = floor(0.8n), validation = floor(0.1n),
    test = remainder.
    """
    if n < 10:
        raise TooFewExamples(f"an 80:10:10 split needs at least 10 examples, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_train = n * 8 // 10
    n_validation = n // 10
    return DatasetSplit(
        train=order[:n_train],
        validation=order[n_train:n_train + n_validation],
        test=order[n_train + n_validation:],
        seed=seed,
    )


def split_pairs_by_method(pairs: Sequence[Tuple[Hashable, Hashable]], seed: int) -> Tuple[DatasetSplit, int]:
    """
    Split the distinct methods 80:10:10 and keep a pair only when both of
    its methods fall in the same partition.

    Returns:
        (split over pair indices, number of dropped cross-partition pairs)
    """
    methods = sorted({m for pair in pairs for m in pair}, key=str)
    method_split = split_dataset(len(methods), seed)
    partition: Dict[Hashable, int] = {}
    for part, indices in enumerate((method_split.train, method_split.validation, method_split.test)):
        for i in indices:
            partition[methods[i]] = part

    buckets: List[List[int]] = [[], [], []]
    dropped = 0
    for index, (a, b) in enumerate(pairs):
        if partition[a] == partition[b]:
            buckets[partition[a]].append(index)
        else:
            dropped += 1
    split = DatasetSplit(
        train=np.array(buckets[0], dtype=np.int64),
        validation=np.array(buckets[1], dtype=np.int64),
        test=np.array(buckets[2], dtype=np.int64),
        seed=seed,
    )
    return split, dropped


# ==========================================
# METRICS
# ==========================================

def _ratio(numerator: float, denominator: float) -> float:
    return float(numerator / denominator) if denominator > 0 else 0.0


def f1_score(precision: float, recall: float) -> float:
    return 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0


def binary_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> Tuple[float, float, float, float]:
    """(precision, recall, f1, accuracy) on the positive class"""
    tn, fp, fn, tp = confusion_matrix(y_true, y_pred, labels=[0, 1]).ravel()
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    accuracy = _ratio(tp + tn, tp + tn + fp + fn)
    return precision, recall, f1_score(precision, recall), accuracy


def multiclass_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> Tuple[float, float, float, float]:
    """(macro precision, macro recall, f1 of the two, accuracy) over labels seen in either array"""
    labels = np.union1d(y_true, y_pred)
    matrix = confusion_matrix(y_true, y_pred, labels=labels)
    hits = np.diag(matrix)
    precision = float(np.mean([_ratio(h, c) for h, c in zip(hits, matrix.sum(axis=0))]))
    recall = float(np.mean([_ratio(h, r) for h, r in zip(hits, matrix.sum(axis=1))]))
    accuracy = _ratio(hits.sum(), matrix.sum())
    return precision, recall, f1_score(precision, recall), accuracy


def pct_improvement(metric: float, baseline: float) -> Optional[int]:
    """round((metric / baseline - 1) * 100), half away from zero, on 3-decimal values"""
    metric_d = Decimal(f"{metric:.3f}")
    baseline_d = Decimal(f"{baseline:.3f}")
    if baseline_d == 0:
        return None
    change = (metric_d / baseline_d - 1) * 100
    return int(change.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def headline_metric(report: EvalReport, kind: HeadKind) -> float:
    """F1 for clone detection, accuracy for classification"""
    return report.f1 if kind == HeadKind.SIGMOID else report.accuracy


def evaluate(
    head: LinearHead,
    x: np.ndarray,
    y: np.ndarray,
    baseline: Optional[EvalReport] = None,
) -> EvalReport:
    y = np.asarray(y, dtype=np.int64)
    if len(y) == 0:
        return EvalReport(precision=0.0, recall=0.0, f1=0.0, accuracy=0.0, support=0)
    y_pred = predict(head, x)
    if head.kind == HeadKind.SIGMOID:
        precision, recall, f1, accuracy = binary_metrics(y, y_pred)
    else:
        precision, recall, f1, accuracy = multiclass_metrics(y, y_pred)
    report = EvalReport(precision=precision, recall=recall, f1=f1, accuracy=accuracy, support=int(len(y)))
    if baseline is not None:
        report.pct_improvement = pct_improvement(headline_metric(report, head.kind), headline_metric(baseline, head.kind))
    return report


# ==========================================
# TRAINING
# ==========================================

def _validation_score(head: LinearHead, x: np.ndarray, y: np.ndarray) -> Optional[float]:
    if len(y) == 0:
        return None
    return headline_metric(evaluate(head, x, y), head.kind)


def train(
    features: np.ndarray,
    labels: np.ndarray,
    split: DatasetSplit,
    cfg: TrainConfig,
    kind: HeadKind = HeadKind.SIGMOID,
    n_labels: Optional[int] = None,
    augment: Optional[np.ndarray] = None,
) -> LinearHead:
    """
    Mini-batch gradient descent; the returned head is the snapshot with the
    best validation score (epoch 0 is the initialized head).

    Args:
        features: (n, n_in) feature matrix
        labels: (n,) integer labels
        split: indices into features
        cfg: learning rate, epochs, batch size, seed
        kind: sigmoid (clone) or softmax (classification)
        n_labels: softmax output count; max label + 1 when None
        augment: extra training rows aligned with split.train (swapped pairs)

    Returns:
        LinearHead with training metadata
    """
    labels = np.asarray(labels, dtype=np.int64)
    x_train, y_train = features[split.train], labels[split.train]
    if augment is not None:
        x_train = np.vstack([x_train, augment])
        y_train = np.concatenate([y_train, labels[split.train]])
    x_val, y_val = features[split.validation], labels[split.validation]

    if np.unique(y_train).size < 2:
        raise DegenerateLabels(f"training partition has a single class ({np.unique(y_train).tolist()})")

    n_out = 1 if kind == HeadKind.SIGMOID else (n_labels or int(labels.max()) + 1)
    head = init_head(features.shape[1], n_out, kind, cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    best = head.copy()
    best_score = _validation_score(head, x_val, y_val)
    best_epoch = 0
    scores = [best_score]
    steps = 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(y_train))
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            _, grads = loss_and_grad(head, x_train[batch], y_train[batch])
            head.weights -= cfg.learning_rate * grads.weights
            head.bias -= cfg.learning_rate * grads.bias
            steps += 1
        score = _validation_score(head, x_val, y_val)
        scores.append(score)
        if score is None or (best_score is not None and score > best_score):
            best, best_score, best_epoch = head.copy(), score, epoch

    if best_score is None and cfg.epochs:
        logger.warning("[TRAIN] Empty validation partition; keeping the last epoch")

    best.metadata = {
        "best_epoch": best_epoch,
        "validation_scores": scores,
        "steps": steps,
        "train_size": int(len(y_train)),
        "learning_rate": cfg.learning_rate,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "seed": cfg.seed,
    }
    logger.debug(f"[TRAIN] {kind.value} head: best epoch {best_epoch}/{cfg.epochs}, validation {best_score}, {steps} step(s)")
    return best
