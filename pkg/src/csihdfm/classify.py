"""Classifiers, metrics and the stratified split used to compare feature extractors."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class FeatureSet:
    features: np.ndarray  # (n_samples, D)
    labels: list[str]
    label_set: list[str] = field(default_factory=list)
    sample_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=np.float64))
        if len(self.labels) != len(self.features):
            raise ValueError(f"{len(self.labels)} labels for {len(self.features)} feature rows")
        if not self.label_set:
            self.label_set = sorted(set(self.labels))
        unknown = set(self.labels) - set(self.label_set)
        if unknown:
            raise ValueError(f"labels {sorted(unknown)} missing from label_set")
        if not self.sample_ids:
            self.sample_ids = [str(i) for i in range(len(self.labels))]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def label_indices(self) -> np.ndarray:
        pos = {l: i for i, l in enumerate(self.label_set)}
        return np.array([pos[l] for l in self.labels], dtype=int)

    def subset(self, idx) -> FeatureSet:
        idx = list(idx)
        return FeatureSet(
            self.features[idx],
            [self.labels[i] for i in idx],
            list(self.label_set),
            [self.sample_ids[i] for i in idx],
        )


def split_indices(
    labels: Sequence[str], label_set: Sequence[str], test_fraction: float = 0.25, seed: int = 0
) -> tuple[list[int], list[int]]:
    """Stratified (train, test) index lists; each class gives round(fraction * size) to test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    y = np.array(labels)
    train, test = [], []
    for label in label_set:
        members = np.flatnonzero(y == label)
        if len(members) == 0:
            continue
        if len(members) < 2:
            raise ValueError(f"class {label!r} has fewer than 2 samples")
        members = rng.permutation(members)
        n_test = min(max(int(math.floor(test_fraction * len(members) + 0.5)), 1), len(members) - 1)
        test.extend(int(i) for i in members[:n_test])
        train.extend(int(i) for i in members[n_test:])
    return sorted(train), sorted(test)


def split(features: FeatureSet, test_fraction: float = 0.25, seed: int = 0) -> tuple[FeatureSet, FeatureSet]:
    """Stratified, seeded train/test split of a feature set."""
    train, test = split_indices(features.labels, features.label_set, test_fraction, seed)
    return features.subset(train), features.subset(test)


def _vote(neighbour_labels: np.ndarray, n_labels: int) -> int:
    # argmax returns the first maximum, i.e. the label earliest in label_set
    return int(np.argmax(np.bincount(neighbour_labels, minlength=n_labels)))


def knn_predict(train: FeatureSet, query, k: int = 5) -> str:
    """Majority label among the k nearest training samples (Euclidean)."""
    return knn_predict_many(train, np.atleast_2d(query), k)[0]


def knn_predict_many(train: FeatureSet, queries, k: int = 5) -> list[str]:
    if len(train) == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= len(train):
        raise ValueError(f"k={k} must lie in 1..{len(train)}")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    x = train.features
    y = train.label_indices()
    out = []
    for q in queries:
        row = np.sum((x - q) ** 2, axis=1)
        # stable sort keeps the lower training index first among equal distances
        nearest = np.argsort(row, kind="stable")[:k]
        out.append(train.label_set[_vote(y[nearest], len(train.label_set))])
    return out


@dataclass
class LinearModel:
    weights: np.ndarray  # (K, D)
    bias: np.ndarray  # (K,)
    mean: np.ndarray
    scale: np.ndarray
    label_set: list[str]

    def scores(self, features) -> np.ndarray:
        z = (np.atleast_2d(features) - self.mean) / self.scale
        return z @ self.weights.T + self.bias

    def predict(self, features) -> list[str]:
        return [self.label_set[i] for i in np.argmax(self.scores(features), axis=1)]


def softmax_loss_and_grad(weights, bias, x, y, l2: float = 0.0):
    """Mean multinomial cross-entropy (plus ``l2/2 * |W|^2``) and its gradients."""
    logits = x @ weights.T + bias
    logits = logits - logits.max(axis=1, keepdims=True)
    logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
    n = len(y)
    loss = -logp[np.arange(n), y].mean() + 0.5 * l2 * np.sum(weights**2)
    g = np.exp(logp)
    g[np.arange(n), y] -= 1.0
    g /= n
    return loss, g.T @ x + l2 * weights, g.sum(axis=0)


def linear_train(
    train: FeatureSet,
    epochs: int = 200,
    learning_rate: float = 0.1,
    seed: int = 0,
    batch_size: int = 16,
    l2: float = 1e-4,
) -> LinearModel:
    """Softmax regression on standardised features by seeded minibatch SGD."""
    y = train.label_indices()
    if len(train) == 0:
        raise ValueError("empty training set")
    if len(np.unique(y)) < 2:
        raise ValueError("training set holds a single class")
    x = train.features
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    z = (x - mean) / scale
    k, d = len(train.label_set), x.shape[1]
    rng = np.random.default_rng(seed)
    w = np.zeros((k, d))
    b = np.zeros(k)
    for _ in range(epochs):
        order = rng.permutation(len(y))
        for start in range(0, len(y), batch_size):
            idx = order[start : start + batch_size]
            _, gw, gb = softmax_loss_and_grad(w, b, z[idx], y[idx], l2)
            w -= learning_rate * gw
            b -= learning_rate * gb
    return LinearModel(w, b, mean, scale, list(train.label_set))


@dataclass
class EvalReport:
    confusion: np.ndarray
    label_set: list[str]
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray

    def to_text(self) -> str:
        width = max(6, *(len(l) for l in self.label_set))
        lines = ["confusion (rows = true, columns = predicted)"]
        lines.append(" " * width + " " + " ".join(f"{l:>{width}}" for l in self.label_set))
        for label, row in zip(self.label_set, self.confusion):
            lines.append(f"{label:>{width}} " + " ".join(f"{v:>{width}d}" for v in row))
        lines.append("")
        for name in ("accuracy", "macro_precision", "macro_recall", "macro_f1"):
            lines.append(f"{name} = {getattr(self, name):.6f}")
        return "\n".join(lines) + "\n"

    def metric_rows(self) -> list[tuple[str, str, float]]:
        rows = [("overall", m, getattr(self, m)) for m in ("accuracy", "macro_precision", "macro_recall", "macro_f1")]
        for i, l in enumerate(self.label_set):
            rows += [(l, "precision", self.precision[i]), (l, "recall", self.recall[i]), (l, "f1", self.f1[i])]
        return rows

    def write_csv(self, path: str | os.PathLike) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scope", "metric", "value"])
            for scope, metric, value in self.metric_rows():
                w.writerow([scope, metric, repr(float(value))])


def evaluate(predictions: Sequence[tuple[str, str]], label_set: Sequence[str]) -> EvalReport:
    """Confusion matrix and macro-averaged metrics from (true, predicted) pairs."""
    if len(predictions) == 0:
        raise ValueError("no predictions to evaluate")
    pos = {l: i for i, l in enumerate(label_set)}
    k = len(label_set)
    confusion = np.zeros((k, k), dtype=np.int64)
    for true, pred in predictions:
        if true not in pos or pred not in pos:
            raise ValueError(f"label pair {(true, pred)} outside label_set")
        confusion[pos[true], pos[pred]] += 1
    diag = np.diag(confusion).astype(np.float64)
    col = confusion.sum(axis=0)
    row = confusion.sum(axis=1)
    precision = np.divide(diag, col, out=np.zeros(k), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros(k), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(k), where=denom > 0)
    return EvalReport(
        confusion,
        list(label_set),
        float(diag.sum() / confusion.sum()),
        float(precision.mean()),
        float(recall.mean()),
        float(f1.mean()),
        precision,
        recall,
        f1,
    )


@dataclass(frozen=True)
class ClassifierSpec:
    kind: str = "knn"
    k: int = 5
    epochs: int = 200
    learning_rate: float = 0.1

    def __post_init__(self):
        if self.kind not in ("knn", "linear"):
            raise ValueError(f"unknown classifier {self.kind!r}")


def train_and_predict(train: FeatureSet, test: FeatureSet, spec: ClassifierSpec, seed: int = 0) -> list[str]:
    if spec.kind == "knn":
        return knn_predict_many(train, test.features, spec.k)
    model = linear_train(train, spec.epochs, spec.learning_rate, seed)
    return model.predict(test.features)


def classify(
    features: FeatureSet, spec: ClassifierSpec = ClassifierSpec(), test_fraction: float = 0.25, seed: int = 0
) -> tuple[EvalReport, list[tuple[str, str, str]]]:
    """Split, train, predict and score; also returns (sample_id, true, predicted) rows."""
    train, test = split(features, test_fraction, seed)
    pred = train_and_predict(train, test, spec, seed)
    rows = list(zip(test.sample_ids, test.labels, pred))
    return evaluate([(t, p) for _, t, p in rows], features.label_set), rows


def write_predictions(rows, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "true", "predicted"])
        w.writerows(rows)


def write_features(features: FeatureSet, path: str | os.PathLike) -> None:
    """One row per sample: id, feature columns, label last."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id"] + [f"f{i}" for i in range(features.dim)] + ["label"])
        for sid, vec, label in zip(features.sample_ids, features.features, features.labels):
            w.writerow([sid] + [repr(float(v)) for v in vec] + [label])


def read_features(path: str | os.PathLike) -> FeatureSet:
    ids, rows, labels = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(v) for v in rec[1:-1]])
            labels.append(rec[-1])
    return FeatureSet(np.array(rows), labels, sample_ids=ids)
