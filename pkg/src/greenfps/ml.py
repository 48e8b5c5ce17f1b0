"""Frame-rate classification: chi-square feature ranking, bagged CART trees,
and the repeated random-split evaluation protocol.

Everything is implemented directly (no sklearn) so that tie-breaking toward
higher frame rates, per-tree RNG streams, and the JSON model format are exact
contracts rather than library defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "Dataset",
    "DecisionTree",
    "EnsembleModel",
    "EvalReport",
    "chi_square_scores",
    "select_top_k",
    "fit_tree",
    "fit_bagging",
    "evaluate",
]

CLASS_LADDER = (120.0, 60.0, 30.0, 24.0, 15.0)  # confusion-matrix row order
MODEL_FORMAT_VERSION = 1


@dataclass
class Dataset:
    """Feature matrix with frame-rate class labels."""

    features: np.ndarray  # (n, d) float
    labels: np.ndarray  # (n,) float frame rates
    feature_names: tuple[str, ...] = ()
    keys: list[tuple[str, int]] = field(default_factory=list)  # (sequence, crf)

    def __post_init__(self) -> None:
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (n, d) with one label per row")

    @property
    def classes(self) -> np.ndarray:
        """Distinct labels, highest frame rate first."""
        return np.sort(np.unique(self.labels))[::-1]


# --- feature ranking ---------------------------------------------------------


def _equal_frequency_bins(x: np.ndarray, n_bins: int) -> np.ndarray:
    """Bin ids from interior quantile edges; ranks only, so any strictly
    monotone rescaling of x yields the same binning."""
    edges = np.unique(np.quantile(x, np.linspace(0.0, 1.0, n_bins + 1)[1:-1]))
    return np.searchsorted(edges, x, side="right")


def chi_square_scores(X: np.ndarray, y: np.ndarray, n_bins: int = 10) -> np.ndarray:
    """Per-feature chi-square statistic of the bin-by-class contingency table."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    class_values, y_idx = np.unique(y, return_inverse=True)
    if len(class_values) < 2:
        raise ValueError("chi-square ranking needs at least 2 distinct labels")
    n, d = X.shape
    scores = np.zeros(d)
    for j in range(d):
        bins = _equal_frequency_bins(X[:, j], n_bins)
        n_rows = int(bins.max()) + 1
        observed = np.zeros((n_rows, len(class_values)))
        np.add.at(observed, (bins, y_idx), 1.0)
        expected = np.outer(observed.sum(axis=1), observed.sum(axis=0)) / n
        mask = expected > 0
        scores[j] = float(np.sum((observed[mask] - expected[mask]) ** 2 / expected[mask]))
    return scores


def select_top_k(scores: np.ndarray, k: int = 15) -> tuple[int, ...]:
    """Indices of the k largest scores, best first; ties by ascending index."""
    if k <= 0:
        raise ValueError("k must be positive")
    if k > len(scores):
        raise ValueError(f"k={k} exceeds feature count {len(scores)}")
    order = np.argsort(-np.asarray(scores), kind="stable")
    return tuple(int(i) for i in order[:k])


# --- decision tree -----------------------------------------------------------


def _gini(counts: np.ndarray) -> np.ndarray:
    total = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(total > 0, counts / total, 0.0)
    return 1.0 - np.sum(p * p, axis=-1)


@dataclass
class DecisionTree:
    """Flat-array CART tree; leaves keep class counts for vote aggregation.

    classes are ordered highest frame rate first, so the first argmax over
    leaf counts resolves prediction ties toward the higher rate.
    """

    classes: np.ndarray
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    counts: list[list[int] | None] = field(default_factory=list)

    def _add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(None)
        return len(self.feature) - 1

    def predict_one(self, x: np.ndarray) -> float:
        node = 0
        while self.counts[node] is None:
            node = self.left[node] if x[self.feature[node]] <= self.threshold[node] else self.right[node]
        return float(self.classes[int(np.argmax(self.counts[node]))])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict_one(row) for row in np.atleast_2d(X)])

    def to_dict(self) -> dict:
        return {
            "classes": [float(c) for c in self.classes],
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "counts": self.counts,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTree":
        return cls(
            classes=np.array(payload["classes"], dtype=np.float64),
            feature=list(payload["feature"]),
            threshold=[float(t) for t in payload["threshold"]],
            left=list(payload["left"]),
            right=list(payload["right"]),
            counts=[list(c) if c is not None else None for c in payload["counts"]],
        )


def _best_split(X: np.ndarray, y_idx: np.ndarray, n_classes: int, min_leaf: int):
    """(feature, threshold, impurity) of the best Gini split, or None."""
    n = len(y_idx)
    best = None
    for j in range(X.shape[1]):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        sorted_col = col[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), y_idx[order]] = 1.0
        prefix = np.cumsum(onehot, axis=0)  # prefix[i-1] = counts of first i rows
        positions = np.arange(min_leaf, n - min_leaf + 1)
        positions = positions[sorted_col[positions] > sorted_col[positions - 1]]
        if len(positions) == 0:
            continue
        left_counts = prefix[positions - 1]
        right_counts = prefix[-1] - left_counts
        sizes = positions.astype(np.float64)
        weighted = (sizes * _gini(left_counts) + (n - sizes) * _gini(right_counts)) / n
        i = int(np.argmin(weighted))
        if best is None or weighted[i] < best[2]:
            pos = int(positions[i])
            thr = 0.5 * (sorted_col[pos - 1] + sorted_col[pos])
            best = (j, float(thr), float(weighted[i]))
    return best


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    classes: np.ndarray,
    max_depth: int = 12,
    min_leaf: int = 1,
) -> DecisionTree:
    """Greedy CART with Gini impurity and midpoint thresholds."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty training set")
    class_pos = {float(c): i for i, c in enumerate(classes)}
    y_idx = np.array([class_pos[float(v)] for v in y], dtype=np.intp)
    tree = DecisionTree(classes=np.asarray(classes, dtype=np.float64))

    def grow(rows: np.ndarray, depth: int) -> int:
        node = tree._add_node()
        counts = np.bincount(y_idx[rows], minlength=len(classes))
        pure = int(np.count_nonzero(counts)) <= 1
        split = None
        if not pure and depth < max_depth and len(rows) >= 2 * min_leaf:
            split = _best_split(X[rows], y_idx[rows], len(classes), min_leaf)
        if split is None:
            tree.counts[node] = [int(c) for c in counts]
            return node
        j, thr, _ = split
        mask = X[rows, j] <= thr
        tree.feature[node] = j
        tree.threshold[node] = thr
        tree.left[node] = grow(rows[mask], depth + 1)
        tree.right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(len(X)), 0)
    return tree


# --- bagging ensemble ----------------------------------------------------------


@dataclass
class EnsembleModel:
    """Bagged trees with majority vote; ties resolve to the higher frame rate."""

    trees: list[DecisionTree]
    classes: np.ndarray  # descending frame rate
    n_estimators: int
    seed: int
    selected_features: tuple[int, ...]
    feature_names: tuple[str, ...] = ()
    n_features_full: int = 0

    def predict(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("predict takes a single feature vector")
        if self.n_features_full and len(x) == self.n_features_full:
            x = x[list(self.selected_features)]
        elif len(x) != len(self.selected_features):
            raise ValueError(
                f"expected {self.n_features_full} full or "
                f"{len(self.selected_features)} selected features, got {len(x)}"
            )
        votes = np.zeros(len(self.classes))
        lookup = {float(c): i for i, c in enumerate(self.classes)}
        for tree in self.trees:
            votes[lookup[tree.predict_one(x)]] += 1
        return float(self.classes[int(np.argmax(votes))])

    def predict_many(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.predict(row) for row in np.atleast_2d(X)])

    def to_json(self) -> str:
        payload = {
            "format_version": MODEL_FORMAT_VERSION,
            "classes": [float(c) for c in self.classes],
            "n_estimators": self.n_estimators,
            "seed": self.seed,
            "selected_features": list(self.selected_features),
            "feature_names": list(self.feature_names),
            "n_features_full": self.n_features_full,
            "trees": [t.to_dict() for t in self.trees],
        }
        return json.dumps(payload, sort_keys=True)

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_json(cls, text: str) -> "EnsembleModel":
        payload = json.loads(text)
        version = payload.get("format_version")
        if version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        return cls(
            trees=[DecisionTree.from_dict(t) for t in payload["trees"]],
            classes=np.array(payload["classes"], dtype=np.float64),
            n_estimators=payload["n_estimators"],
            seed=payload["seed"],
            selected_features=tuple(payload["selected_features"]),
            feature_names=tuple(payload["feature_names"]),
            n_features_full=payload["n_features_full"],
        )

    @classmethod
    def load(cls, path: Path | str) -> "EnsembleModel":
        return cls.from_json(Path(path).read_text())


def fit_bagging(
    dataset: Dataset,
    n_estimators: int = 100,
    seed: int = 0,
    max_depth: int = 12,
    min_leaf: int = 1,
    selected_features: Sequence[int] | None = None,
) -> EnsembleModel:
    """Bootstrap-aggregated trees; each tree gets its own RNG stream derived
    from (seed, tree index), so results are independent of fit order."""
    if selected_features is None:
        selected_features = tuple(range(dataset.features.shape[1]))
    selected_features = tuple(int(i) for i in selected_features)
    X = dataset.features[:, list(selected_features)]
    y = dataset.labels
    classes = dataset.classes
    n = len(X)
    trees = []
    for t in range(n_estimators):
        rng = np.random.default_rng((seed, t))
        rows = rng.integers(0, n, size=n)
        trees.append(fit_tree(X[rows], y[rows], classes, max_depth, min_leaf))
    return EnsembleModel(
        trees=trees,
        classes=classes,
        n_estimators=n_estimators,
        seed=seed,
        selected_features=selected_features,
        feature_names=dataset.feature_names,
        n_features_full=dataset.features.shape[1],
    )


# --- evaluation protocol -------------------------------------------------------


@dataclass
class EvalReport:
    accuracy: float
    per_iteration: list[float]
    confusion: np.ndarray  # rows = ground truth, columns = predicted
    class_order: tuple[float, ...]
    higher_rate_error_fraction: float | None

    def confusion_rows(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.confusion]


def _stratified_split(
    labels: np.ndarray, train_fraction: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(len(idx))]
        k = min(len(idx), max(1, int(round(train_fraction * len(idx)))))
        train.extend(idx[:k])
        test.extend(idx[k:])
    return np.array(sorted(train), dtype=np.intp), np.array(sorted(test), dtype=np.intp)


def evaluate(
    dataset: Dataset,
    n_iterations: int = 12,
    train_fraction: float = 0.8,
    seed: int = 0,
    n_estimators: int = 100,
    max_depth: int = 12,
    min_leaf: int = 1,
    selected_features: Sequence[int] | None = None,
    protocol: str = "random",
) -> EvalReport:
    """Repeated random 80/20 splits (default) or canonical k-fold CV.

    Accuracy is the mean over iterations; the confusion matrix is summed,
    rows/columns ordered from the highest frame-rate class down.
    """
    classes = dataset.classes
    order = tuple(float(c) for c in classes)
    pos = {c: i for i, c in enumerate(order)}
    confusion = np.zeros((len(order), len(order)), dtype=np.int64)
    accs = []
    higher, errors = 0, 0

    def splits():
        if protocol == "random":
            for it in range(n_iterations):
                rng = np.random.default_rng((seed, 1000 + it))
                for _ in range(10):
                    train, test = _stratified_split(dataset.labels, train_fraction, rng)
                    if len(test) and set(np.unique(dataset.labels[train])) == set(order):
                        break
                else:
                    raise ValueError("could not draw a split covering every class")
                yield it, train, test
        elif protocol == "kfold":
            rng = np.random.default_rng((seed, 999))
            perm = rng.permutation(len(dataset.labels))
            folds = np.array_split(perm, n_iterations)
            for it, fold in enumerate(folds):
                test = np.array(sorted(fold), dtype=np.intp)
                train = np.array(sorted(set(perm) - set(fold)), dtype=np.intp)
                yield it, train, test
        else:
            raise ValueError(f"unknown protocol {protocol!r}")

    for it, train, test in splits():
        subset = Dataset(dataset.features[train], dataset.labels[train], dataset.feature_names)
        model = fit_bagging(
            subset,
            n_estimators=n_estimators,
            seed=seed + it,
            max_depth=max_depth,
            min_leaf=min_leaf,
            selected_features=selected_features,
        )
        predictions = model.predict_many(dataset.features[test])
        truth = dataset.labels[test]
        accs.append(float(np.mean(predictions == truth)))
        for t, p in zip(truth, predictions):
            if float(t) in pos and float(p) in pos:
                confusion[pos[float(t)], pos[float(p)]] += 1
            if p != t:
                errors += 1
                higher += p > t
    return EvalReport(
        accuracy=float(np.mean(accs)),
        per_iteration=accs,
        confusion=confusion,
        class_order=order,
        higher_rate_error_fraction=(higher / errors) if errors else None,
    )
