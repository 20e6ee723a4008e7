"""Binary outcome classifiers, one per bucket, under three update policies.

The three policies differ only in how they react to newly labeled cases:

* ``incremental``: a categorical naive Bayes whose counts are updated on
  every label, with bounded memory so old evidence ages out.
* ``window-retrain``: a decision tree refit from scratch on a sliding
  window of the most recent labeled samples.
* ``static``: the same tree learner fit once on the grace-period samples
  and frozen afterwards.

All learners are deterministic: identical sample streams produce identical
model states and predictions. Prediction ties break toward label 0.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass
from enum import Enum
from math import log
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, NotReadyError
from .prefixing import AttributeSchema, BucketConfig, EncodedSample


class UpdatePolicy(str, Enum):
    INCREMENTAL = "incremental"
    WINDOW_RETRAIN = "window-retrain"
    STATIC = "static"


@dataclass(frozen=True)
class LearnerParams:
    """Hyperparameters shared by every bucket model of a framework."""

    tree_depth: int = 6
    min_leaf: int = 5
    train_window: int = 200
    retrain_every: int = 1
    memory: int = 300
    laplace: float = 1.0

    def __post_init__(self) -> None:
        if self.tree_depth < 1 or self.min_leaf < 1:
            raise ConfigError("tree depth and min leaf size must be >= 1")
        if self.train_window < 1 or self.retrain_every < 1 or self.memory < 1:
            raise ConfigError("window sizes and retrain cadence must be >= 1")
        if self.laplace <= 0:
            raise ConfigError("laplace smoothing must be positive")


# ---------------------------------------------------------------------------
# Decision tree learner (shared by window-retrain and static policies)
# ---------------------------------------------------------------------------


@dataclass
class _Node:
    prediction: int | None = None
    feature: int = -1
    numeric_split: bool = False
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None

    def to_dict(self) -> dict:
        if self.prediction is not None:
            return {"kind": "leaf", "prediction": self.prediction}
        return {
            "kind": "num" if self.numeric_split else "cat",
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }


def _gini(n1: float, n: float) -> float:
    p = n1 / n
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _check_width(sample: EncodedSample, mask: tuple, bucket: int) -> None:
    if len(sample.features) != len(mask):
        raise ValueError(
            f"bucket-{bucket} model expects {len(mask)} features, "
            f"sample has {len(sample.features)} (encoding schema mismatch)"
        )


class DecisionTree:
    """Greedy binary classification tree using Gini impurity.

    Categorical features split on equality with a code, numeric features on
    midpoint thresholds. Candidates are enumerated in a fixed order (feature
    index, then sorted value), and the first candidate with the best gain
    wins, so fitting is fully deterministic. Splits must leave at least
    ``min_leaf`` samples on each side.
    """

    def __init__(self, max_depth: int = 6, min_leaf: int = 5) -> None:
        if max_depth < 1 or min_leaf < 1:
            raise ConfigError("max_depth and min_leaf must be >= 1")
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.root: _Node | None = None

    def fit(
        self,
        features: Sequence[Sequence[float]],
        labels: Sequence[int],
        numeric_mask: Sequence[bool],
    ) -> "DecisionTree":
        matrix = np.asarray(features, dtype=float)
        target = np.asarray(labels, dtype=np.int64)
        if matrix.ndim != 2 or len(matrix) == 0:
            raise ValueError("fit requires a non-empty 2-D sample matrix")
        mask = np.asarray(numeric_mask, dtype=bool)
        self.root = self._build(matrix, target, mask, depth=0)
        return self

    def _leaf(self, target: np.ndarray) -> _Node:
        ones = int(target.sum())
        return _Node(prediction=int(ones > len(target) - ones))

    def _build(self, matrix: np.ndarray, target: np.ndarray, mask: np.ndarray, depth: int) -> _Node:
        n = len(target)
        ones = int(target.sum())
        if ones == 0 or ones == n or depth >= self.max_depth or n < 2 * self.min_leaf:
            return self._leaf(target)
        split = self._best_split(matrix, target, mask)
        if split is None:
            return self._leaf(target)
        feature, numeric_split, threshold, left_rows = split
        node = _Node(feature=feature, numeric_split=numeric_split, threshold=threshold)
        node.left = self._build(matrix[left_rows], target[left_rows], mask, depth + 1)
        node.right = self._build(matrix[~left_rows], target[~left_rows], mask, depth + 1)
        return node

    def _best_split(self, matrix, target, mask):
        n = len(target)
        parent = _gini(float(target.sum()), float(n))
        best_gain = -np.inf
        best = None
        for feature in range(matrix.shape[1]):
            column = matrix[:, feature]
            if mask[feature]:
                found = self._numeric_candidates(column, target, n, parent)
            else:
                found = self._categorical_candidates(column, target, n, parent)
            if found is not None and found[0] > best_gain:
                best_gain, threshold, left_rows = found
                best = (feature, bool(mask[feature]), threshold, left_rows)
        if best is None:
            return None
        return best

    def _numeric_candidates(self, column, target, n, parent):
        order = np.argsort(column, kind="stable")
        values = column[order]
        ones = np.cumsum(target[order])
        cuts = np.nonzero(values[:-1] != values[1:])[0]
        if len(cuts) == 0:
            return None
        n_left = cuts + 1
        n_right = n - n_left
        valid = (n_left >= self.min_leaf) & (n_right >= self.min_leaf)
        if not valid.any():
            return None
        gains = self._gains(ones[cuts], n_left, float(ones[-1]), n, parent)
        gains[~valid] = -np.inf
        pick = int(np.argmax(gains))
        threshold = float((values[cuts[pick]] + values[cuts[pick] + 1]) / 2.0)
        return float(gains[pick]), threshold, column <= threshold

    def _categorical_candidates(self, column, target, n, parent):
        values, inverse = np.unique(column, return_inverse=True)
        if len(values) < 2:
            return None
        n_left = np.bincount(inverse)
        ones_left = np.bincount(inverse, weights=target.astype(float))
        n_right = n - n_left
        valid = (n_left >= self.min_leaf) & (n_right >= self.min_leaf)
        if not valid.any():
            return None
        gains = self._gains(ones_left, n_left, float(target.sum()), n, parent)
        gains[~valid] = -np.inf
        pick = int(np.argmax(gains))
        value = float(values[pick])
        return float(gains[pick]), value, column == value

    @staticmethod
    def _gains(ones_left, n_left, ones_total, n, parent):
        n_left = n_left.astype(float)
        n_right = n - n_left
        ones_left = ones_left.astype(float)
        ones_right = ones_total - ones_left
        with np.errstate(divide="ignore", invalid="ignore"):
            p_left = ones_left / n_left
            p_right = ones_right / n_right
            gini_left = 1.0 - p_left**2 - (1.0 - p_left) ** 2
            gini_right = 1.0 - p_right**2 - (1.0 - p_right) ** 2
            weighted = (n_left * gini_left + n_right * gini_right) / n
        return parent - np.nan_to_num(weighted, nan=np.inf)

    def predict(self, features: Sequence[float]) -> int:
        if self.root is None:
            raise NotReadyError("decision tree has not been fit")
        node = self.root
        while node.prediction is None:
            value = float(features[node.feature])
            if node.numeric_split:
                node = node.left if value <= node.threshold else node.right
            else:
                node = node.left if value == node.threshold else node.right
        return node.prediction

    def to_dict(self) -> dict:
        if self.root is None:
            raise NotReadyError("decision tree has not been fit")
        return self.root.to_dict()


# ---------------------------------------------------------------------------
# Policy models
# ---------------------------------------------------------------------------


class IncrementalNaiveBayes:
    """Categorical naive Bayes updated on every label, with bounded memory.

    Counts cover the most recent ``memory`` labeled samples; evicted samples
    are subtracted so the state equals a batch recount over the window. The
    bound lets the model unlearn a stale concept at a fixed rate instead of
    needing as many new labels as it ever saw old ones.

    Numeric features are discretized into deciles estimated from the grace
    period: until :meth:`finish_grace` freezes the bin edges, samples are
    buffered and nothing is counted (models without numeric features count
    immediately).

    Scoring uses an unsmoothed class prior ``n_c / n`` and Laplace-smoothed
    per-feature likelihoods ``(count(f_i = v, c) + a) / (n_c + a * V_i)``
    where ``V_i`` is the number of distinct values of feature i currently in
    the window. Ties break toward label 0.
    """

    policy = UpdatePolicy.INCREMENTAL

    def __init__(
        self,
        bucket: int,
        numeric_mask: Sequence[bool],
        laplace: float = 1.0,
        memory: int = 300,
    ) -> None:
        self.bucket = bucket
        self.version = 0
        self._mask = tuple(bool(flag) for flag in numeric_mask)
        self._alpha = float(laplace)
        self._capacity = int(memory)
        self._window: deque = deque()
        self._frozen = not any(self._mask)
        self._bins: dict[int, list[float]] = {}
        self._counts: list[dict[float, list[int]]] = [{} for _ in self._mask]
        self._class_counts = [0, 0]

    @property
    def is_ready(self) -> bool:
        return sum(self._class_counts) > 0

    def observe_label(self, sample: EncodedSample) -> None:
        """Incorporate one labeled sample (the incremental update)."""
        if sample.label is None:
            raise ValueError("incremental update requires a labeled sample")
        _check_width(sample, self._mask, self.bucket)
        self._window.append((sample.features, sample.label))
        if self._frozen:
            self._count(sample.features, sample.label, +1)
        if len(self._window) > self._capacity:
            old_features, old_label = self._window.popleft()
            if self._frozen:
                self._count(old_features, old_label, -1)
        self.version += 1

    def finish_grace(self) -> None:
        """Freeze numeric decile bins on the grace samples and start counting."""
        if self._frozen:
            return
        for index, is_numeric in enumerate(self._mask):
            if not is_numeric:
                continue
            values = sorted(float(features[index]) for features, _ in self._window)
            if values:
                edges = np.quantile(values, [q / 10 for q in range(1, 10)])
                self._bins[index] = [float(edge) for edge in edges]
            else:
                self._bins[index] = []
        self._frozen = True
        for features, label in self._window:
            self._count(features, label, +1)

    def _key(self, index: int, value) -> float:
        if self._mask[index]:
            return float(bisect.bisect_right(self._bins.get(index, []), float(value)))
        return float(value)

    def _count(self, features, label: int, delta: int) -> None:
        for index, value in enumerate(features):
            key = self._key(index, value)
            entry = self._counts[index].setdefault(key, [0, 0])
            entry[label] += delta
            if entry[0] <= 0 and entry[1] <= 0:
                del self._counts[index][key]
        self._class_counts[label] += delta

    def predict(self, sample: EncodedSample) -> int:
        if not self.is_ready:
            raise NotReadyError(f"bucket-{self.bucket} incremental model has no training yet")
        _check_width(sample, self._mask, self.bucket)
        total = self._class_counts[0] + self._class_counts[1]
        scores = []
        for label in (0, 1):
            n_label = self._class_counts[label]
            if n_label == 0:
                scores.append(float("-inf"))
                continue
            score = log(n_label / total)
            for index, value in enumerate(sample.features):
                seen = self._counts[index]
                count = seen.get(self._key(index, value), (0, 0))[label]
                score += log((count + self._alpha) / (n_label + self._alpha * len(seen)))
            scores.append(score)
        return int(scores[1] > scores[0])


class WindowRetrainModel:
    """Decision tree refit from scratch on a sliding window of samples.

    Retraining fires on every ``retrain_every``-th labeled sample once the
    grace period is over; the first fit happens when the grace period ends.
    The stored window never exceeds ``train_window`` samples.
    """

    policy = UpdatePolicy.WINDOW_RETRAIN

    def __init__(
        self,
        bucket: int,
        numeric_mask: Sequence[bool],
        train_window: int = 200,
        tree_depth: int = 6,
        min_leaf: int = 5,
        retrain_every: int = 1,
    ) -> None:
        self.bucket = bucket
        self.version = 0
        self._mask = tuple(bool(flag) for flag in numeric_mask)
        self._window: deque = deque(maxlen=train_window)
        self._depth = tree_depth
        self._min_leaf = min_leaf
        self._retrain_every = retrain_every
        self._pending = 0
        self._grace_done = False
        self._tree: DecisionTree | None = None

    @property
    def is_ready(self) -> bool:
        return self._tree is not None

    @property
    def window_size(self) -> int:
        return len(self._window)

    def observe_label(self, sample: EncodedSample) -> None:
        if sample.label is None:
            raise ValueError("window update requires a labeled sample")
        _check_width(sample, self._mask, self.bucket)
        self._window.append((sample.features, sample.label))
        if not self._grace_done:
            return
        self._pending += 1
        if self._pending >= self._retrain_every:
            self.retrain()

    def retrain(self) -> None:
        """Fit a fresh tree on the current window."""
        if not self._window:
            raise NotReadyError(f"bucket-{self.bucket} training window is empty")
        features = [entry[0] for entry in self._window]
        labels = [entry[1] for entry in self._window]
        self._tree = DecisionTree(max_depth=self._depth, min_leaf=self._min_leaf).fit(
            features, labels, self._mask
        )
        self.version += 1
        self._pending = 0

    def finish_grace(self) -> None:
        self._grace_done = True
        if self._window:
            self.retrain()

    def predict(self, sample: EncodedSample) -> int:
        if self._tree is None:
            raise NotReadyError(f"bucket-{self.bucket} window model has no training yet")
        return self._tree.predict(sample.features)

    def tree_dict(self) -> dict:
        if self._tree is None:
            raise NotReadyError("no tree fit yet")
        return self._tree.to_dict()


class StaticModel:
    """Decision tree trained once on the grace samples, then frozen.

    Labeled samples seen before training are collected as the grace set;
    samples seen afterwards are ignored and do not change the version.
    """

    policy = UpdatePolicy.STATIC

    def __init__(
        self,
        bucket: int,
        numeric_mask: Sequence[bool],
        tree_depth: int = 6,
        min_leaf: int = 5,
    ) -> None:
        self.bucket = bucket
        self.version = 0
        self._mask = tuple(bool(flag) for flag in numeric_mask)
        self._grace: list[tuple] = []
        self._depth = tree_depth
        self._min_leaf = min_leaf
        self._tree: DecisionTree | None = None

    @property
    def is_ready(self) -> bool:
        return self._tree is not None

    def observe_label(self, sample: EncodedSample) -> None:
        if self._tree is not None:
            return
        if sample.label is None:
            raise ValueError("training samples must be labeled")
        _check_width(sample, self._mask, self.bucket)
        self._grace.append((sample.features, sample.label))

    def train(self, samples: Iterable[tuple]) -> None:
        """One-shot training; a second call is a contract violation."""
        if self._tree is not None:
            raise ValueError("static model is already trained")
        pairs = list(samples)
        if not pairs:
            raise NotReadyError(f"bucket-{self.bucket} has no grace samples to train on")
        features = [entry[0] for entry in pairs]
        labels = [entry[1] for entry in pairs]
        self._tree = DecisionTree(max_depth=self._depth, min_leaf=self._min_leaf).fit(
            features, labels, self._mask
        )
        self.version = 1

    def finish_grace(self) -> None:
        if self._tree is None and self._grace:
            self.train(self._grace)
            self._grace = []

    def predict(self, sample: EncodedSample) -> int:
        if self._tree is None:
            raise NotReadyError(f"bucket-{self.bucket} static model has no training yet")
        return self._tree.predict(sample.features)

    def tree_dict(self) -> dict:
        if self._tree is None:
            raise NotReadyError("no tree fit yet")
        return self._tree.to_dict()


OutcomeModel = IncrementalNaiveBayes | WindowRetrainModel | StaticModel


class PredictionFramework:
    """One outcome model per prefix-length bucket, all under one policy."""

    def __init__(self, models: dict[int, OutcomeModel], policy: UpdatePolicy) -> None:
        self.models = models
        self.policy = policy

    @classmethod
    def build(
        cls,
        policy: UpdatePolicy | str,
        buckets: BucketConfig,
        schema: AttributeSchema,
        params: LearnerParams | None = None,
    ) -> "PredictionFramework":
        policy = UpdatePolicy(policy)
        params = params or LearnerParams()
        models: dict[int, OutcomeModel] = {}
        for k in buckets.buckets():
            mask = schema.feature_mask(k)
            if policy is UpdatePolicy.INCREMENTAL:
                models[k] = IncrementalNaiveBayes(
                    k, mask, laplace=params.laplace, memory=params.memory
                )
            elif policy is UpdatePolicy.WINDOW_RETRAIN:
                models[k] = WindowRetrainModel(
                    k,
                    mask,
                    train_window=params.train_window,
                    tree_depth=params.tree_depth,
                    min_leaf=params.min_leaf,
                    retrain_every=params.retrain_every,
                )
            else:
                models[k] = StaticModel(
                    k, mask, tree_depth=params.tree_depth, min_leaf=params.min_leaf
                )
        return cls(models=models, policy=policy)

    def model(self, bucket: int) -> OutcomeModel:
        return self.models[bucket]

    def finish_grace(self) -> None:
        for model in self.models.values():
            model.finish_grace()
