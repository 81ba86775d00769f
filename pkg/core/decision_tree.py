"""
Classification tree grown best-first with the Gini diversity index and a
global budget on branch nodes (MaxNumSplits).
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from core.errors import DimensionMismatch, EmptyData, EmptyNode, InvalidConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TreeConfig:
    max_splits: int = 100
    min_leaf: int = 1
    criterion: str = 'gdi'

    def __post_init__(self):
        if self.max_splits < 0:
            raise InvalidConfig(f"max_splits must be >= 0, got {self.max_splits}")
        if self.min_leaf < 1:
            raise InvalidConfig(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.criterion != 'gdi':
            raise InvalidConfig(f"only the Gini diversity index ('gdi') is supported, got {self.criterion!r}")


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    label: int = 1
    patient_fraction: float = 0.0

    @property
    def is_leaf(self):
        return self.left < 0


@dataclass(eq=False)
class TreeModel:
    nodes: list = field(default_factory=list)
    n_features: int = 0

    @property
    def n_splits(self):
        return sum(not node.is_leaf for node in self.nodes)

    @property
    def n_leaves(self):
        return sum(node.is_leaf for node in self.nodes)

    def apply(self, X) -> np.ndarray:
        """Index of the leaf each row lands in; x[feature] < threshold goes left"""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"tree expects {self.n_features} features, got {X.shape[1]}")
        position = np.zeros(X.shape[0], dtype=np.int64)
        # children are always created after their parent, so one ordered pass suffices
        for node_id, node in enumerate(self.nodes):
            if node.is_leaf:
                continue
            rows = np.flatnonzero(position == node_id)
            if rows.size == 0:
                continue
            go_left = X[rows, node.feature] < node.threshold
            position[rows[go_left]] = node.left
            position[rows[~go_left]] = node.right
        return position

    def predict(self, X) -> np.ndarray:
        labels = np.array([node.label for node in self.nodes], dtype=np.int64)
        return labels[self.apply(X)]

    def patient_probability(self, X) -> np.ndarray:
        fractions = np.array([node.patient_fraction for node in self.nodes])
        return fractions[self.apply(X)]

    def to_dict(self):
        return {
            'n_features': self.n_features,
            'feature': [n.feature for n in self.nodes],
            'threshold': [n.threshold for n in self.nodes],
            'left': [n.left for n in self.nodes],
            'right': [n.right for n in self.nodes],
            'label': [n.label for n in self.nodes],
            'patient_fraction': [n.patient_fraction for n in self.nodes],
        }

    @classmethod
    def from_dict(cls, values):
        nodes = [
            TreeNode(int(f), float(t), int(l), int(r), int(lab), float(p))
            for f, t, l, r, lab, p in zip(values['feature'], values['threshold'], values['left'],
                                          values['right'], values['label'], values['patient_fraction'])
        ]
        return cls(nodes, int(values['n_features']))


def gini_impurity(class_counts) -> float:
    """1 - sum (n_i / n)^2"""
    counts = np.asarray(class_counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise EmptyNode("Gini impurity of an empty node")
    return float(1.0 - np.sum((counts / total) ** 2))


def _weighted_impurity(weight, patient_weight):
    """weight * gini for two classes, vectorized; weight must be > 0"""
    other = weight - patient_weight
    return weight - (patient_weight ** 2 + other ** 2) / weight


def _leaf_values(y, w):
    patient = w[y > 0].sum()
    total = w.sum()
    # ties go to Patient
    label = 1 if patient >= total - patient else -1
    return label, float(patient / total)


def best_split(X, y, w, min_leaf=1):
    """
    Best (gain, feature, threshold) over all features and midpoints between
    consecutive distinct values, or None. Gain is the weighted impurity
    decrease; ties keep the lower feature index, then the lower threshold.
    """
    m, d = X.shape
    if m < 2 * min_leaf:
        return None
    total = w.sum()
    patient_total = w[y > 0].sum()
    parent = _weighted_impurity(total, patient_total)
    tie_tolerance = 1e-12 * max(1.0, total)

    counts_left = np.arange(1, m)
    size_ok = (counts_left >= min_leaf) & (m - counts_left >= min_leaf)

    best = None
    for feature in range(d):
        order = np.argsort(X[:, feature], kind='stable')
        xs = X[order, feature]
        ws = w[order]
        left_w = np.cumsum(ws)[:-1]
        left_p = np.cumsum(np.where(y[order] > 0, ws, 0.0))[:-1]

        valid = size_ok & (xs[1:] > xs[:-1])
        if not valid.any():
            continue
        right_w = total - left_w
        right_p = patient_total - left_p
        with np.errstate(divide='ignore', invalid='ignore'):
            gain = parent - _weighted_impurity(left_w, left_p) - _weighted_impurity(right_w, right_p)
        gain = np.where(valid, gain, -np.inf)

        k = int(np.flatnonzero(gain >= gain.max() - tie_tolerance)[0])
        if best is None or gain[k] > best[0] + tie_tolerance:
            threshold = 0.5 * (xs[k] + xs[k + 1])
            if not threshold > xs[k]:
                threshold = xs[k + 1]
            best = (float(gain[k]), feature, float(threshold))
    return best


def train_tree(X, y, cfg: TreeConfig | None = None, sample_weights=None) -> TreeModel:
    """
    Grow best-first: repeatedly split the frontier leaf with the largest
    impurity decrease until the branch budget is spent, no split has a
    positive gain, or every leaf is pure. Labels are +1 / -1.
    """
    cfg = cfg or TreeConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y).ravel()
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyData("no training rows")
    if X.shape[0] != y.size:
        raise DimensionMismatch(f"{X.shape[0]} rows but {y.size} labels")
    if sample_weights is None:
        w = np.ones(y.size)
    else:
        w = np.asarray(sample_weights, dtype=np.float64).ravel()
        if w.size != y.size:
            raise DimensionMismatch(f"{w.size} weights for {y.size} rows")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise InvalidConfig("sample weights must be positive and finite")

    min_gain = 1e-12 * w.sum()
    rows_of = {0: np.arange(y.size)}
    label, fraction = _leaf_values(y, w)
    nodes = [TreeNode(label=label, patient_fraction=fraction)]

    frontier = []

    def push(node_id):
        rows = rows_of[node_id]
        split = best_split(X[rows], y[rows], w[rows], cfg.min_leaf)
        if split is not None and split[0] > min_gain:
            heapq.heappush(frontier, (-split[0], node_id, split[1], split[2]))

    push(0)
    splits = 0
    while splits < cfg.max_splits and frontier:
        _, node_id, feature, threshold = heapq.heappop(frontier)
        rows = rows_of.pop(node_id)
        go_left = X[rows, feature] < threshold

        children = []
        for child_rows in (rows[go_left], rows[~go_left]):
            label, fraction = _leaf_values(y[child_rows], w[child_rows])
            nodes.append(TreeNode(label=label, patient_fraction=fraction))
            rows_of[len(nodes) - 1] = child_rows
            children.append(len(nodes) - 1)

        node = nodes[node_id]
        node.feature, node.threshold = feature, threshold
        node.left, node.right = children
        splits += 1
        for child in children:
            push(child)

    model = TreeModel(nodes, X.shape[1])
    logger.debug("Tree grown: %d splits, %d leaves (budget %d)", model.n_splits, model.n_leaves, cfg.max_splits)
    return model


def predict_tree(model: TreeModel, x) -> int:
    x = np.asarray(x, dtype=np.float64).ravel()
    return int(model.predict(x[None, :])[0])
