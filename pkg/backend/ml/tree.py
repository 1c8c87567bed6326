"""
Decision tree grower

Binary trees over numeric features with thresholds at midpoints between
consecutive distinct values, chosen by information gain ratio. Shared by the
single-tree classifier (all features at every split) and the random forest
(a random feature subset per split).
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

LEAF = -1
MIN_GAIN = 1e-12


@dataclass(frozen=True, eq=False)
class TreeNodes:
    """
    Flat node arrays; node 0 is the root.

    feature[i] == -1 marks a leaf. Rows with x[feature] <= threshold go left.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    positives: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def leaf_index(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] != LEAF:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return node

    def leaf_indices(self, X: np.ndarray) -> np.ndarray:
        return np.array([self.leaf_index(row) for row in X], dtype=np.int64)

    def laplace_proba(self, X: np.ndarray) -> np.ndarray:
        leaves = self.leaf_indices(X)
        return (self.positives[leaves] + 1.0) / (self.counts[leaves] + 2.0)

    def votes(self, X: np.ndarray) -> np.ndarray:
        """1 where the reached leaf holds a strict positive majority"""
        leaves = self.leaf_indices(X)
        return (2 * self.positives[leaves] > self.counts[leaves]).astype(np.int64)

    def depth(self, node: int = 0) -> int:
        if self.feature[node] == LEAF:
            return 0
        return 1 + max(self.depth(self.left[node]), self.depth(self.right[node]))


def _binary_entropy(pos: np.ndarray, n: np.ndarray) -> np.ndarray:
    pos = np.asarray(pos, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    p = np.divide(pos, n, out=np.zeros_like(pos), where=n > 0)
    q = 1.0 - p
    with np.errstate(divide='ignore', invalid='ignore'):
        h = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return h


def best_threshold(values: np.ndarray, labels: np.ndarray):
    """
    Highest-gain midpoint threshold for one feature.

    Returns:
        (gain, gain_ratio, threshold), or None when the feature is constant
    """
    order = np.argsort(values, kind='stable')
    v = values[order]
    t = labels[order]
    n = v.shape[0]

    cut = np.nonzero(v[1:] > v[:-1])[0]
    if cut.size == 0:
        return None

    cum_pos = np.cumsum(t)
    total_pos = cum_pos[-1]
    n_left = cut + 1
    pos_left = cum_pos[cut]
    n_right = n - n_left
    pos_right = total_pos - pos_left

    children = (n_left * _binary_entropy(pos_left, n_left) + n_right * _binary_entropy(pos_right, n_right)) / n
    gain = _binary_entropy(total_pos, n) - children

    best = int(np.argmax(gain))
    split_info = float(_binary_entropy(n_left[best], n))
    threshold = 0.5 * (v[cut[best]] + v[cut[best] + 1])
    return float(gain[best]), float(gain[best]) / split_info, float(threshold)


class TreeGrower:
    """
    Grows one tree.

    Args:
        min_rows: nodes with fewer rows become leaves
        max_features: features drawn per split (None = all)
        rng: generator for the per-split feature draw (required with max_features)
    """

    def __init__(self, min_rows: int = 4, max_features: Optional[int] = None,
                 rng: Optional[np.random.Generator] = None):
        if max_features is not None and rng is None:
            raise ValueError("a random generator is required when max_features is set")
        self.min_rows = min_rows
        self.max_features = max_features
        self.rng = rng
        self._feature: List[int] = []
        self._threshold: List[float] = []
        self._left: List[int] = []
        self._right: List[int] = []
        self._positives: List[int] = []
        self._counts: List[int] = []

    def _new_node(self, positives: int, count: int) -> int:
        self._feature.append(LEAF)
        self._threshold.append(0.0)
        self._left.append(LEAF)
        self._right.append(LEAF)
        self._positives.append(positives)
        self._counts.append(count)
        return len(self._feature) - 1

    def _candidate_features(self, n_features: int) -> np.ndarray:
        if self.max_features is None or self.max_features >= n_features:
            return np.arange(n_features)
        return np.sort(self.rng.choice(n_features, size=self.max_features, replace=False))

    def _choose_split(self, X: np.ndarray, y: np.ndarray):
        """C4.5 rule: best gain ratio among features whose gain is at least the average"""
        candidates = []
        for j in self._candidate_features(X.shape[1]):
            found = best_threshold(X[:, j], y)
            if found is not None and found[0] > MIN_GAIN:
                candidates.append((int(j),) + found)
        if not candidates:
            return None

        average_gain = float(np.mean([c[1] for c in candidates]))
        best = None
        for feature, gain, ratio, threshold in candidates:
            if gain < average_gain - MIN_GAIN:
                continue
            if best is None or ratio > best[2]:
                best = (feature, gain, ratio, threshold)
        return best

    def _grow(self, X: np.ndarray, y: np.ndarray) -> int:
        n = y.shape[0]
        pos = int(y.sum())
        node = self._new_node(pos, n)
        if pos == 0 or pos == n or n < self.min_rows:
            return node

        split = self._choose_split(X, y)
        if split is None:
            return node

        feature, _gain, _ratio, threshold = split
        go_left = X[:, feature] <= threshold
        if go_left.all() or not go_left.any():
            return node

        self._feature[node] = feature
        self._threshold[node] = threshold
        self._left[node] = self._grow(X[go_left], y[go_left])
        self._right[node] = self._grow(X[~go_left], y[~go_left])
        return node

    def grow(self, X: np.ndarray, y: np.ndarray) -> TreeNodes:
        if X.shape[0] == 0:
            raise ValueError("cannot grow a tree on zero rows")
        self._grow(np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.int64))
        return TreeNodes(
            feature=np.array(self._feature, dtype=np.int64),
            threshold=np.array(self._threshold, dtype=np.float64),
            left=np.array(self._left, dtype=np.int64),
            right=np.array(self._right, dtype=np.int64),
            positives=np.array(self._positives, dtype=np.int64),
            counts=np.array(self._counts, dtype=np.int64),
        )
