"""Isolation forest, used here as a pseudo-labeler for Siamese pair building.

Each tree recursively partitions a without-replacement subsample by picking
a random feature (among those with more than one distinct value at the
node) and a split value drawn strictly between that feature's min and max.
Rows that isolate quickly get short average path lengths and hence scores
near 1. Scoring follows Liu's normalization: s = 2^(-E[h] / c(n)) with
c(n) = 2 H(n-1) - 2 (n-1)/n and H(k) = ln(k) + Euler's constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

EULER_GAMMA = 0.5772156649


def average_path_length(n: int) -> float:
    """c(n): expected path length of an unsuccessful BST search, 0 for n <= 1."""
    if n <= 1:
        return 0.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


@dataclass
class TreeNode:
    """Split node (feature >= 0) or leaf (feature == -1, size = rows reaching it)."""

    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    size: int = 0


def _build_tree(X: np.ndarray, indices: np.ndarray, depth: int, height_limit: int,
                rng: np.random.Generator) -> TreeNode:
    n = indices.size
    if n <= 1 or depth >= height_limit:
        return TreeNode(size=n)
    sub = X[indices]
    mins = sub.min(axis=0)
    maxs = sub.max(axis=0)
    splittable = np.flatnonzero(maxs > mins)
    if splittable.size == 0:  # all duplicate rows
        return TreeNode(size=n)
    feature = int(splittable[rng.integers(splittable.size)])
    lo, hi = mins[feature], maxs[feature]
    threshold = rng.uniform(lo, hi)
    if not lo < threshold < hi:
        threshold = lo + (hi - lo) / 2.0
    if not lo < threshold < hi:  # adjacent floats; no strictly-interior value
        return TreeNode(size=n)
    goes_left = sub[:, feature] < threshold
    return TreeNode(
        feature=feature,
        threshold=threshold,
        left=_build_tree(X, indices[goes_left], depth + 1, height_limit, rng),
        right=_build_tree(X, indices[~goes_left], depth + 1, height_limit, rng),
    )


def _path_lengths(node: TreeNode, X: np.ndarray, indices: np.ndarray,
                  depth: int, out: np.ndarray) -> None:
    if node.feature < 0:
        out[indices] = depth + average_path_length(node.size)
        return
    goes_left = X[indices, node.feature] < node.threshold
    left_idx = indices[goes_left]
    right_idx = indices[~goes_left]
    if left_idx.size:
        _path_lengths(node.left, X, left_idx, depth + 1, out)
    if right_idx.size:
        _path_lengths(node.right, X, right_idx, depth + 1, out)


class IsolationForest(BaseEstimator):
    """Ensemble of randomized isolation trees with scores in (0, 1).

    Subsamples are drawn without replacement (no bootstrapping); tree depth
    is capped at ceil(log2(subsample size)).
    """

    def __init__(self, n_trees: int = 200, subsample_size: int = 256, seed: int = 0):
        self.n_trees = n_trees
        self.subsample_size = subsample_size
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] < 2:
            raise ValueError("need a 2-d matrix with at least 2 rows")
        n = X.shape[0]
        sample_size = min(self.subsample_size, n)
        height_limit = math.ceil(math.log2(sample_size))
        root_seq = np.random.SeedSequence(self.seed)
        self.trees_ = []
        self.sample_indices_ = []
        for child in root_seq.spawn(self.n_trees):
            rng = np.random.default_rng(child)
            sample = rng.choice(n, size=sample_size, replace=False)
            self.sample_indices_.append(sample)
            self.trees_.append(
                _build_tree(X[sample], np.arange(sample_size), 0, height_limit, rng)
            )
        self.normalizer_ = average_path_length(sample_size)
        self.n_features_in_ = X.shape[1]
        return self

    def mean_path_lengths(self, X) -> np.ndarray:
        """E[h(x)] over the trees, including the c(leaf size) adjustment."""
        X = self._validate_rows(X)
        total = np.zeros(X.shape[0])
        idx = np.arange(X.shape[0])
        buf = np.zeros(X.shape[0])
        for tree in self.trees_:
            _path_lengths(tree, X, idx, 0, buf)
            total += buf
        return total / len(self.trees_)

    def anomaly_score(self, X) -> np.ndarray:
        """s = 2^(-E[h] / c(subsample size)); higher means more anomalous."""
        return 2.0 ** (-self.mean_path_lengths(X) / self.normalizer_)

    def score_samples(self, X) -> np.ndarray:
        """Negated anomaly score, matching the usual sklearn orientation."""
        return -self.anomaly_score(X)

    def pseudo_label(self, X, contamination: float = 0.1) -> np.ndarray:
        """Label the ceil(contamination * n) highest-scoring rows as 1.

        Ties broken toward the lower row index.
        """
        if not 0.0 < contamination < 1.0:
            raise ValueError("contamination must lie strictly between 0 and 1")
        X = self._validate_rows(X)
        n = X.shape[0]
        if n == 0:
            raise ValueError("rows must be nonempty")
        scores = self.anomaly_score(X)
        n_anomalous = math.ceil(contamination * n)
        order = np.lexsort((np.arange(n), -scores))
        labels = np.zeros(n, dtype=np.int64)
        labels[order[:n_anomalous]] = 1
        return labels

    def _validate_rows(self, X) -> np.ndarray:
        if not hasattr(self, "trees_"):
            raise NotFittedError("forest is not fitted")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"expected {self.n_features_in_} features, got shape {X.shape}"
            )
        return X
