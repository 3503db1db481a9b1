"""Exact nearest-neighbor selection over pooled train and test rows.

A linear scan, not an approximate structure: the benchmark datasets are
small (at most ~11k rows) and exactness keeps runs reproducible. The
distance is pluggable: plain Euclidean, or descending cosine similarity of
Siamese embeddings (the learned metric; distance = 1 - similarity).
"""

from __future__ import annotations

import numpy as np
from sklearn.exceptions import NotFittedError

from ttad.siamese import SiameseMetric, cosine_to_many


class NeighborIndex:
    """Queryable row store; returns each probe's k closest rows by index.

    Ties break toward the lower row index. When the probe is itself one of
    the indexed rows, pass its row id as ``exclude`` so it cannot be
    returned as its own neighbor.
    """

    def __init__(self, metric: str = "euclidean", model: SiameseMetric | None = None):
        if metric not in ("euclidean", "learned"):
            raise ValueError(f"unknown metric {metric!r}")
        if metric == "learned" and model is None:
            raise ValueError("learned metric requires a fitted SiameseMetric")
        self.metric = metric
        self.model = model

    def fit(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("need a nonempty 2-d row matrix")
        self.rows_ = X
        if self.metric == "learned":
            self.embeddings_ = self.model.transform(X)
        return self

    def __len__(self) -> int:
        self._check_fitted()
        return self.rows_.shape[0]

    def query(self, probe, k: int, exclude: int | None = None) -> np.ndarray:
        """Indices of the k nearest rows to the probe, ascending by distance."""
        self._check_fitted()
        probe = np.asarray(probe, dtype=np.float64).ravel()
        keys = self._sort_keys(probe)
        return self._top_k(keys, k, exclude)

    def query_many(self, probes, k: int, exclude=None) -> np.ndarray:
        """Vectorized query; exclude aligns with probes when given."""
        self._check_fitted()
        probes = np.asarray(probes, dtype=np.float64)
        out = np.empty((probes.shape[0], k), dtype=np.int64)
        for i, probe in enumerate(probes):
            out[i] = self.query(probe, k, None if exclude is None else exclude[i])
        return out

    def _sort_keys(self, probe: np.ndarray) -> np.ndarray:
        if probe.shape[0] != self.rows_.shape[1]:
            raise ValueError("probe width does not match indexed rows")
        if self.metric == "euclidean":
            return np.linalg.norm(self.rows_ - probe, axis=1)
        sims = cosine_to_many(self.model.embed(probe), self.embeddings_)
        return -sims  # descending similarity

    def _top_k(self, keys: np.ndarray, k: int, exclude: int | None) -> np.ndarray:
        n = keys.shape[0]
        available = n - (1 if exclude is not None else 0)
        if k < 1 or k > available:
            raise ValueError(f"k must be in [1, {available}], got {k}")
        order = np.lexsort((np.arange(n), keys))
        if exclude is not None:
            order = order[order != exclude]
        return order[:k]

    def _check_fitted(self) -> None:
        if not hasattr(self, "rows_"):
            raise NotFittedError("index is not fitted")
