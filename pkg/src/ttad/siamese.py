"""Siamese network learning an adaptive distance for neighbor retrieval.

Two weight-shared relu towers (input -> 32 -> 64) embed a pair of rows; a
single sigmoid unit over the elementwise absolute difference of the two
embeddings is trained with binary cross-entropy against pseudo-labels
(1 = same pseudo-class, 0 = different). After training, the towers provide
embeddings and similarity is their cosine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ttad import nn


@dataclass(frozen=True)
class PairSet:
    """Training pairs with a balanced 50/50 same/different-class mix."""

    left: np.ndarray  # (n_pairs, d)
    right: np.ndarray  # (n_pairs, d)
    target: np.ndarray  # (n_pairs,) 1 = same pseudo-class, 0 = different
    left_index: np.ndarray
    right_index: np.ndarray

    def __len__(self) -> int:
        return self.target.shape[0]


def make_pairs(rows, pseudo_labels, n_pairs: int, seed: int) -> PairSet:
    """Sample a balanced pair set: n_pairs/2 same-class (uniform over ordered
    same-class index pairs, never a row with itself) and n_pairs/2 cross-class
    (uniform over one row per class), with replacement, deterministic per seed.
    """
    rows = np.asarray(rows, dtype=np.float64)
    labels = np.asarray(pseudo_labels)
    if n_pairs < 2 or n_pairs % 2 != 0:
        raise ValueError("n_pairs must be even and at least 2")
    class0 = np.flatnonzero(labels == 0)
    class1 = np.flatnonzero(labels == 1)
    if class0.size == 0 or class1.size == 0:
        raise ValueError("both pseudo-classes must be nonempty")

    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    half = n_pairs // 2

    # Same-class pairs: classes weighted by their count of ordered pairs.
    weights = np.array(
        [class0.size * (class0.size - 1), class1.size * (class1.size - 1)],
        dtype=np.float64,
    )
    if weights.sum() == 0:
        raise ValueError("no pseudo-class has two members to pair")
    probs = weights / weights.sum()
    left_idx = np.empty(n_pairs, dtype=np.int64)
    right_idx = np.empty(n_pairs, dtype=np.int64)
    for p in range(half):
        members = class0 if rng.random() < probs[0] else class1
        i = rng.integers(members.size)
        j = rng.integers(members.size - 1)
        if j >= i:
            j += 1
        left_idx[p] = members[i]
        right_idx[p] = members[j]
    left_idx[half:] = class0[rng.integers(class0.size, size=half)]
    right_idx[half:] = class1[rng.integers(class1.size, size=half)]
    target = np.concatenate([np.ones(half), np.zeros(half)])

    order = rng.permutation(n_pairs)
    left_idx, right_idx, target = left_idx[order], right_idx[order], target[order]
    return PairSet(rows[left_idx], rows[right_idx], target, left_idx, right_idx)


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine of two vectors; 0 by convention when either has zero norm."""
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


def cosine_to_many(probe: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Cosine of one vector against each row; zero-norm rows or probe give 0."""
    row_norms = np.linalg.norm(rows, axis=1)
    probe_norm = np.linalg.norm(probe)
    if probe_norm == 0.0:
        return np.zeros(rows.shape[0])
    sims = rows @ probe
    safe = np.where(row_norms > 0, row_norms, 1.0) * probe_norm
    return np.where(row_norms > 0, sims / safe, 0.0)


class SiameseMetric(BaseEstimator, TransformerMixin):
    """Learned distance metric: fit on pseudo-labeled rows, then embed.

    fit(X, y) builds a balanced pair set from the pseudo-labels y, trains
    the shared tower plus sigmoid head with Adam on BCE, and keeps the
    tower as the embedding map. transform(X) returns the 64-dim embeddings.
    """

    def __init__(
        self,
        hidden_units: tuple[int, int] = (32, 64),
        epochs: int = 10,
        batch_size: int = 64,
        learning_rate: float = 1e-3,
        n_pairs: int | None = None,
        seed: int = 0,
    ):
        self.hidden_units = hidden_units
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.n_pairs = n_pairs
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        n_pairs = self.n_pairs
        if n_pairs is None:
            n_pairs = 2 * X.shape[0]
        pairs = make_pairs(X, y, n_pairs, self.seed)
        return self.fit_pairs(pairs)

    def fit_pairs(self, pairs: PairSet):
        """Train on an explicit pair set. Deterministic per seed."""
        if len(pairs) == 0:
            raise ValueError("pair set is empty")
        d = pairs.left.shape[1]
        h1, h2 = self.hidden_units
        self.tower_ = nn.init_network([d, h1, h2], ["relu", "relu"], self.seed)
        self.head_ = nn.init_network([h2, 1], ["sigmoid"], self.seed + 1)
        state = nn.AdamState.for_n_params(
            self.tower_.n_params + self.head_.n_params, self.learning_rate
        )
        n = len(pairs)
        for epoch in range(self.epochs):
            order = nn.epoch_shuffle(n, self.seed, epoch)
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                grads = self._pair_gradients(
                    pairs.left[idx], pairs.right[idx], pairs.target[idx]
                )
                self._apply_update(state, grads)
        self.n_features_in_ = d
        return self

    def _pair_gradients(self, left, right, target) -> np.ndarray:
        """BCE gradient for one batch; tower gradient sums both branches."""
        e_left, in_l, zs_l = nn.forward_cached(self.tower_, left)
        e_right, in_r, zs_r = nn.forward_cached(self.tower_, right)
        diff = e_left - e_right
        abs_diff = np.abs(diff)
        out, in_h, zs_h = nn.forward_cached(self.head_, abs_diff)
        grad_out = nn.loss_gradient(out, target.reshape(out.shape), "bce")
        g_head, grad_abs = nn.backward(self.head_, in_h, zs_h, grad_out)
        grad_diff = grad_abs * np.sign(diff)
        g_tower_l, _ = nn.backward(self.tower_, in_l, zs_l, grad_diff)
        g_tower_r, _ = nn.backward(self.tower_, in_r, zs_r, -grad_diff)
        return np.concatenate([g_tower_l + g_tower_r, g_head])

    def _apply_update(self, state: nn.AdamState, grads: np.ndarray) -> None:
        params = np.concatenate([nn.get_params(self.tower_), nn.get_params(self.head_)])
        params = nn.adam_update(params, state, grads)
        split = self.tower_.n_params
        nn.set_params(self.tower_, params[:split])
        nn.set_params(self.head_, params[split:])

    def transform(self, X) -> np.ndarray:
        """Embeddings: the tower's final (64-unit) relu layer output."""
        self._check_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return nn.forward(self.tower_, X)

    def embed(self, row) -> np.ndarray:
        return self.transform(row)[0]

    def similarity(self, x, y) -> float:
        """Cosine similarity of the two rows' embeddings, in [-1, 1]."""
        return cosine_similarity(self.embed(x), self.embed(y))

    def pair_scores(self, left, right) -> np.ndarray:
        """Head output in (0, 1) for row pairs: the trained same-class odds."""
        self._check_fitted()
        e_left = self.transform(left)
        e_right = self.transform(right)
        return nn.forward(self.head_, np.abs(e_left - e_right)).ravel()

    def save(self, tower_path, head_path) -> None:
        self._check_fitted()
        nn.save_network(self.tower_, tower_path)
        nn.save_network(self.head_, head_path)

    def load(self, tower_path, head_path):
        self.tower_ = nn.load_network(tower_path)
        self.head_ = nn.load_network(head_path)
        self.n_features_in_ = self.tower_.input_size
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "tower_"):
            raise NotFittedError("siamese metric is not fitted")
