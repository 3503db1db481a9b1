"""Autoencoder anomaly detector: train on normal rows, score by
reconstruction error.

Architecture is mirrored around a 16-unit latent layer (d -> 64 -> 16 ->
64 -> d), relu inside, sigmoid output, trained with Adam on MSE. Inputs
must already be scaled to [0, 1] -- the sigmoid output cannot reach
anything else. The per-sample score is the mean (not sum) of squared
feature errors, so scores are comparable across dimensionalities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ttad import nn


class AutoencoderDetector(BaseEstimator):
    """Reconstruction-error detector; higher anomaly_score = more anomalous."""

    def __init__(
        self,
        hidden_units: int = 64,
        latent_units: int = 16,
        epochs: int = 300,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        seed: int = 0,
    ):
        self.hidden_units = hidden_units
        self.latent_units = latent_units
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.seed = seed

    def fit(self, X, y=None):
        """Train on rows considered normal; X must lie in [0, 1]."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("training rows must form a nonempty 2-d matrix")
        if not np.isfinite(X).all():
            raise ValueError("training rows contain non-finite values")
        if X.min() < 0.0 or X.max() > 1.0:
            raise ValueError("training rows must be scaled to [0, 1]")
        d = X.shape[1]
        self.network_ = nn.init_network(
            [d, self.hidden_units, self.latent_units, self.hidden_units, d],
            ["relu", "relu", "relu", "sigmoid"],
            self.seed,
        )
        nn.train(
            self.network_, X, X, "mse",
            self.epochs, self.batch_size, self.learning_rate, self.seed,
        )
        self.n_features_in_ = d
        return self

    def reconstruct(self, X) -> np.ndarray:
        self._check_fitted()
        X = np.asarray(X, dtype=np.float64)
        return nn.forward(self.network_, X)

    def anomaly_score(self, X) -> np.ndarray:
        """Per-row mean squared reconstruction error, >= 0."""
        X = np.asarray(X, dtype=np.float64)
        recon = self.reconstruct(X)
        return ((recon - X) ** 2).mean(axis=1)

    def score_samples(self, X) -> np.ndarray:
        """Negated anomaly score, matching the usual sklearn orientation."""
        return -self.anomaly_score(X)

    def save(self, path) -> None:
        self._check_fitted()
        nn.save_network(self.network_, path)

    def load(self, path):
        self.network_ = nn.load_network(path)
        self.n_features_in_ = self.network_.input_size
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "network_"):
            raise NotFittedError("detector is not fitted")
