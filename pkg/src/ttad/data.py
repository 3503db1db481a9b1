"""Dataset loading, unit-interval feature scaling, and stratified CV splits.

Datasets are plain CSV files with a header row, numeric feature columns and
a binary label column (0 = normal, 1 = anomaly). ODDS-style ``.mat`` files
must be converted to CSV beforehand; see the README.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import StratifiedKFold


@dataclass(frozen=True)
class Dataset:
    """A named feature matrix with binary ground-truth labels."""

    name: str
    features: np.ndarray  # (n_samples, n_dims) float64
    labels: np.ndarray  # (n_samples,) int, values in {0, 1}

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_dims(self) -> int:
        return self.features.shape[1]

    @property
    def anomaly_fraction(self) -> float:
        return float(np.mean(self.labels))


@dataclass(frozen=True)
class FoldSplit:
    fold_index: int
    train_indices: np.ndarray
    test_indices: np.ndarray


def load_csv(path, label_column: str = "label") -> Dataset:
    """Load a CSV dataset, preserving row order and applying no scaling.

    Raises FileNotFoundError for a missing file and ValueError for an empty
    file, a missing/invalid label column, or any non-numeric feature cell
    (reported with its row and column).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ValueError(f"{path}: empty file") from None
    if frame.shape[0] == 0:
        raise ValueError(f"{path}: no data rows")
    if label_column not in frame.columns:
        raise ValueError(f"{path}: no column named {label_column!r}")
    feature_cols = [c for c in frame.columns if c != label_column]
    if not feature_cols:
        raise ValueError(f"{path}: no feature columns besides the label")

    for col in feature_cols:
        numeric = pd.to_numeric(frame[col], errors="coerce")
        bad = numeric.isna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise ValueError(
                f"{path}: non-numeric value in column {col!r}, row {row}"
            )
        frame[col] = numeric

    labels_raw = pd.to_numeric(frame[label_column], errors="coerce")
    if labels_raw.isna().any():
        row = int(np.flatnonzero(labels_raw.isna().to_numpy())[0])
        raise ValueError(
            f"{path}: non-numeric label in column {label_column!r}, row {row}"
        )
    labels = labels_raw.to_numpy()
    if not np.isin(labels, (0, 1)).all():
        bad = labels[~np.isin(labels, (0, 1))][0]
        raise ValueError(f"{path}: label values must be 0 or 1, found {bad!r}")

    features = frame[feature_cols].to_numpy(dtype=np.float64)
    return Dataset(name=path.stem, features=features, labels=labels.astype(np.int64))


class UnitIntervalScaler(BaseEstimator, TransformerMixin):
    """Min-max scaler onto [0, 1] with clamping of out-of-range values.

    Fit on training rows only to keep test statistics out of the scaling.
    Degenerate features (min == max) map to 0. Values outside the fitted
    range clamp to the interval edges rather than extrapolating, since the
    detector's sigmoid output cannot represent values outside [0, 1].
    """

    def fit(self, X, y=None):
        X = _as_matrix(X)
        if X.shape[0] == 0:
            raise ValueError("cannot fit scaler on an empty row set")
        self.per_feature_min_ = X.min(axis=0)
        self.per_feature_max_ = X.max(axis=0)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X) -> np.ndarray:
        X = _as_matrix(X)
        self._check_fitted(X)
        span = self.per_feature_max_ - self.per_feature_min_
        safe_span = np.where(span > 0, span, 1.0)
        scaled = (X - self.per_feature_min_) / safe_span
        scaled = np.where(span > 0, scaled, 0.0)
        return np.clip(scaled, 0.0, 1.0)

    def inverse_transform(self, X) -> np.ndarray:
        X = _as_matrix(X)
        self._check_fitted(X)
        span = self.per_feature_max_ - self.per_feature_min_
        return X * span + self.per_feature_min_

    def _check_fitted(self, X):
        if not hasattr(self, "per_feature_min_"):
            raise NotFittedError("scaler is not fitted")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, scaler was fit on {self.n_features_in_}"
            )


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-d array")
    return X


def stratified_folds(labels, n_folds: int, seed: int) -> list[FoldSplit]:
    """Deterministic stratified k-fold splits over binary labels.

    The test folds partition all row indices; each fold's anomaly count is
    within one of an exact proportional share.
    """
    labels = np.asarray(labels)
    if n_folds < 2:
        raise ValueError("n_folds must be at least 2")
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise ValueError("labels contain a single class; need both 0 and 1")
    if counts.min() < n_folds:
        raise ValueError(
            f"smallest class has {counts.min()} members, fewer than {n_folds} folds"
        )
    splitter = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed)
    dummy = np.zeros((len(labels), 1))
    return [
        FoldSplit(i, train.copy(), test.copy())
        for i, (train, test) in enumerate(splitter.split(dummy, labels))
    ]
