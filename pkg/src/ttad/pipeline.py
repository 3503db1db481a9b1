"""Per-instance scoring loop: select neighbors, augment, score, aggregate.

For each test instance, the configured neighbor index supplies its k
closest rows from the pooled train-plus-test matrix (the instance's own
row excluded); the configured producer synthesizes augmentations from that
subset; the detector scores the instance and its augmentations; the final
score is the arithmetic mean of all of them. The detector is never
retrained.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ttad import producers
from ttad.detector import AutoencoderDetector
from ttad.neighbors import NeighborIndex

PRODUCERS = ("kmeans", "smote", "gaussian", "none")
METRICS = ("euclidean", "learned")
METRIC_FIT_CHOICES = ("train", "pool")


@dataclass
class TtadConfig:
    """Knobs for one scoring run; validated as a whole via validate()."""

    k: int = 10
    n_augments: int = 7
    producer: str = "kmeans"
    metric: str = "euclidean"
    contamination: float = 0.1
    seed: int = 0
    sigma: float = 0.1
    smote_form: str = "signed"
    # Rows used to fit the pseudo-labeler and Siamese metric: the training
    # fold only ("train", leakage-safe default) or the label-free pooled
    # train+test rows ("pool", the transductive variant).
    metric_fit_on: str = "train"

    def validate(self) -> "TtadConfig":
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.producer not in PRODUCERS:
            raise ValueError(f"unknown producer {self.producer!r}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.producer != "none" and self.n_augments < 1:
            raise ValueError("n_augments must be at least 1")
        if self.producer == "kmeans" and self.n_augments > self.k:
            raise ValueError(
                f"kmeans producer needs n_augments <= k, got {self.n_augments} > {self.k}"
            )
        if not 0.0 < self.contamination < 1.0:
            raise ValueError("contamination must lie strictly between 0 and 1")
        if self.producer == "gaussian" and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.smote_form not in producers.SMOTE_FORMS:
            raise ValueError(f"unknown SMOTE form {self.smote_form!r}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.metric_fit_on not in METRIC_FIT_CHOICES:
            raise ValueError(f"metric_fit_on must be one of {METRIC_FIT_CHOICES}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ScoredInstance:
    instance_id: int
    raw_score: float
    augment_scores: np.ndarray
    aggregated: float


def aggregate(raw_score: float, augment_scores) -> float:
    """Mean of the instance score and its augmentation scores."""
    augment_scores = np.asarray(augment_scores, dtype=np.float64)
    return float((raw_score + augment_scores.sum()) / (augment_scores.size + 1))


def instance_seed(run_seed: int, instance_id: int) -> int:
    """Stable per-instance seed so results are independent of scan order."""
    ss = np.random.SeedSequence([run_seed, int(instance_id)])
    return int(ss.generate_state(1)[0])


def _produce(config: TtadConfig, instance: np.ndarray, subset: np.ndarray,
             instance_id: int) -> np.ndarray:
    seed = instance_seed(config.seed, instance_id)
    if config.producer == "kmeans":
        batch = producers.kmeans_produce(subset, config.n_augments, seed, instance_id)
    elif config.producer == "smote":
        batch = producers.smote_produce(
            instance, subset, config.n_augments, seed, config.smote_form, instance_id
        )
    else:
        batch = producers.gaussian_produce(
            instance, config.n_augments, config.sigma, seed, instance_id
        )
    return batch.rows


def ttad_predict(
    config: TtadConfig,
    detector: AutoencoderDetector,
    index: NeighborIndex | None,
    test_rows,
    test_ids=None,
) -> list[ScoredInstance]:
    """Score every test row with its augmentations and aggregate by mean.

    test_ids gives each test row's id in the pooled index (for
    self-exclusion) and seeds its augmentation draw; defaults to 0..n-1.
    With producer "none" the output equals the plain detector scores.
    """
    config.validate()
    test_rows = np.asarray(test_rows, dtype=np.float64)
    if test_ids is None:
        test_ids = np.arange(test_rows.shape[0])
    raw_scores = detector.anomaly_score(test_rows)

    if config.producer == "none":
        return [
            ScoredInstance(int(i), float(s), np.empty(0), float(s))
            for i, s in zip(test_ids, raw_scores)
        ]

    if index is None and config.producer != "gaussian":
        raise ValueError(f"producer {config.producer!r} requires a neighbor index")

    all_augments = np.empty((test_rows.shape[0], config.n_augments, test_rows.shape[1]))
    for pos, (row, row_id) in enumerate(zip(test_rows, test_ids)):
        if config.producer == "gaussian":
            subset = None
        else:
            neighbor_ids = index.query(row, config.k, exclude=int(row_id))
            subset = index.rows_[neighbor_ids]
        all_augments[pos] = _produce(config, row, subset, int(row_id))

    flat = all_augments.reshape(-1, test_rows.shape[1])
    augment_scores = detector.anomaly_score(flat).reshape(
        test_rows.shape[0], config.n_augments
    )

    return [
        ScoredInstance(
            int(row_id),
            float(raw),
            augment_scores[pos].copy(),
            aggregate(float(raw), augment_scores[pos]),
        )
        for pos, (row_id, raw) in enumerate(zip(test_ids, raw_scores))
    ]
