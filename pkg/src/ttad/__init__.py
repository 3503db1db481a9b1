"""Test-time augmentation for tabular anomaly detection.

Scores a test instance together with synthetic variants generated from its
nearest neighbors (k-Means centroids, SMOTE interpolation, or Gaussian
noise), aggregating by the mean of the anomaly scores.
"""

from ttad.data import Dataset, FoldSplit, UnitIntervalScaler, load_csv, stratified_folds
from ttad.detector import AutoencoderDetector
from ttad.isolation_forest import IsolationForest
from ttad.neighbors import NeighborIndex
from ttad.pipeline import ScoredInstance, TtadConfig, aggregate, ttad_predict
from ttad.siamese import PairSet, SiameseMetric, make_pairs
from ttad.evaluation import EvalReport, roc_auc, run_cv, sweep

__version__ = "0.1.0"

__all__ = [
    "AutoencoderDetector",
    "Dataset",
    "EvalReport",
    "FoldSplit",
    "IsolationForest",
    "NeighborIndex",
    "PairSet",
    "ScoredInstance",
    "SiameseMetric",
    "TtadConfig",
    "UnitIntervalScaler",
    "aggregate",
    "load_csv",
    "make_pairs",
    "roc_auc",
    "run_cv",
    "stratified_folds",
    "sweep",
    "ttad_predict",
    "__version__",
]
