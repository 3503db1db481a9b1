import numpy as np
import pytest

from ttad.data import Dataset


def make_cluster_outliers(
    n_normal=500, n_outliers=5, dims=4, outlier_shift=10.0, seed=0, name="synthetic"
) -> Dataset:
    """Tight Gaussian normal cluster plus anomalies shifted by a multiple of
    the cluster's unit spread."""
    rng = np.random.default_rng(seed)
    normal = rng.normal(0.0, 1.0, size=(n_normal, dims))
    outliers = rng.normal(0.0, 1.0, size=(n_outliers, dims)) + outlier_shift
    features = np.vstack([normal, outliers])
    labels = np.array([0] * n_normal + [1] * n_outliers)
    return Dataset(name=name, features=features, labels=labels)


@pytest.fixture(scope="session")
def synthetic_dataset() -> Dataset:
    # sized so every class supports 10-fold stratification
    return make_cluster_outliers(n_normal=480, n_outliers=20, dims=4, seed=7)
