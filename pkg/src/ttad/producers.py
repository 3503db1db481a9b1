"""Augmentation producers: synthesize T variants of a test instance.

Three strategies over the instance's selected neighbor subset:

* k-Means centroids -- Lloyd's algorithm with k-means++ seeding, one
  cluster per requested augmentation; the converged centroids are the
  augmentations.
* SMOTE interpolation -- each augmentation is instance + lambda * (x_k -
  instance) for a uniformly drawn neighbor x_k and lambda ~ U[0, 1].
* Gaussian noise -- the baseline; adds i.i.d. noise to copies of the
  instance and clamps to [0, 1].

All producers are pure functions of (inputs, seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PRODUCER_TAGS = ("kmeans", "smote", "gaussian")
SMOTE_FORMS = ("signed", "abs")


@dataclass(frozen=True)
class AugmentationBatch:
    rows: np.ndarray  # (n_augments, n_dims)
    producer: str
    source_id: int
    seed: int

    def __post_init__(self):
        if not np.isfinite(self.rows).all():
            raise ValueError("augmentations contain non-finite values")


def _kmeans_plus_plus(points: np.ndarray, n_clusters: int,
                      rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((n_clusters, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, n_clusters):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:  # every point coincides with a chosen centroid
            idx = rng.integers(n)
        centroids[c] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _assign(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return d2.argmin(axis=1)  # ties go to the lower centroid index


def _repair_empty(points: np.ndarray, centroids: np.ndarray,
                  assign: np.ndarray) -> np.ndarray:
    """Re-seed each empty cluster with the point farthest from its centroid.

    Only points from clusters that keep at least two members are eligible,
    so a repair never empties another cluster.
    """
    n_clusters = centroids.shape[0]
    counts = np.bincount(assign, minlength=n_clusters)
    for c in np.flatnonzero(counts == 0):
        eligible = counts[assign] >= 2
        dist = ((points - centroids[assign]) ** 2).sum(axis=1)
        dist[~eligible] = -np.inf
        far = int(dist.argmax())
        centroids[c] = points[far]
        counts[assign[far]] -= 1
        assign[far] = c
        counts[c] = 1
    return assign


def lloyd_kmeans(points, n_clusters: int, seed: int, max_iter: int = 100,
                 tol: float = 1e-4):
    """k-means++ seeded Lloyd iteration; returns (centroids, assignment).

    The main loop stops once the largest centroid shift is within tol; a
    stabilization pass then re-iterates (same budget) until the assignment
    stops changing, so every returned centroid is exactly the mean of its
    assigned points.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty 2-d matrix")
    if not 1 <= n_clusters <= points.shape[0]:
        raise ValueError("n_clusters must be between 1 and the number of points")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    centroids = _kmeans_plus_plus(points, n_clusters, rng)

    def means_of(assign):
        return np.stack(
            [points[assign == c].mean(axis=0) for c in range(n_clusters)]
        )

    assign = _repair_empty(points, centroids, _assign(points, centroids))
    for _ in range(max_iter):
        new_centroids = means_of(assign)
        shift = np.linalg.norm(new_centroids - centroids, axis=1).max()
        centroids = new_centroids
        assign = _repair_empty(points, centroids, _assign(points, centroids))
        if shift <= tol:
            break
    for _ in range(max_iter):
        centroids = means_of(assign)
        new_assign = _repair_empty(points, centroids, _assign(points, centroids))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return centroids, assign


def kmeans_produce(subset, n_augments: int, seed: int,
                   source_id: int = -1) -> AugmentationBatch:
    """Cluster the neighbor subset into n_augments groups; emit the centroids."""
    subset = np.asarray(subset, dtype=np.float64)
    if subset.ndim != 2 or subset.shape[0] == 0:
        raise ValueError("subset must be a nonempty 2-d matrix")
    if n_augments < 1:
        raise ValueError("need at least one augmentation")
    if n_augments > subset.shape[0]:
        raise ValueError(
            f"cannot form {n_augments} clusters from {subset.shape[0]} neighbors"
        )
    centroids, _ = lloyd_kmeans(subset, n_augments, seed)
    return AugmentationBatch(centroids, "kmeans", source_id, seed)


def interpolate(instance: np.ndarray, neighbor: np.ndarray, lam: float,
                form: str = "signed") -> np.ndarray:
    """One SMOTE step from instance toward neighbor with mixing weight lam.

    The signed form interpolates on the segment between the two points,
    instance + lam * (neighbor - instance), computed as the affine
    combination so lam = 0 and lam = 1 reproduce the endpoints exactly.
    The abs form applies the offset lam * |instance - neighbor| instead.
    """
    if form == "signed":
        return (1.0 - lam) * instance + lam * neighbor
    if form == "abs":
        return instance + lam * np.abs(instance - neighbor)
    raise ValueError(f"unknown SMOTE form {form!r}")


def smote_produce(instance, subset, n_augments: int, seed: int,
                  form: str = "signed", source_id: int = -1) -> AugmentationBatch:
    """Interpolate n_augments points between the instance and random neighbors.

    Per augmentation, in order: draw the neighbor index, then lambda.
    """
    instance = np.asarray(instance, dtype=np.float64).ravel()
    subset = np.asarray(subset, dtype=np.float64)
    if subset.ndim != 2 or subset.shape[0] == 0:
        raise ValueError("subset must be a nonempty 2-d matrix")
    if subset.shape[1] != instance.shape[0]:
        raise ValueError("subset width does not match the instance")
    if form not in SMOTE_FORMS:
        raise ValueError(f"unknown SMOTE form {form!r}")
    if n_augments < 1:
        raise ValueError("need at least one augmentation")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    rows = np.empty((n_augments, instance.shape[0]))
    for t in range(n_augments):
        neighbor = subset[rng.integers(subset.shape[0])]
        lam = rng.uniform()
        rows[t] = interpolate(instance, neighbor, lam, form)
    return AugmentationBatch(rows, "smote", source_id, seed)


def gaussian_produce(instance, n_augments: int, sigma: float, seed: int,
                     source_id: int = -1) -> AugmentationBatch:
    """Noisy copies of the instance, clamped to the unit interval."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if n_augments < 1:
        raise ValueError("need at least one augmentation")
    instance = np.asarray(instance, dtype=np.float64).ravel()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    noise = rng.normal(0.0, sigma, size=(n_augments, instance.shape[0]))
    rows = np.clip(instance + noise, 0.0, 1.0)
    return AugmentationBatch(rows, "gaussian", source_id, seed)
