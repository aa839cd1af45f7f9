"""Training-set reduction: random sampling, target binning, mini-batch k-means.

All three methods take a requested instance count ``m`` and produce a smaller
training set: sampling and k-means return exactly ``m`` rows, binning at most
``m`` (empty bins yield nothing). Reduction is deterministic for a fixed
seed. K-means operates on the joint feature/target space, so the input is
expected to be z-score normalized; Lloyd's algorithm is provided as the
batch-exact reference for mini-batch k-means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_generator, check_count, check_matrix, check_X_y
from .dataset import Dataset

__all__ = [
    "REDUCTION_METHODS",
    "ReductionSpec",
    "CentroidSet",
    "random_sample",
    "bin_reduce",
    "minibatch_kmeans",
    "lloyd_kmeans",
    "kmeans_reduce",
    "reduce_dataset",
    "RandomSampleReducer",
    "BinningReducer",
    "KMeansReducer",
]

REDUCTION_METHODS = ("sampling", "binning", "kmeans")


@dataclass(frozen=True)
class ReductionSpec:
    """Which reduction method to run and with what parameters.

    ``kmeans_iterations=None`` means the default of 100 iterations per
    centroid. The k-means fields are ignored by the other methods.
    """

    method: str
    target_count: int
    kmeans_batch_size: int = 100
    kmeans_iterations: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in REDUCTION_METHODS:
            raise ValueError(
                f"method must be one of {REDUCTION_METHODS}, got {self.method!r}"
            )
        check_count(self.target_count, "target_count")
        check_count(self.kmeans_batch_size, "kmeans_batch_size")
        if self.kmeans_iterations is not None:
            check_count(self.kmeans_iterations, "kmeans_iterations")


@dataclass(frozen=True)
class CentroidSet:
    """K-means output: centroid coordinates plus full-data assignment counts."""

    centroids: np.ndarray
    counts: np.ndarray
    inertia: float

    def __post_init__(self):
        if not np.all(np.isfinite(self.centroids)):
            raise ValueError("centroids must be finite")
        if self.counts.shape[0] != self.centroids.shape[0]:
            raise ValueError("one count per centroid required")


def _check_m(m: int, n_rows: int) -> int:
    m = check_count(m, "m")
    if m > n_rows:
        raise ValueError(f"cannot reduce {n_rows} rows to {m} instances")
    return m


def sample_indices(n_rows: int, m: int, random_state=None) -> np.ndarray:
    """``m`` distinct row indices, uniform without replacement, sampled order."""
    m = _check_m(m, n_rows)
    rng = as_generator(random_state)
    return rng.choice(n_rows, size=m, replace=False)


def random_sample(train: Dataset, m: int, random_state=None) -> Dataset:
    """Uniform sample of ``m`` distinct rows; rows are copied bitwise."""
    return train.take(sample_indices(train.n_rows, m, random_state))


def bin_reduce_arrays(X, y, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Array form of :func:`bin_reduce`."""
    X, y = check_X_y(X, y)
    m = _check_m(m, X.shape[0])
    y_min = float(y.min())
    width = (float(y.max()) - y_min) / m
    if width > 0.0:
        # Top interval is closed on the right so max(y) lands in bin m - 1.
        bins = np.minimum((y - y_min) // width, m - 1).astype(np.intp)
    else:
        bins = np.zeros(y.shape[0], dtype=np.intp)
    X_rows = []
    y_rows = []
    for b in np.unique(bins):
        members = bins == b
        X_rows.append(np.median(X[members], axis=0))
        y_rows.append(np.median(y[members]))
    return np.vstack(X_rows), np.asarray(y_rows)


def bin_reduce(train: Dataset, m: int) -> Dataset:
    """Collapse ``m`` equal-width target intervals to per-feature medians.

    The intervals span [min(target), max(target)]; each non-empty bin becomes
    one instance whose features are the member medians and whose target is
    the median of the member targets. Empty bins are dropped, so the result
    may have fewer than ``m`` rows. Fully deterministic.
    """
    Xr, yr = bin_reduce_arrays(train.X, train.y, m)
    return train.replace(X=Xr, y=yr)


def _sq_distances(points, centers) -> np.ndarray:
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        + np.sum(centers**2, axis=1)[None, :]
        - 2.0 * (points @ centers.T)
    )
    return np.maximum(d2, 0.0)


def _assign(points, centers, chunk: int = 2048) -> tuple[np.ndarray, np.ndarray]:
    """Nearest-centroid labels and squared distances, chunked to bound memory."""
    n = points.shape[0]
    labels = np.empty(n, dtype=np.intp)
    sq = np.empty(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d2 = _sq_distances(points[lo:hi], centers)
        idx = np.argmin(d2, axis=1)
        labels[lo:hi] = idx
        sq[lo:hi] = d2[np.arange(hi - lo), idx]
    return labels, sq


def _init_centers(points, k: int, rng) -> np.ndarray:
    return points[rng.choice(points.shape[0], size=k, replace=False)].copy()


def minibatch_kmeans(
    points,
    k: int,
    batch_size: int = 100,
    iterations: int | None = None,
    random_state=None,
) -> CentroidSet:
    """Mini-batch k-means with per-centroid learning rates.

    Centroids start at ``k`` distinct random points. Each iteration draws
    ``batch_size`` points with replacement, assigns the whole batch to the
    nearest centroids, then moves each centroid toward its batch members with
    learning rate 1/(total assignments so far). Those per-point updates
    telescope into an exact weighted mean, which is how they are applied:
    ``c = (v * c + sum(batch members)) / (v + count)``.

    ``iterations=None`` defaults to ``100 * k``. Deterministic per seed.
    """
    points = check_matrix(points, "points")
    n = points.shape[0]
    k = check_count(k, "k")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    batch_size = check_count(batch_size, "batch_size")
    if iterations is None:
        iterations = 100 * k
    iterations = check_count(iterations, "iterations")
    rng = as_generator(random_state)

    centers = _init_centers(points, k, rng)
    v = np.zeros(k)
    for _ in range(iterations):
        batch = points[rng.integers(0, n, size=batch_size)]
        labels = np.argmin(_sq_distances(batch, centers), axis=1)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        sums = np.zeros_like(centers)
        np.add.at(sums, labels, batch)
        hit = counts > 0
        centers[hit] = (v[hit, None] * centers[hit] + sums[hit]) / (
            v[hit] + counts[hit]
        )[:, None]
        v += counts

    labels, sq = _assign(points, centers)
    return CentroidSet(
        centroids=centers,
        counts=np.bincount(labels, minlength=k),
        inertia=float(sq.sum()),
    )


def lloyd_steps(points, k: int, random_state=None, max_iters: int = 300) -> Iterator:
    """Yield (centers, labels, inertia) per Lloyd iteration.

    The inertia is evaluated for the centers the assignment used, so the
    yielded sequence is non-increasing. Empty clusters are reseeded at the
    point currently farthest from its centroid.
    """
    points = check_matrix(points, "points")
    n = points.shape[0]
    k = check_count(k, "k")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    rng = as_generator(random_state)
    centers = _init_centers(points, k, rng)
    prev_labels = None
    for _ in range(check_count(max_iters, "max_iters")):
        labels, sq = _assign(points, centers)
        yield centers.copy(), labels.copy(), float(sq.sum())
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            return
        prev_labels = labels
        new_centers = centers.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                new_centers[j] = points[labels == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            farthest = np.argsort(sq)[::-1]
            for slot, j in enumerate(empty):
                new_centers[j] = points[farthest[slot]]
        centers = new_centers


def lloyd_kmeans(
    points, k: int, random_state=None, max_iters: int = 300
) -> CentroidSet:
    """Classic batch k-means; the correctness reference for the mini-batch
    variant. Iterates assign/recompute until assignments stabilise or
    ``max_iters`` is hit."""
    centers = labels = None
    for centers, labels, _ in lloyd_steps(points, k, random_state, max_iters):
        pass
    # Final centers are the means of the final assignment.
    points = check_matrix(points, "points")
    counts = np.bincount(labels, minlength=k)
    final = centers.copy()
    for j in range(k):
        if counts[j] > 0:
            final[j] = points[labels == j].mean(axis=0)
    final_labels, sq = _assign(points, final)
    return CentroidSet(
        centroids=final,
        counts=np.bincount(final_labels, minlength=k),
        inertia=float(sq.sum()),
    )


def kmeans_reduce(train: Dataset, m: int, spec: ReductionSpec | None = None) -> Dataset:
    """Mini-batch k-means over the joint (features, target) space.

    Both features and target take part in the Euclidean distance, so the
    input should be normalized; the ``m`` centroids become the new training
    instances.
    """
    m = _check_m(m, train.n_rows)
    if spec is None:
        spec = ReductionSpec(method="kmeans", target_count=m)
    cs = minibatch_kmeans(
        train.joint_matrix(),
        m,
        batch_size=spec.kmeans_batch_size,
        iterations=spec.kmeans_iterations,
        random_state=spec.seed,
    )
    return Dataset.from_joint_matrix(cs.centroids, like=train)


def reduce_dataset(train: Dataset, spec: ReductionSpec) -> Dataset:
    """Dispatch to the method named in ``spec``."""
    if spec.method == "sampling":
        return random_sample(train, spec.target_count, spec.seed)
    if spec.method == "binning":
        return bin_reduce(train, spec.target_count)
    return kmeans_reduce(train, spec.target_count, spec)


class _BaseReducer(BaseEstimator):
    """Resampler-style API: ``fit_resample(X, y) -> (X_reduced, y_reduced)``."""

    def fit_resample(self, X, y):
        X, y = check_X_y(X, y)
        return self._resample(X, y)


class RandomSampleReducer(_BaseReducer):
    """Uniform row sampling without replacement down to ``target_count``."""

    def __init__(self, target_count: int, random_state=None):
        self.target_count = target_count
        self.random_state = random_state

    def _resample(self, X, y):
        idx = sample_indices(X.shape[0], self.target_count, self.random_state)
        return X[idx], y[idx]


class BinningReducer(_BaseReducer):
    """Equal-width target binning collapsed to per-feature medians."""

    def __init__(self, target_count: int):
        self.target_count = target_count

    def _resample(self, X, y):
        return bin_reduce_arrays(X, y, self.target_count)


class KMeansReducer(_BaseReducer):
    """Mini-batch k-means on the joint (X, y) space; centroids become rows.

    After ``fit_resample`` the fitted :class:`CentroidSet` is available as
    ``centroid_set_``.
    """

    def __init__(
        self,
        target_count: int,
        batch_size: int = 100,
        n_iterations: int | None = None,
        random_state=None,
    ):
        self.target_count = target_count
        self.batch_size = batch_size
        self.n_iterations = n_iterations
        self.random_state = random_state

    def _resample(self, X, y):
        cs = minibatch_kmeans(
            np.column_stack([X, y]),
            self.target_count,
            batch_size=self.batch_size,
            iterations=self.n_iterations,
            random_state=self.random_state,
        )
        self.centroid_set_ = cs
        return cs.centroids[:, :-1], cs.centroids[:, -1]
