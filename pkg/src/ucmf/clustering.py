"""Tag-interest vectors and K-means user clustering.

A user's interest vector counts, per tag, how many of their training
items carry that tag; rows are L1-normalized so heavy and light raters
are comparable. Users are then partitioned by seeded Lloyd iterations
with an improvement-based stopping rule and empty-cluster repair.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ucmf.ingest import RatingDataset, TagCatalog


@dataclass
class InterestMatrix:
    """Per-user tag-count matrix and its L1-row-normalized form.

    ``raw[i, h]`` = number of training items rated by user i that carry
    tag h. ``normalized`` divides each nonzero row by its sum; all-zero
    rows stay zero. ``n_zero_rows`` counts users with no tagged items.
    """

    raw: np.ndarray
    normalized: np.ndarray
    n_zero_rows: int

    @property
    def n_users(self):
        return self.raw.shape[0]

    @property
    def n_tags(self):
        return self.raw.shape[1]


@dataclass(frozen=True)
class ClusteringConfig:
    """K-means settings: cluster count, stopping threshold, cap, seed."""

    k: int
    theta0: float = 1e-6
    max_iterations: int = 300
    seed: int = 0

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.theta0 <= 0:
            raise ValueError(f"theta0 must be positive, got {self.theta0}")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")


@dataclass
class ClusterAssignment:
    """Result of K-means: labels, centroids, final distortion, trace.

    ``distortion_trace`` holds the distortion after each full iteration;
    it is non-increasing. Every cluster has at least one member.
    """

    labels: np.ndarray
    centroids: np.ndarray
    distortion: float
    iterations_run: int
    distortion_trace: list = field(default_factory=list)

    @property
    def k(self):
        return self.centroids.shape[0]

    def members(self, p):
        return np.flatnonzero(self.labels == p)


def build_interest_matrix(train: RatingDataset, tags: TagCatalog) -> InterestMatrix:
    """Count each user's training items per tag and L1-normalize rows."""
    incidence = tags.incidence(train.n_items)
    binary = train.to_csr().copy()
    binary.data = np.ones_like(binary.data)
    raw = np.asarray((binary @ incidence).todense(), dtype=np.float64)
    sums = raw.sum(axis=1, keepdims=True)
    normalized = np.divide(raw, sums, out=np.zeros_like(raw), where=sums > 0)
    return InterestMatrix(
        raw=raw,
        normalized=normalized,
        n_zero_rows=int((sums == 0).sum()),
    )


def _sq_distances(points, centroids):
    """All-pairs squared Euclidean distances, points x centroids."""
    d = (
        (points ** 2).sum(axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + (centroids ** 2).sum(axis=1)[None, :]
    )
    np.maximum(d, 0.0, out=d)
    return d


def _assign_with_repair(points, centroids):
    """Assignment step; empty clusters are reseeded to their farthest row.

    Returns labels covering every cluster, mutating ``centroids`` when a
    repair was needed.
    """
    k = centroids.shape[0]
    for _ in range(k + 1):
        d = _sq_distances(points, centroids)
        labels = np.argmin(d, axis=1)  # ties -> lowest cluster index
        empty = [p for p in range(k) if not np.any(labels == p)]
        if not empty:
            return labels
        taken = set()
        for p in empty:
            order = np.argsort(-d[:, p], kind="stable")
            row = next(int(r) for r in order if int(r) not in taken)
            taken.add(row)
            centroids[p] = points[row]
    raise RuntimeError("empty-cluster repair did not converge")


def _distortion(points, centroids, labels):
    diff = points - centroids[labels]
    return float((diff ** 2).sum())


def kmeans(interest: InterestMatrix, config: ClusteringConfig) -> ClusterAssignment:
    """Partition users into ``config.k`` clusters on the normalized rows.

    Lloyd iterations stop when the distortion improves by less than
    ``theta0`` or after ``max_iterations``. Deterministic in the seed:
    centroids start from k distinct random rows.
    """
    points = interest.normalized
    n = points.shape[0]
    k = config.k
    if k > n:
        raise ValueError(f"k={k} exceeds the number of users {n}")
    rng = np.random.default_rng(config.seed)
    centroids = points[rng.choice(n, size=k, replace=False)].copy()

    labels = _assign_with_repair(points, centroids)
    prev_j = _distortion(points, centroids, labels)
    trace = []
    iterations = 0
    for _ in range(config.max_iterations):
        iterations += 1
        labels = _assign_with_repair(points, centroids)
        for p in range(k):
            centroids[p] = points[labels == p].mean(axis=0)
        j = _distortion(points, centroids, labels)
        trace.append(j)
        if prev_j - j < config.theta0:
            break
        prev_j = j
    # final assignment so labels are a fixed point of the returned centroids
    labels = _assign_with_repair(points, centroids)
    j = _distortion(points, centroids, labels)
    trace.append(j)
    return ClusterAssignment(
        labels=labels,
        centroids=centroids,
        distortion=j,
        iterations_run=iterations,
        distortion_trace=trace,
    )


class UserKMeans(BaseEstimator):
    """Estimator wrapper around :func:`kmeans`.

    fit(X) takes the normalized interest rows (or any 2-D array) and sets
    ``labels_``, ``cluster_centers_``, ``inertia_``, ``n_iter_``.
    """

    def __init__(self, k=5, theta0=1e-6, max_iterations=300, seed=0):
        self.k = k
        self.theta0 = theta0
        self.max_iterations = max_iterations
        self.seed = seed

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError("X must be 2-dimensional")
        interest = InterestMatrix(raw=X, normalized=X, n_zero_rows=0)
        result = kmeans(
            interest,
            ClusteringConfig(
                k=self.k,
                theta0=self.theta0,
                max_iterations=self.max_iterations,
                seed=self.seed,
            ),
        )
        self.labels_ = result.labels
        self.cluster_centers_ = result.centroids
        self.inertia_ = result.distortion
        self.n_iter_ = result.iterations_run
        self.assignment_ = result
        return self

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.argmin(_sq_distances(X, self.cluster_centers_), axis=1)
