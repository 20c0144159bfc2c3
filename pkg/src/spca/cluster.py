"""k-means on component columns and partition scoring (accuracy, NMI).

Points are stored column-wise, matching the layout of ``V``. For unit-norm
columns the squared Euclidean distance is ``2 - 2 cos(angle)``, so ordinary
Lloyd iterations on ``V`` rank partitions exactly as cosine dissimilarity
would.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from spca._rng import stream
from spca.errors import DimensionError

UNIT_TOL = 1e-8


class KMeansResult(NamedTuple):
    labels: np.ndarray
    centers: np.ndarray
    objective: float
    # within-cluster SSE after each assignment step of the winning restart
    history: tuple[float, ...]
    restart: int


class ClusterScores(NamedTuple):
    acc: float
    nmi: float


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # (n, k) squared distances; points d x n, centers d x k
    d = (
        np.sum(points**2, axis=0)[:, None]
        - 2.0 * points.T @ centers
        + np.sum(centers**2, axis=0)[None, :]
    )
    return np.maximum(d, 0.0)


def _sse(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    diff = points - centers[:, labels]
    return float(np.sum(diff * diff))


def _seed_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[1]
    idx = [int(rng.integers(n))]
    closest = _sq_dists(points, points[:, idx])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        closest = np.minimum(closest, _sq_dists(points, points[:, [nxt]])[:, 0])
    return points[:, idx].copy()


def _fill_empty(points, labels, centers, k):
    """Move the point farthest from its centroid into each empty cluster."""
    counts = np.bincount(labels, minlength=k)
    for c in np.flatnonzero(counts == 0):
        dist = np.sum((points - centers[:, labels]) ** 2, axis=0)
        # never strip a cluster of its only member
        dist[counts[labels] < 2] = -1.0
        j = int(np.argmax(dist))
        counts[labels[j]] -= 1
        labels[j] = c
        counts[c] = 1
        centers[:, c] = points[:, j]
    return labels, centers


def _lloyd(points, k, rng, max_iter):
    centers = _seed_centers(points, k, rng)
    labels = None
    history = []
    for _ in range(max_iter):
        new = np.argmin(_sq_dists(points, centers), axis=1)
        new, centers = _fill_empty(points, new, centers, k)
        history.append(_sse(points, new, centers))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for c in range(k):
            centers[:, c] = points[:, labels == c].mean(axis=1)
    return labels, centers, _sse(points, labels, centers), tuple(history)


def kmeans(points, k: int, restarts: int = 10, seed: int = 0, max_iter: int = 300) -> KMeansResult:
    """Best-of-``restarts`` Lloyd k-means with k-means++ seeding.

    Restart ``i`` draws from substream ``"kmeans/i"`` of ``seed``; the winner
    is the lowest SSE, ties going to the earlier restart.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError(f"points must be 2-D (d x n), got shape {points.shape}")
    n = points.shape[1]
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if n < k:
        raise ValueError(f"need at least k={k} points, got {n}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    best = None
    for i in range(restarts):
        labels, centers, obj, hist = _lloyd(points, k, stream(seed, f"kmeans/{i}"), max_iter)
        if best is None or obj < best.objective:
            best = KMeansResult(labels, centers, obj, hist, i)
    return best


def kmeans_unit_sphere(points, k: int, restarts: int = 10, seed: int = 0) -> np.ndarray:
    """Labels for unit-norm columns (e.g. a fitted ``V``)."""
    points = np.asarray(points, dtype=np.float64)
    norms = np.linalg.norm(points, axis=0)
    bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_TOL)
    if bad.size:
        raise ValueError(f"column {bad[0]} has norm {norms[bad[0]]!r}, expected unit norm")
    return kmeans(points, k, restarts, seed).labels


def _contingency(pred, truth) -> np.ndarray:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.ndim != 1 or truth.ndim != 1:
        raise DimensionError("label vectors must be 1-D")
    if len(pred) != len(truth):
        raise DimensionError(f"label vectors differ in length: {len(pred)} vs {len(truth)}")
    if len(pred) == 0:
        raise ValueError("label vectors are empty")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth) -> float:
    """Fraction matched under the best one-to-one cluster-to-class mapping."""
    table = _contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / table.sum())


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies.

    If either partition has a single cluster the value is 1 when both do
    and 0 otherwise.
    """
    table = _contingency(pred, truth)
    n = int(table.sum())
    hp = _entropy(table.sum(axis=1), n)
    ht = _entropy(table.sum(axis=0), n)
    if hp == 0.0 or ht == 0.0:
        return 1.0 if hp == ht else 0.0
    joint = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    return float(np.clip(mi / np.sqrt(hp * ht), 0.0, 1.0))


def score(pred, truth) -> ClusterScores:
    return ClusterScores(accuracy(pred, truth), nmi(pred, truth))
