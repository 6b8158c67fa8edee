"""Lloyd's K-means with uniform random initialisation."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .assignment import Assignment
from .errors import DimensionError, ParameterError
from .numerics import SeededRng, as_dense


@dataclass(frozen=True)
class KMeansParams:
    k: int = 3
    max_iter: int = 300
    tol: float = 1e-6
    seed: int = 0
    restarts: int = 1


def _sq_dists_to(X, centroids):
    D = np.empty((X.shape[0], centroids.shape[0]))
    diff = np.empty_like(X)
    for c in range(centroids.shape[0]):
        np.subtract(X, centroids[c], out=diff)
        np.multiply(diff, diff, out=diff)
        D[:, c] = diff.sum(axis=1)
    return D


def assign_points(X, centroids) -> np.ndarray:
    """Index of the nearest centroid for each row; ties go to the lowest index."""
    X = as_dense(X)
    centroids = np.atleast_2d(np.asarray(centroids, dtype=np.float64))
    if centroids.shape[0] == 0:
        raise ParameterError("no centroids")
    if centroids.shape[1] != X.shape[1]:
        raise DimensionError(f"centroids have {centroids.shape[1]} columns, data {X.shape[1]}")
    return np.argmin(_sq_dists_to(X, centroids), axis=1)


def update_centroids(X, labels, k: int) -> np.ndarray:
    """Cluster means; empty clusters are reseeded to the point farthest from its nearest centroid.

    Reseeding happens in cluster order.  Distances are measured to the
    non-empty means plus any centroids already reseeded in this call; ties go
    to the lowest point index.
    """
    X = as_dense(X)
    labels = np.asarray(labels)
    centroids = np.zeros((k, X.shape[1]))
    counts = np.bincount(labels, minlength=k)
    np.add.at(centroids, labels, X)
    filled = counts > 0
    centroids[filled] /= counts[filled, None]
    empty = np.flatnonzero(~filled)
    if empty.size:
        placed = list(np.flatnonzero(filled))
        for c in empty:
            if placed:
                nearest = _sq_dists_to(X, centroids[placed]).min(axis=1)
                far = int(np.argmax(nearest))
            else:
                far = 0
            centroids[c] = X[far]
            placed.append(c)
    return centroids


def _inertia(X, labels, centroids):
    diff = X - centroids[labels]
    return float(np.sum(diff * diff))


def _lloyd(X, init, params, scale):
    centroids = X[init].copy()
    history = []
    converged = False
    n_iter = 0
    for n_iter in range(1, params.max_iter + 1):
        labels = assign_points(X, centroids)
        history.append(_inertia(X, labels, centroids))
        new = update_centroids(X, labels, params.k)
        shift = float(np.max(np.sum((new - centroids) ** 2, axis=1)))
        centroids = new
        if shift <= params.tol * scale:
            converged = True
            break
    labels = assign_points(X, centroids)
    inertia = _inertia(X, labels, centroids)
    history.append(inertia)
    return labels, centroids, inertia, n_iter, converged, history


def kmeans_fit(X, params: KMeansParams | None = None) -> Assignment:
    """Best of ``params.restarts`` Lloyd runs by inertia (ties: earliest restart).

    Initial centroids are ``k`` distinct rows drawn uniformly without
    replacement.  A run stops once the largest squared centroid shift is at
    most ``tol`` times the mean per-column variance of ``X`` (so ``tol=0``
    means the centroids stopped changing), or after ``max_iter`` iterations.
    """
    params = params or KMeansParams()
    X = as_dense(X)
    n = X.shape[0]
    if params.k < 1 or n < params.k:
        raise ParameterError(f"k={params.k} needs at least k rows, got {n}")
    if params.restarts < 1:
        raise ParameterError("restarts must be >= 1")
    start = time.perf_counter()
    scale = float(np.mean(np.var(X, axis=0)))
    rng = SeededRng(params.seed)
    best = None
    for _ in range(params.restarts):
        run = _lloyd(X, rng.sample(n, params.k), params, scale)
        if best is None or run[2] < best[2]:
            best = run
    labels, centroids, inertia, n_iter, converged, history = best
    out = Assignment("KMeans", labels.astype(np.int64), params.k, n_iter=n_iter,
                     converged=converged, inertia=inertia, history=history,
                     centroids=centroids)
    out.elapsed_seconds = time.perf_counter() - start
    return out
