"""Agglomerative clustering and the AP -> AHC refinement pipeline."""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .affinity import ApParams, ap_fit
from .assignment import Assignment
from .errors import ParameterError
from .numerics import as_dense, pairwise_sq_distances

LINKAGES = ("average", "complete", "single")


@dataclass(frozen=True)
class MergeStep:
    left: int
    right: int
    distance: float
    new_id: int
    size: int


@dataclass(frozen=True)
class AhcParams:
    linkage: str = "average"
    target_k: int = 3

    def __post_init__(self):
        if self.linkage not in LINKAGES:
            raise ParameterError(f"unknown linkage {self.linkage!r}")
        if self.target_k < 1:
            raise ParameterError("target_k must be >= 1")


def ahc_fit(points, params: AhcParams | None = None):
    """Merge clusters bottom-up until ``target_k`` remain.

    Distances between points are squared Euclidean.  Cluster ids follow the
    usual dendrogram convention: points are ``0..n-1`` and the i-th merge
    creates id ``n + i``.  Among equally close pairs the one with the
    smallest ``(left id, right id)`` is merged first.  Final labels are
    numbered by each cluster's smallest member index.

    Returns ``(merges, labels)``.
    """
    params = params or AhcParams()
    X = as_dense(points)
    n = X.shape[0]
    if n < params.target_k:
        raise ParameterError(f"cannot form {params.target_k} clusters from {n} points")
    M = pairwise_sq_distances(X)
    np.fill_diagonal(M, np.inf)
    slot_id = np.arange(n)
    sizes = np.ones(n, dtype=np.int64)
    members = {i: [i] for i in range(n)}
    active = np.ones(n, dtype=bool)
    merges: list[MergeStep] = []
    next_id = n
    for _ in range(n - params.target_k):
        best = M.min()
        hits = np.argwhere(M == best)
        # each symmetric hit appears twice; keep the lexicographically smallest id pair
        pairs = sorted(
            (min(slot_id[a], slot_id[b]), max(slot_id[a], slot_id[b]), int(a), int(b))
            for a, b in hits
        )
        left_id, right_id, a, b = pairs[0]
        if slot_id[a] != left_id:
            a, b = b, a
        na, nb = sizes[a], sizes[b]
        if params.linkage == "average":
            row = (na * M[a] + nb * M[b]) / (na + nb)
        elif params.linkage == "complete":
            row = np.maximum(M[a], M[b])
        else:
            row = np.minimum(M[a], M[b])
        row[~active] = np.inf
        row[a] = row[b] = np.inf
        M[a, :] = row
        M[:, a] = row
        M[b, :] = np.inf
        M[:, b] = np.inf
        active[b] = False
        members[a] = members[a] + members.pop(b)
        sizes[a] = na + nb
        merges.append(MergeStep(int(left_id), int(right_id), float(best), next_id, int(na + nb)))
        slot_id[a] = next_id
        next_id += 1
    clusters = sorted(members.values(), key=min)
    labels = np.empty(n, dtype=np.int64)
    for c, idx in enumerate(clusters):
        labels[idx] = c
    return merges, labels


def write_merges_csv(merges, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "left", "right", "distance", "size"])
        for i, m in enumerate(merges):
            w.writerow([i, m.left, m.right, repr(m.distance), m.size])


def ap_ahc_pipeline(X, ap_params: ApParams | None = None, ahc_params: AhcParams | None = None,
                    ap_result: Assignment | None = None) -> Assignment:
    """Affinity propagation followed by agglomerative merging of its exemplars.

    Every document inherits the super-cluster of its AP exemplar, so AP
    clusters are never split.  If AP finds fewer than ``target_k``
    exemplars its labels are returned unchanged with a warning.  A finished
    AP run can be passed as ``ap_result`` to skip the first stage; its time
    still counts towards ``elapsed_seconds``.
    """
    ahc_params = ahc_params or AhcParams()
    X = as_dense(X)
    if X.shape[0] < ahc_params.target_k:
        raise ParameterError(f"need at least {ahc_params.target_k} rows")
    ap = ap_result if ap_result is not None else ap_fit(X, ap_params)
    start = time.perf_counter()
    E = ap.exemplars
    warnings = list(ap.warnings)
    merges = []
    if E.size < ahc_params.target_k:
        labels = ap.labels.copy()
        k = int(E.size)
        warnings.append(f"AP found {E.size} exemplars, fewer than target_k={ahc_params.target_k}")
    else:
        merges, super_labels = ahc_fit(X[E], ahc_params)
        labels = super_labels[ap.labels]
        k = ahc_params.target_k
    out = Assignment("APAHC", labels, k, n_iter=ap.n_iter, converged=ap.converged,
                     exemplars=E.copy(), net_similarity=ap.net_similarity, warnings=warnings,
                     merges=merges, ap_stage=ap)
    out.elapsed_seconds = ap.elapsed_seconds + (time.perf_counter() - start)
    return out
