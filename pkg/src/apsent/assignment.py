"""The result record shared by every clustering algorithm."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Assignment:
    algorithm: str
    labels: np.ndarray
    k: int
    n_iter: int = 0
    converged: bool = True
    elapsed_seconds: float = 0.0
    exemplars: np.ndarray | None = None
    centroids: np.ndarray | None = None
    inertia: float | None = None
    net_similarity: float | None = None
    warnings: list[str] = field(default_factory=list)
    history: list[float] = field(default_factory=list)
    merges: list = field(default_factory=list)
    ap_stage: Assignment | None = None

    @property
    def n_points(self) -> int:
        return int(self.labels.shape[0])


def dense_labels(labels) -> np.ndarray:
    """Renumber labels to 0..k'-1 in order of first appearance."""
    labels = np.asarray(labels)
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    return order[inverse].astype(np.int64)
