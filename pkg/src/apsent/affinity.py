"""Affinity Propagation by damped responsibility/availability message passing.

Similarities are negative squared Euclidean distances; the diagonal holds the
preference (median off-diagonal similarity by default).  All three message
matrices are stored densely, so memory grows as ``3 * 8 * n**2`` bytes; see
:func:`check_memory_budget`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .assignment import Assignment
from .errors import ConsistencyError, MemoryBudgetError, ParameterError
from .numerics import SeededRng, as_dense, pairwise_sq_distances

NOISE_SCALE = 1e-12


@dataclass(frozen=True)
class ApParams:
    damping: float = 0.9
    max_iter: int = 500
    convergence_window: int = 15
    preference: str | float = "median"
    seed: int = 0
    perturb: bool = True

    def __post_init__(self):
        if not 0.5 <= self.damping < 1.0:
            raise ParameterError(f"damping must be in [0.5, 1), got {self.damping}")
        if self.max_iter < 1 or self.convergence_window < 1:
            raise ParameterError("max_iter and convergence_window must be >= 1")
        if not (self.preference == "median" or isinstance(self.preference, (int, float))):
            raise ParameterError(f"unknown preference policy {self.preference!r}")


@dataclass
class ApState:
    s: np.ndarray
    r: np.ndarray
    a: np.ndarray
    preference: float
    iteration: int = 0
    X: np.ndarray | None = None
    _work: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.s.shape[0]

    def scratch(self) -> np.ndarray:
        if self._work is None:
            self._work = np.empty_like(self.s)
        return self._work


def ap_memory_bytes(n: int) -> int:
    return 3 * 8 * n * n


def check_memory_budget(n: int, budget_mb: float) -> None:
    need = ap_memory_bytes(n)
    if need > budget_mb * 1024 * 1024:
        raise MemoryBudgetError(
            f"affinity propagation on {n} points needs {need / 2**20:.0f} MiB for its message "
            f"matrices, over the {budget_mb:.0f} MiB budget; use --sample to cluster a subset"
        )


def _upper_triangle(S):
    n = S.shape[0]
    out = np.empty(n * (n - 1) // 2)
    pos = 0
    for i in range(n - 1):
        row = S[i, i + 1:]
        out[pos:pos + row.size] = row
        pos += row.size
    return out


def similarity_matrix(X, policy="median", seed: int = 0, perturb: bool = True) -> ApState:
    """Initial message state for the rows of ``X``.

    With ``policy="median"`` the preference is the median of the ``n(n-1)``
    off-diagonal similarities; a number sets it directly.  When ``perturb``
    is on, every off-diagonal entry gets uniform noise of at most ``1e-12``
    times the similarity range, drawn row-major from ``SeededRng(seed)``.
    """
    X = as_dense(X)
    n = X.shape[0]
    if n < 2:
        raise ParameterError("affinity propagation needs at least two points")
    S = pairwise_sq_distances(X)
    np.negative(S, out=S)
    # S is exactly symmetric, so the upper triangle has the same median as all off-diagonals
    upper = _upper_triangle(S)
    if policy == "median":
        pref = float(np.median(upper))
    else:
        pref = float(policy)
    if perturb:
        spread = float(upper.max() - upper.min())
        scale = NOISE_SCALE * spread if spread > 0 else NOISE_SCALE
        rng = SeededRng(seed)
        for i in range(n):
            S[i] += scale * rng.random_block(n)
    del upper
    np.fill_diagonal(S, pref)
    return ApState(S, np.zeros_like(S), np.zeros_like(S), pref, X=X)


def update_responsibilities(state: ApState, damping: float) -> ApState:
    """r(i,k) <- damping * r(i,k) + (1 - damping) * (s(i,k) - max_{k' != k} [a(i,k') + s(i,k')])."""
    S, R = state.s, state.r
    n = state.n
    rows = np.arange(n)
    tmp = state.scratch()
    np.add(state.a, S, out=tmp)
    top = np.argmax(tmp, axis=1)
    first = tmp[rows, top].copy()
    tmp[rows, top] = -np.inf
    second = tmp.max(axis=1)
    np.subtract(S, first[:, None], out=tmp)
    tmp[rows, top] = S[rows, top] - second
    if damping != 1.0:
        tmp *= 1.0 - damping
        R *= damping
        R += tmp
    return state


def update_availabilities(state: ApState, damping: float) -> ApState:
    """Availability update with damping.

    a(i,k) = min(0, r(k,k) + sum_{i' not in {i,k}} max(0, r(i',k))) for i != k, and
    a(k,k) = sum_{i' != k} max(0, r(i',k)).
    """
    R, A = state.r, state.a
    tmp = state.scratch()
    np.maximum(R, 0.0, out=tmp)
    diag_r = np.diagonal(R).copy()
    np.fill_diagonal(tmp, diag_r)
    colsum = tmp.sum(axis=0)
    np.subtract(colsum[None, :], tmp, out=tmp)
    self_avail = np.diagonal(tmp).copy()
    np.minimum(tmp, 0.0, out=tmp)
    np.fill_diagonal(tmp, self_avail)
    if damping != 1.0:
        tmp *= 1.0 - damping
        A *= damping
        A += tmp
    return state


def exemplar_set(state: ApState) -> np.ndarray:
    return np.flatnonzero(np.diagonal(state.r) + np.diagonal(state.a) > 0)


def _labels_for(state: ApState, exemplars):
    labels = np.argmax(state.s[:, exemplars], axis=1)
    labels[exemplars] = np.arange(exemplars.size)
    return labels.astype(np.int64)


def net_similarity(labels, exemplars, state: ApState) -> float:
    """Sum of s(i, exemplar(i)) over non-exemplars plus the preference of every exemplar.

    Similarities are recomputed from the unperturbed data when the state
    still carries it, so the value is exactly the clustering objective.
    """
    labels = np.asarray(labels)
    exemplars = np.asarray(exemplars)
    is_ex = np.zeros(labels.shape[0], dtype=bool)
    is_ex[exemplars] = True
    total = state.preference * exemplars.size
    for i in np.flatnonzero(~is_ex):
        lab = int(labels[i])
        if not 0 <= lab < exemplars.size:
            raise ConsistencyError(f"point {i} has label {lab} with no exemplar")
        e = int(exemplars[lab])
        if state.X is not None:
            d = state.X[i] - state.X[e]
            total -= float(np.sum(d * d))
        else:
            total += float(state.s[i, e])
    for c, e in enumerate(exemplars):
        if labels[e] != c:
            raise ConsistencyError(f"exemplar {e} is not labelled with its own cluster")
    return float(total)


def ap_fit(X, params: ApParams | None = None) -> Assignment:
    """Run affinity propagation to convergence or ``max_iter``.

    Converged means the exemplar set ``{k : r(k,k) + a(k,k) > 0}`` was
    non-empty and identical for ``convergence_window`` consecutive
    iterations.  Clusters are numbered by ascending exemplar index; each
    non-exemplar joins its most similar exemplar (ties to the lower index).
    """
    params = params or ApParams()
    start = time.perf_counter()
    state = similarity_matrix(X, params.preference, params.seed, params.perturb)
    lam = params.damping
    previous = None
    stable = 0
    converged = False
    for it in range(1, params.max_iter + 1):
        update_responsibilities(state, lam)
        update_availabilities(state, lam)
        state.iteration = it
        E = exemplar_set(state)
        if previous is not None and np.array_equal(E, previous):
            stable += 1
        else:
            stable = 1
        previous = E
        if E.size and stable >= params.convergence_window:
            converged = True
            break
    warnings = []
    E = exemplar_set(state)
    if E.size == 0:
        E = np.array([int(np.argmax(np.diagonal(state.r) + np.diagonal(state.a)))])
        warnings.append("no exemplar emerged; fell back to the best self-evidence point")
    if not converged:
        warnings.append(f"did not converge in {params.max_iter} iterations")
    labels = _labels_for(state, E)
    out = Assignment("AP", labels, int(E.size), n_iter=state.iteration, converged=converged,
                     exemplars=E, warnings=warnings)
    out.net_similarity = net_similarity(labels, E, state)
    state._work = None
    out.elapsed_seconds = time.perf_counter() - start
    return out
