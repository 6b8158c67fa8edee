"""TF-IDF vectorisation and truncated PCA.

The TF-IDF matrix uses raw term counts, the smoothed inverse document
frequency ``ln((1 + N) / (1 + df)) + 1`` and unit L2 rows.  PCA is computed by
randomized subspace iteration on the implicitly centred matrix, so the sparse
TF-IDF input is never densified.
"""

from __future__ import annotations

import json
import math
import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DimensionError, EmptyInputError, ParameterError, ParseError
from .numerics import SeededRng

OVERSAMPLES = 10
POWER_ITERATIONS = 7


@dataclass(frozen=True)
class Vocabulary:
    terms: tuple[str, ...]
    df: np.ndarray
    n_documents: int

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.terms)})

    def __len__(self):
        return len(self.terms)

    def idf(self) -> np.ndarray:
        return np.log((1.0 + self.n_documents) / (1.0 + self.df)) + 1.0


@dataclass(frozen=True)
class TfidfParams:
    # the only supported convention; kept as a type so callers can record it
    idf: str = "smooth"
    norm: str = "l2"


def _token_lists(corpus):
    if hasattr(corpus, "documents"):
        return [list(d.tokens) for d in corpus.documents]
    return [text.split() for text in corpus]


def build_vocabulary(corpus) -> Vocabulary:
    """Vocabulary over a :class:`~apsent.corpus.Corpus` or a list of whitespace-joined texts."""
    docs = _token_lists(corpus)
    if not docs:
        raise EmptyInputError("cannot build a vocabulary from an empty corpus")
    df = Counter()
    for tokens in docs:
        df.update(set(tokens))
    terms = tuple(sorted(df))
    return Vocabulary(terms, np.array([df[t] for t in terms], dtype=np.int64), len(docs))


def tfidf_transform(corpus, vocab: Vocabulary, params: TfidfParams | None = None) -> sp.csr_matrix:
    """Sparse TF-IDF matrix, one L2-normalised row per document.

    Tokens missing from ``vocab`` are ignored.  Rows without any known token
    stay empty.
    """
    params = params or TfidfParams()
    idf = vocab.idf()
    indptr = [0]
    indices: list[int] = []
    values: list[float] = []
    for tokens in _token_lists(corpus):
        counts = Counter(vocab.index[t] for t in tokens if t in vocab.index)
        cols = sorted(counts)
        row = np.array([counts[c] for c in cols], dtype=np.float64) * idf[cols]
        norm = math.sqrt(float(np.dot(row, row)))
        if norm > 0:
            row /= norm
        indices.extend(cols)
        values.extend(row.tolist())
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.array(values, dtype=np.float64), np.array(indices, dtype=np.int64), np.array(indptr)),
        shape=(len(indptr) - 1, len(vocab)),
    )
    X.has_sorted_indices = True
    return X


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        return self.explained_variance / self.total_variance if self.total_variance > 0 else 0 * self.explained_variance


class _Centered:
    """Products with ``X - 1 mean^T`` without forming it."""

    def __init__(self, X, mean):
        self.X = X
        self.mean = mean
        self.n = X.shape[0]

    def dot(self, M):
        return np.asarray(self.X @ M) - (self.mean @ M)[None, :]

    def tdot(self, N):
        return np.asarray(self.X.T @ N) - np.outer(self.mean, N.sum(axis=0))


def _column_stats(X):
    n = X.shape[0]
    if sp.issparse(X):
        mean = np.asarray(X.sum(axis=0)).ravel() / n
        sq = np.asarray(X.multiply(X).sum(axis=0)).ravel()
    else:
        mean = X.sum(axis=0) / n
        sq = (X * X).sum(axis=0)
    total = float(np.sum(np.maximum(sq - n * mean * mean, 0.0)) / (n - 1))
    return mean, total


def _orth(Y):
    Q, _ = scipy.linalg.qr(Y, mode="economic", check_finite=False)
    return Q


def fit_pca(X, k: int = 100, seed: int = 0) -> PcaModel:
    """Top-``k`` principal directions of ``X`` by randomized subspace iteration.

    Uses ``k + 10`` probe vectors (capped at ``min(rows, cols)``, where the
    result becomes exact) drawn from :class:`SeededRng`, and seven power
    iterations with re-orthonormalisation.  Each component is signed so that
    its largest-magnitude entry is positive.
    """
    if not sp.issparse(X):
        X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if n < 2:
        raise ParameterError("PCA needs at least two rows")
    if not 1 <= k <= min(n - 1, d):
        raise ParameterError(f"k={k} outside [1, {min(n - 1, d)}]")
    mean, total = _column_stats(X)
    A = _Centered(X, mean)
    width = min(k + OVERSAMPLES, n, d)
    omega = SeededRng(seed).normal_block(d * width).reshape(d, width)
    Q = _orth(A.dot(omega))
    for _ in range(POWER_ITERATIONS):
        Q = _orth(A.tdot(Q))
        Q = _orth(A.dot(Q))
    B = A.tdot(Q).T
    _, s, vt = scipy.linalg.svd(B, full_matrices=False, check_finite=False)
    comps = vt[:k].copy()
    pivots = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(k), pivots])
    comps *= signs[:, None]
    return PcaModel(mean, comps, s[:k] ** 2 / (n - 1), total)


def pca_project(model: PcaModel, X) -> np.ndarray:
    if not sp.issparse(X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.mean.shape[0]:
        raise DimensionError(f"expected {model.mean.shape[0]} columns, got {X.shape[1]}")
    ct = model.components.T
    return np.asarray(X @ ct) - (model.mean @ ct)[None, :]


def save_vocabulary(vocab: Vocabulary, path) -> None:
    obj = {
        "n_documents": vocab.n_documents,
        "terms": {t: {"index": i, "df": int(vocab.df[i])} for i, t in enumerate(vocab.terms)},
    }
    Path(path).write_text(json.dumps(obj, ensure_ascii=False) + "\n", encoding="utf-8")


def load_vocabulary(path) -> Vocabulary:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    items = sorted(obj["terms"].items(), key=lambda kv: kv[1]["index"])
    if [v["index"] for _, v in items] != list(range(len(items))):
        raise ParseError(f"{path}: vocabulary indices are not 0..n-1")
    return Vocabulary(tuple(t for t, _ in items),
                      np.array([v["df"] for _, v in items], dtype=np.int64),
                      int(obj["n_documents"]))


# sparse cache: b"APCS", u8 version, u64 rows, u64 cols, rows*u32 row counts,
# then every stored entry as (u32 column, f64 value), little-endian, row order
SPARSE_MAGIC = b"APCS"
SPARSE_VERSION = 1
_PAIR = np.dtype([("col", "<u4"), ("val", "<f8")])


def write_sparse(path, X) -> None:
    X = sp.csr_matrix(X)
    X.sort_indices()
    X.eliminate_zeros()
    rows, cols = X.shape
    pairs = np.empty(X.nnz, dtype=_PAIR)
    pairs["col"] = X.indices
    pairs["val"] = X.data
    with open(path, "wb") as fh:
        fh.write(SPARSE_MAGIC)
        fh.write(struct.pack("<BQQ", SPARSE_VERSION, rows, cols))
        fh.write(np.diff(X.indptr).astype("<u4").tobytes())
        fh.write(pairs.tobytes())


def read_sparse(path) -> sp.csr_matrix:
    data = Path(path).read_bytes()
    if data[:4] != SPARSE_MAGIC:
        raise ParseError(f"{path}: not a sparse cache file")
    version, rows, cols = struct.unpack_from("<BQQ", data, 4)
    if version != SPARSE_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    off = 4 + 17
    counts = np.frombuffer(data, dtype="<u4", count=rows, offset=off).astype(np.int64)
    off += 4 * rows
    nnz = int(counts.sum())
    if len(data) - off != nnz * _PAIR.itemsize:
        raise ParseError(f"{path}: truncated payload")
    pairs = np.frombuffer(data, dtype=_PAIR, count=nnz, offset=off)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    return sp.csr_matrix((pairs["val"].astype(np.float64), pairs["col"].astype(np.int64), indptr),
                         shape=(rows, cols))
