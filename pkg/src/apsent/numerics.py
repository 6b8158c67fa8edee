"""Numeric foundations: distance kernels, the seeded generator and the dense cache format.

Dense matrices are plain ``float64`` numpy arrays of shape ``(rows, cols)``;
sparse TF-IDF matrices are ``scipy.sparse.csr_matrix`` with sorted indices and
no stored zeros (see :mod:`apsent.features`).

Random numbers come from :class:`SeededRng`, a SplitMix64 generator.  The
recipe is spelled out in ``docs/rng.md`` so the streams can be reproduced
bit-for-bit from any language.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .errors import DimensionError, EmptyInputError, ParseError

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def as_dense(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got {X.ndim} dimensions")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix contains NaN or Inf")
    return X


def squared_euclidean(a, b) -> float:
    """Return the squared Euclidean distance between two vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.size} vs {b.size}")
    d = a - b
    return float(np.sum(d * d))


def pairwise_sq_distances(X) -> np.ndarray:
    """All pairwise squared Euclidean distances between the rows of ``X``.

    Each row of the result is computed from explicit differences, so every
    entry is bitwise identical to the corresponding :func:`squared_euclidean`
    call: the output is exactly symmetric with an exactly zero diagonal.
    """
    X = as_dense(X)
    n = X.shape[0]
    if n == 0:
        raise EmptyInputError("pairwise distances of an empty matrix")
    D = np.empty((n, n), dtype=np.float64)
    diff = np.empty_like(X)
    for i in range(n):
        np.subtract(X, X[i], out=diff)
        np.multiply(diff, diff, out=diff)
        D[i] = diff.sum(axis=1)
    return D


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


class SeededRng:
    """SplitMix64 stream with a few derived helpers.

    The state is a single 64-bit word.  Each draw adds the golden-ratio
    increment ``0x9E3779B97F4A7C15`` to the state and returns the mixed value
    (see ``docs/rng.md``).  Unit floats use the top 53 bits.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return _mix(self.state)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection of the top partial block."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def shuffle(self, items: list) -> list:
        """Fisher-Yates shuffle in place, from the last position down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def sample(self, n: int, k: int) -> list[int]:
        """``k`` distinct indices from ``range(n)`` via a partial forward Fisher-Yates."""
        if not 0 <= k <= n:
            raise ValueError(f"cannot sample {k} of {n}")
        pool = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]

    def u64_block(self, m: int) -> np.ndarray:
        """Next ``m`` outputs as a ``uint64`` array, identical to ``m`` calls of next_u64."""
        steps = np.arange(1, m + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + m * GAMMA) & MASK64
        return z

    def random_block(self, m: int) -> np.ndarray:
        return (self.u64_block(m) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal_block(self, m: int) -> np.ndarray:
        """Standard normals by Box-Muller, two uniforms per value (cosine branch only)."""
        u = self.random_block(2 * m).reshape(m, 2)
        return np.sqrt(-2.0 * np.log(1.0 - u[:, 0])) * np.cos(2.0 * math.pi * u[:, 1])


# dense cache: b"APCM", u8 version, u64 rows, u64 cols, rows*cols f64, all little-endian
DENSE_MAGIC = b"APCM"
DENSE_VERSION = 1


def write_dense(path, X) -> None:
    X = as_dense(X)
    rows, cols = X.shape
    with open(path, "wb") as fh:
        fh.write(DENSE_MAGIC)
        fh.write(struct.pack("<BQQ", DENSE_VERSION, rows, cols))
        fh.write(np.ascontiguousarray(X, dtype="<f8").tobytes())


def read_dense(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if data[:4] != DENSE_MAGIC:
        raise ParseError(f"{path}: not a dense cache file")
    version, rows, cols = struct.unpack_from("<BQQ", data, 4)
    if version != DENSE_VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    body = data[4 + 17:]
    if len(body) != rows * cols * 8:
        raise ParseError(f"{path}: truncated payload")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(rows, cols)
