"""Cluster validity indices, timing, the repeated-run benchmark and the two-sample t-test."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .affinity import ApParams, ap_fit
from .errors import DegenerateSampleError, ParameterError, UndefinedMetricError
from .hierarchy import AhcParams, ap_ahc_pipeline
from .kmeans import KMeansParams, kmeans_fit
from .numerics import SeededRng, as_dense, pairwise_sq_distances

H0 = "mean metric value is equal for K-means and AP -> AHC"
H1 = "mean metric value differs between K-means and AP -> AHC (two-sided)"

METRICS = ("silhouette", "calinski_harabasz", "davies_bouldin")


@dataclass
class SilhouetteBreakdown:
    a: np.ndarray
    b: np.ndarray
    s: np.ndarray
    score: float
    indices: np.ndarray


@dataclass
class DispersionBreakdown:
    between: float = 0.0
    within: float = 0.0
    scatter: np.ndarray | None = None
    separations: np.ndarray | None = None
    ratios: np.ndarray | None = None
    perfect: bool = False


def _groups(labels):
    uniq, inverse = np.unique(np.asarray(labels), return_inverse=True)
    return uniq, inverse.astype(np.int64)


def subsample_indices(n: int, size: int | None, seed: int = 0) -> np.ndarray:
    """Sorted uniform sample without replacement; all points when ``size`` is None or >= n."""
    if size is None or size >= n:
        return np.arange(n)
    if size < 2:
        raise ParameterError("metric subsample needs at least 2 points")
    return np.array(sorted(SeededRng(seed).sample(n, size)), dtype=np.int64)


def silhouette(X, labels, subsample: tuple[int, int] | None = None,
               distances=None) -> SilhouetteBreakdown:
    """Mean silhouette width with Euclidean distances.

    ``subsample`` is ``(size, seed)``; distances and cluster memberships are
    then restricted to the sampled points.  ``distances`` may hold the
    precomputed Euclidean distance matrix of the evaluated rows.
    """
    X = as_dense(X)
    labels = np.asarray(labels)
    idx = np.arange(X.shape[0]) if subsample is None else subsample_indices(X.shape[0], *subsample)
    Xs, ls = X[idx], labels[idx]
    uniq, g = _groups(ls)
    k = uniq.size
    if k < 2:
        raise UndefinedMetricError("silhouette needs at least 2 clusters")
    if distances is None:
        D = euclidean_distances(Xs)
    else:
        D = distances
    n = Xs.shape[0]
    sums = np.empty((n, k))
    counts = np.bincount(g, minlength=k)
    for c in range(k):
        sums[:, c] = D[:, g == c].sum(axis=1)
    rows = np.arange(n)
    own = counts[g]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(own > 1, sums[rows, g] / np.maximum(own - 1, 1), 0.0)
        means = sums / counts[None, :]
    means[rows, g] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where((own > 1) & (denom > 0), (b - a) / denom, 0.0)
    return SilhouetteBreakdown(a, b, s, float(s.mean()), idx)


def euclidean_distances(X) -> np.ndarray:
    D = pairwise_sq_distances(X)
    return np.sqrt(D, out=D)


def _centroids(X, g, k):
    counts = np.bincount(g, minlength=k)
    cent = np.zeros((k, X.shape[1]))
    np.add.at(cent, g, X)
    return cent / counts[:, None], counts


def calinski_harabasz(X, labels):
    """Variance ratio criterion; returns ``(score, DispersionBreakdown)``.

    A zero within-cluster dispersion gives ``inf`` with ``perfect=True``.
    """
    X = as_dense(X)
    uniq, g = _groups(labels)
    n, k = X.shape[0], uniq.size
    if not 2 <= k < n:
        raise UndefinedMetricError(f"Calinski-Harabasz needs 2 <= k < n, got k={k}, n={n}")
    cent, counts = _centroids(X, g, k)
    mu = X.mean(axis=0)
    dc = cent - mu
    between = float(np.sum(counts * np.sum(dc * dc, axis=1)))
    diff = X - cent[g]
    within = float(np.sum(diff * diff))
    br = DispersionBreakdown(between, within)
    if within == 0.0:
        br.perfect = True
        return math.inf, br
    return (between / (k - 1)) / (within / (n - k)), br


def davies_bouldin(X, labels):
    """Davies-Bouldin index; returns ``(score, DispersionBreakdown)``."""
    X = as_dense(X)
    uniq, g = _groups(labels)
    k = uniq.size
    if k < 2:
        raise UndefinedMetricError("Davies-Bouldin needs at least 2 clusters")
    cent, counts = _centroids(X, g, k)
    dist = np.sqrt(np.sum((X - cent[g]) ** 2, axis=1))
    scatter = np.bincount(g, weights=dist, minlength=k) / counts
    sep = np.sqrt(pairwise_sq_distances(cent))
    iu = np.triu_indices(k, 1)
    zero = np.flatnonzero(sep[iu] == 0)
    if zero.size:
        i, j = iu[0][zero[0]], iu[1][zero[0]]
        raise UndefinedMetricError(f"clusters {uniq[i]} and {uniq[j]} have coincident centroids")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = (scatter[:, None] + scatter[None, :]) / sep
    np.fill_diagonal(ratios, -np.inf)
    score = float(np.mean(ratios.max(axis=1)))
    np.fill_diagonal(ratios, 0.0)
    return score, DispersionBreakdown(scatter=scatter, separations=sep, ratios=ratios)


def measure(thunk) -> float:
    """Monotonic wall-clock seconds taken by ``thunk()``."""
    return timed(thunk)[1]


def timed(thunk):
    start = time.perf_counter()
    result = thunk()
    return result, time.perf_counter() - start


# ---------------------------------------------------------------- t-test

def _betacf(a, b, x, eps=1e-16, max_iter=10_000):
    # modified Lentz evaluation of the incomplete beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_two_tailed(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc_regularized(df / 2.0, 0.5, df / (df + t * t)))


@dataclass
class TTestResult:
    t: float
    df: float
    p: float
    mean_x: float
    mean_y: float
    var_x: float
    var_y: float
    paired: bool = False
    h0: str = H0
    h1: str = H1


def two_sample_ttest(xs, ys, paired: bool = False) -> TTestResult:
    """Student's pooled-variance t-test (or the paired variant) with a two-tailed p-value."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        raise ParameterError("each sample needs at least 2 values")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ParameterError("samples must be finite")
    mx, my = float(x.mean()), float(y.mean())
    vx, vy = float(x.var(ddof=1)), float(y.var(ddof=1))
    if paired:
        if x.size != y.size:
            raise ParameterError("paired test needs equal sample sizes")
        d = x - y
        df = x.size - 1
        se = math.sqrt(float(d.var(ddof=1)) / x.size)
        num = float(d.mean())
    else:
        df = x.size + y.size - 2
        pooled = ((x.size - 1) * vx + (y.size - 1) * vy) / df
        se = math.sqrt(pooled * (1.0 / x.size + 1.0 / y.size))
        num = mx - my
    if se == 0.0:
        if num == 0.0:
            return TTestResult(0.0, df, 1.0, mx, my, vx, vy, paired)
        raise DegenerateSampleError("zero variance in both samples with different means")
    t = num / se
    p = 1.0 if t == 0.0 else student_t_two_tailed(t, df)
    return TTestResult(t, df, p, mx, my, vx, vy, paired)


# ---------------------------------------------------------------- reports

@dataclass
class MetricsReport:
    algorithm: str
    n_points: int
    n_clusters: int
    elapsed_seconds: float
    silhouette: float | None = None
    calinski_harabasz: float | None = None
    davies_bouldin: float | None = None
    subsample_size: int = 0
    subsample_seed: int | None = None
    subsample_indices: list[int] = field(default_factory=list)
    calinski_harabasz_perfect: bool = False
    undefined: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, obj) -> "MetricsReport":
        return cls(**obj)


def compute_metrics(X, labels, algorithm: str, elapsed_seconds: float = 0.0,
                    sample_size: int | None = 5000, sample_seed: int = 0,
                    indices=None, distances=None) -> MetricsReport:
    """All three indices on one shared subsample (or on explicit ``indices``)."""
    X = as_dense(X)
    labels = np.asarray(labels)
    n = X.shape[0]
    if indices is None:
        indices = subsample_indices(n, sample_size, sample_seed)
    indices = np.asarray(indices, dtype=np.int64)
    Xs, ls = X[indices], labels[indices]
    rep = MetricsReport(algorithm, int(n), int(np.unique(labels).size), float(elapsed_seconds),
                        subsample_size=int(indices.size),
                        subsample_seed=sample_seed if indices.size < n else None,
                        subsample_indices=indices.tolist())
    try:
        rep.silhouette = silhouette(Xs, ls, distances=distances).score
    except UndefinedMetricError as exc:
        rep.undefined["silhouette"] = str(exc)
    try:
        ch, br = calinski_harabasz(Xs, ls)
        rep.calinski_harabasz_perfect = br.perfect
        rep.calinski_harabasz = None if br.perfect else ch
        if br.perfect:
            rep.undefined["calinski_harabasz"] = "zero within-cluster dispersion (perfect)"
    except UndefinedMetricError as exc:
        rep.undefined["calinski_harabasz"] = str(exc)
    try:
        rep.davies_bouldin = davies_bouldin(Xs, ls)[0]
    except UndefinedMetricError as exc:
        rep.undefined["davies_bouldin"] = str(exc)
    return rep


@dataclass
class RunRow:
    run: int
    algorithm: str
    seed: int
    metrics: MetricsReport


@dataclass
class BenchSuite:
    runs: int
    rows: list[RunRow]
    ttests: dict[str, TTestResult | None]
    ttest_errors: dict[str, str] = field(default_factory=dict)
    means: dict[str, dict[str, float | None]] = field(default_factory=dict)
    medians: dict[str, dict[str, float | None]] = field(default_factory=dict)

    def column(self, algorithm: str, metric: str) -> list:
        return [getattr(r.metrics, metric) for r in self.rows if r.algorithm == algorithm]

    def to_dict(self, timing: bool = True) -> dict:
        drop = {"subsample_indices"} | (set() if timing else {"elapsed_seconds"})

        def stats(table):
            return {a: {m: v for m, v in ms.items() if timing or m != "elapsed_seconds"}
                    for a, ms in table.items()}

        return {
            "runs": self.runs,
            "rows": [{"run": r.run, "algorithm": r.algorithm, "seed": r.seed,
                      "metrics": {k: v for k, v in r.metrics.to_dict().items() if k not in drop}}
                     for r in self.rows],
            "ttests": {m: (None if t is None else asdict(t)) for m, t in self.ttests.items()},
            "ttest_errors": self.ttest_errors,
            "means": stats(self.means),
            "medians": stats(self.medians),
        }

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run", "algorithm", "seed", "n_points", "n_clusters", *METRICS]
                   + (["elapsed_seconds"] if timing else []))
        for r in self.rows:
            m = r.metrics
            w.writerow([r.run, r.algorithm, r.seed, m.n_points, m.n_clusters,
                        *("" if getattr(m, k) is None else repr(getattr(m, k)) for k in METRICS)]
                       + ([repr(m.elapsed_seconds)] if timing else []))
        return buf.getvalue()


ALGORITHM_NAMES = {"kmeans": "KMeans", "ap": "AP", "ap-ahc": "APAHC"}


def bench_suite(X, algorithms=("kmeans", "ap-ahc"), runs: int = 13, base_seed: int = 0,
                kmeans_params=None, ap_params=None, ahc_params=None,
                metric_sample: int | None = 5000, paired: bool = False, progress=None) -> BenchSuite:
    """Run every algorithm ``runs`` times and compare K-means with AP -> AHC.

    Run ``r`` (1-based) uses seed ``base_seed + r`` for every algorithm and
    for the metric subsample, which all algorithms of that run share.  When
    both ``ap`` and ``ap-ahc`` are requested the AP stage is computed once
    per run and reused.
    """
    if runs < 2:
        raise ParameterError("the benchmark needs at least 2 runs for a t-test")
    unknown = set(algorithms) - set(ALGORITHM_NAMES)
    if unknown:
        raise ParameterError(f"unknown algorithms {sorted(unknown)}")
    X = as_dense(X)
    kmeans_params = kmeans_params or KMeansParams()
    ap_params = ap_params or ApParams()
    ahc_params = ahc_params or AhcParams()
    rows = []
    for r in range(1, runs + 1):
        seed = base_seed + r
        idx = subsample_indices(X.shape[0], metric_sample, seed)
        if r == 1 or idx.size < X.shape[0]:
            D = euclidean_distances(X[idx])
        ap_run = None
        for algo in algorithms:
            if algo == "kmeans":
                res = kmeans_fit(X, replace(kmeans_params, seed=seed))
            else:
                if ap_run is None:
                    ap_run = ap_fit(X, replace(ap_params, seed=seed))
                res = ap_run if algo == "ap" else ap_ahc_pipeline(X, ahc_params=ahc_params,
                                                                  ap_result=ap_run)
            rep = compute_metrics(X, res.labels, ALGORITHM_NAMES[algo], res.elapsed_seconds,
                                  sample_seed=seed, indices=idx, distances=D)
            if idx.size < X.shape[0]:
                rep.subsample_seed = seed
            rows.append(RunRow(r, ALGORITHM_NAMES[algo], seed, rep))
            if progress:
                progress(rows[-1])
    suite = BenchSuite(runs, rows, {})
    for algo in algorithms:
        name = ALGORITHM_NAMES[algo]
        suite.means[name] = {}
        suite.medians[name] = {}
        for m in METRICS + ("elapsed_seconds",):
            col = [v for v in suite.column(name, m) if v is not None]
            suite.means[name][m] = float(np.mean(col)) if col else None
            suite.medians[name][m] = float(np.median(col)) if col else None
    if "kmeans" in algorithms and "ap-ahc" in algorithms:
        for m in METRICS:
            xs, ys = suite.column("KMeans", m), suite.column("APAHC", m)
            if any(v is None for v in xs + ys):
                suite.ttests[m] = None
                suite.ttest_errors[m] = "metric undefined in at least one run"
                continue
            try:
                suite.ttests[m] = two_sample_ttest(xs, ys, paired=paired)
            except DegenerateSampleError as exc:
                suite.ttests[m] = None
                suite.ttest_errors[m] = str(exc)
    return suite
