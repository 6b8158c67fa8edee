"""Command line pipeline: ingest -> featurize -> cluster / bench -> report.

Every stage reads and writes files in ``--out-dir``:

=====================  ==============================================
``corpus.jsonl``       cleaned, de-duplicated documents (ingest)
``vocab.json``         term -> {index, df} (featurize)
``tfidf.apcs``         sparse TF-IDF matrix (featurize)
``features.apcm``      dense PCA scores, the clustering input (featurize)
``labels_<algo>.csv``  ``doc_id,cluster`` (cluster)
``metrics_<algo>.json``  validity indices and the metric subsample (cluster)
``bench.json/.csv``    repeated-run rows and t-tests (bench)
``timing.json``        wall-clock seconds of every cluster/bench run
=====================  ==============================================

Everything except ``timing.json`` is byte-for-byte reproducible for a fixed
configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from .affinity import ApParams, ap_fit, check_memory_budget
from .errors import ApsentError, ParameterError
from .evaluate import ALGORITHM_NAMES, METRICS, MetricsReport, bench_suite, compute_metrics
from .features import (build_vocabulary, fit_pca, pca_project, save_vocabulary, tfidf_transform,
                       write_sparse)
from .hierarchy import AhcParams, ap_ahc_pipeline, write_merges_csv
from .kmeans import KMeansParams, kmeans_fit
from .numerics import SeededRng, read_dense, write_dense
from .synthetic import SYNTH_SEED, write_dataset_csvs

ALGOS = ("kmeans", "ap", "ap-ahc")
TABLE_COLUMNS = (("KMeans", "K-means"), ("APAHC", "AP & AHC"), ("AP", "AP(Only)"))


@dataclass
class PipelineConfig:
    zhang: str | None = None
    kaggle: str | None = None
    out_dir: str = "out"
    components: int = 100
    algo: str = "ap-ahc"
    bench_algos: tuple[str, ...] = ("kmeans", "ap-ahc")
    k: int = 3
    damping: float = 0.9
    max_iter: int | None = None
    kmeans_max_iter: int = 300
    ap_max_iter: int = 500
    conv_window: int = 15
    preference: str | float = "median"
    linkage: str = "average"
    restarts: int = 1
    tol: float = 1e-6
    sample: int | None = None
    metric_sample: int | None = 5000
    runs: int = 13
    seed: int = 0
    memory_budget_mb: float = 2048.0
    paired: bool = False

    def kmeans_params(self, seed=None) -> KMeansParams:
        it = self.max_iter if self.max_iter is not None else self.kmeans_max_iter
        return KMeansParams(self.k, it, self.tol, self.seed if seed is None else seed,
                            self.restarts)

    def ap_params(self, seed=None) -> ApParams:
        it = self.max_iter if self.max_iter is not None else self.ap_max_iter
        return ApParams(self.damping, it, self.conv_window, self.preference,
                        self.seed if seed is None else seed)

    def ahc_params(self) -> AhcParams:
        return AhcParams(self.linkage, self.k)

    @property
    def out(self) -> Path:
        return Path(self.out_dir)


def _preference(value: str):
    if value == "median":
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'median' or a number") from None


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with PipelineConfig fields; flags win")
    common.add_argument("--zhang", help="Zhang-schema CSV (original_index,sid,text,label)")
    common.add_argument("--kaggle", help="Kaggle CSV (textID,text,selected_text,sentiment)")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--components", type=int, help="PCA components (default 100)")
    common.add_argument("--algo", action="append", choices=ALGOS,
                        help="algorithm; repeat for bench (default kmeans + ap-ahc)")
    common.add_argument("--k", type=int, help="K-means k and AHC target cluster count")
    common.add_argument("--damping", type=float)
    common.add_argument("--max-iter", dest="max_iter", type=int)
    common.add_argument("--conv-window", dest="conv_window", type=int)
    common.add_argument("--preference", type=_preference)
    common.add_argument("--linkage", choices=("average", "complete", "single"))
    common.add_argument("--restarts", type=int, help="K-means restarts (default 1)")
    common.add_argument("--sample", type=int, help="cluster a seeded subset of this many documents")
    common.add_argument("--metric-sample", dest="metric_sample", type=int)
    common.add_argument("--runs", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--memory-budget-mb", dest="memory_budget_mb", type=float)
    common.add_argument("--paired", action="store_true", default=None,
                        help="paired instead of pooled two-sample t-test")
    common.add_argument("--show-config", dest="show_config", action="store_true",
                        help="print the resolved configuration and exit")

    parser = argparse.ArgumentParser(prog="apsent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("ingest", "load, clean, merge and de-duplicate the CSV datasets"),
        ("featurize", "TF-IDF features and PCA scores"),
        ("cluster", "run one algorithm and score it"),
        ("bench", "repeated seeded runs and t-tests"),
        ("report", "scatter data, per-cluster samples and a markdown summary"),
        ("synth", "write a synthetic tweet corpus in both CSV schemas"),
    ]:
        p = sub.add_parser(name, parents=[common], help=helptext)
        if name == "synth":
            p.add_argument("--docs", type=int, default=5000)
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        names = {f.name for f in fields(PipelineConfig)}
        for key, value in data.items():
            if key not in names:
                raise ParameterError(f"unknown config key {key!r}")
            setattr(cfg, key, tuple(value) if key == "bench_algos" else value)
    for f in fields(PipelineConfig):
        value = getattr(args, f.name, None)
        if value is not None and f.name != "algo":
            setattr(cfg, f.name, value)
    if args.algo:
        cfg.algo = args.algo[-1]
        cfg.bench_algos = tuple(dict.fromkeys(args.algo))
    return cfg


def _need(path: Path, what: str) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return path


def _update_timing(cfg, key, value):
    path = cfg.out / "timing.json"
    data = json.loads(path.read_text()) if path.exists() else {}
    data[key] = value
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------- stages

def cmd_ingest(cfg: PipelineConfig) -> corpus_mod.Corpus:
    if not cfg.zhang and not cfg.kaggle:
        raise ParameterError("ingest needs --zhang and/or --kaggle")
    zhang = corpus_mod.load_zhang_csv(_need(Path(cfg.zhang), "Zhang CSV")) if cfg.zhang else []
    kaggle = corpus_mod.load_kaggle_csv(_need(Path(cfg.kaggle), "Kaggle CSV")) if cfg.kaggle else []
    corp = corpus_mod.merge_dedupe(zhang, kaggle)
    cfg.out.mkdir(parents=True, exist_ok=True)
    corpus_mod.write_jsonl(corp, cfg.out / "corpus.jsonl")
    missing = getattr(zhang, "dropped", 0) + getattr(kaggle, "dropped", 0)
    print(f"records: zhang={len(zhang)} kaggle={len(kaggle)} missing_text={missing}")
    print(f"dropped_empty={corp.dropped_empty} duplicates={corp.duplicates} "
          f"retained={len(corp)} (zhang={corp.counts.get('Zhang', 0)}, "
          f"kaggle={corp.counts.get('Kaggle', 0)})")
    return corp


def cmd_featurize(cfg: PipelineConfig) -> None:
    corp = corpus_mod.read_jsonl(_need(cfg.out / "corpus.jsonl", "corpus"))
    vocab = build_vocabulary(corp)
    if not 1 <= cfg.components <= min(len(corp) - 1, len(vocab)):
        raise ParameterError(f"--components {cfg.components} must be in "
                             f"[1, {min(len(corp) - 1, len(vocab))}] for this corpus")
    X = tfidf_transform(corp, vocab)
    model = fit_pca(X, cfg.components, cfg.seed)
    Z = pca_project(model, X)
    save_vocabulary(vocab, cfg.out / "vocab.json")
    write_sparse(cfg.out / "tfidf.apcs", X)
    write_dense(cfg.out / "features.apcm", Z)
    print(f"tfidf {X.shape[0]} x {X.shape[1]}")
    print(f"pca {Z.shape[0]} x {Z.shape[1]} "
          f"(explained variance ratio {float(model.explained_variance_ratio.sum()):.4f})")


def _select_rows(cfg, n):
    if cfg.sample is None or cfg.sample >= n:
        return np.arange(n)
    if cfg.sample < 2:
        raise ParameterError("--sample must be at least 2")
    return np.array(sorted(SeededRng(cfg.seed).sample(n, cfg.sample)), dtype=np.int64)


def _run_algorithm(cfg, algo, Z):
    if algo == "kmeans":
        return kmeans_fit(Z, cfg.kmeans_params())
    check_memory_budget(Z.shape[0], cfg.memory_budget_mb)
    if algo == "ap":
        return ap_fit(Z, cfg.ap_params())
    return ap_ahc_pipeline(Z, cfg.ap_params(), cfg.ahc_params())


def _fmt(v):
    return "nan" if v is None else f"{v:.6g}"


def cmd_cluster(cfg: PipelineConfig) -> MetricsReport:
    F = read_dense(_need(cfg.out / "features.apcm", "features"))
    rows = _select_rows(cfg, F.shape[0])
    Z = F[rows]
    algo = cfg.algo
    res = _run_algorithm(cfg, algo, Z)
    rep = compute_metrics(Z, res.labels, ALGORITHM_NAMES[algo], res.elapsed_seconds,
                          sample_size=cfg.metric_sample, sample_seed=cfg.seed)
    rep.subsample_indices = rows[rep.subsample_indices].tolist()

    with open(cfg.out / f"labels_{algo}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "cluster"])
        w.writerows(zip(rows.tolist(), res.labels.tolist()))
    body = rep.to_dict()
    body.pop("elapsed_seconds")
    _write_json(cfg.out / f"metrics_{algo}.json", body)
    detail = {
        "algorithm": res.algorithm, "k": res.k, "n_iter": res.n_iter, "converged": res.converged,
        "inertia": res.inertia, "net_similarity": res.net_similarity, "warnings": res.warnings,
        "exemplars": None if res.exemplars is None else rows[res.exemplars].tolist(),
        "config": asdict(cfg),
    }
    _write_json(cfg.out / f"assignment_{algo}.json", detail)
    if res.merges:
        write_merges_csv(res.merges, cfg.out / f"merges_{algo}.csv")
    _update_timing(cfg, f"cluster/{algo}", res.elapsed_seconds)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    for m, why in rep.undefined.items():
        print(f"warning: {m} undefined: {why}", file=sys.stderr)
    print(f"{rep.algorithm} {res.k} {_fmt(rep.silhouette)} {_fmt(rep.calinski_harabasz)} "
          f"{_fmt(rep.davies_bouldin)} {res.elapsed_seconds:.3f}")
    return rep


def cmd_bench(cfg: PipelineConfig):
    F = read_dense(_need(cfg.out / "features.apcm", "features"))
    rows = _select_rows(cfg, F.shape[0])
    Z = F[rows]
    if set(cfg.bench_algos) & {"ap", "ap-ahc"}:
        check_memory_budget(Z.shape[0], cfg.memory_budget_mb)

    def progress(row):
        m = row.metrics
        print(f"run {row.run:2d} {row.algorithm:6s} k={m.n_clusters} sil={_fmt(m.silhouette)} "
              f"ch={_fmt(m.calinski_harabasz)} db={_fmt(m.davies_bouldin)}", file=sys.stderr)

    suite = bench_suite(Z, cfg.bench_algos, cfg.runs, cfg.seed, cfg.kmeans_params(),
                        cfg.ap_params(), cfg.ahc_params(), cfg.metric_sample, cfg.paired,
                        progress=progress)
    body = suite.to_dict(timing=False)
    body["doc_ids"] = rows.tolist() if rows.size < F.shape[0] else None
    _write_json(cfg.out / "bench.json", body)
    (cfg.out / "bench.csv").write_text(suite.to_csv(timing=False), encoding="utf-8")
    _update_timing(cfg, "bench", {
        "rows": [[r.run, r.algorithm, r.metrics.elapsed_seconds] for r in suite.rows],
        "mean": {a: suite.means[a]["elapsed_seconds"] for a in suite.means},
    })
    print(ttest_table(suite))
    return suite


NICE = {"silhouette": "Silhouette Score", "calinski_harabasz": "Calinski-Harabasz Score",
        "davies_bouldin": "Davies-Bouldin Index"}


def ttest_table(suite) -> str:
    lines = ["| Metric | t-statistic | p-value |", "|---|---|---|"]
    for m in METRICS:
        t = suite.ttests.get(m)
        if t is None:
            lines.append(f"| {NICE[m]} | n/a | {suite.ttest_errors.get(m, 'not computed')} |")
        else:
            lines.append(f"| {NICE[m]} | {t.t:.3f} | {t.p:.3e} |")
    return "\n".join(lines)


def _read_labels(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["doc_id", "cluster"]:
            raise ParameterError(f"{path}: unexpected header {header}")
        pairs = [(int(a), int(b)) for a, b in reader]
    return np.array([p[0] for p in pairs], dtype=np.int64), np.array([p[1] for p in pairs])


def last_two_per_cluster(doc_ids, labels, per_cluster=2):
    """Highest ``per_cluster`` doc ids of each cluster, clusters in ascending order."""
    out = []
    for c in np.unique(labels):
        members = np.sort(doc_ids[labels == c])
        out.extend((int(c), int(d)) for d in members[-per_cluster:])
    return out


def cmd_report(cfg: PipelineConfig, algos=None) -> None:
    """Scatter CSV and samples for each algorithm (default: every one with labels), plus report.md."""
    F = read_dense(_need(cfg.out / "features.apcm", "features"))
    corp = corpus_mod.read_jsonl(_need(cfg.out / "corpus.jsonl", "corpus"))
    if algos is None:
        algos = [a for a in ALGOS if (cfg.out / f"labels_{a}.csv").exists()]
    if not algos:
        raise FileNotFoundError(f"no labels_<algo>.csv in {cfg.out}; run 'cluster' first")
    singles = {}
    for algo in algos:
        doc_ids, labels = _read_labels(_need(cfg.out / f"labels_{algo}.csv", "labels"))
        with open(cfg.out / f"scatter_{algo}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["doc_id", "pc1", "pc2", "cluster"])
            pc2 = F[doc_ids, 1] if F.shape[1] > 1 else np.zeros(doc_ids.size)
            for d, x, y, c in zip(doc_ids.tolist(), F[doc_ids, 0].tolist(), pc2.tolist(),
                                  labels.tolist()):
                w.writerow([d, repr(x), repr(y), c])
        with open(cfg.out / f"samples_{algo}.txt", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("cluster\tdoc_id\ttext\n")
            for c, d in last_two_per_cluster(doc_ids, labels):
                fh.write(f"{c}\t{d}\t{corp.documents[d].clean_text}\n")
        mpath = cfg.out / f"metrics_{algo}.json"
        if mpath.exists():
            singles[ALGORITHM_NAMES[algo]] = json.loads(mpath.read_text(encoding="utf-8"))
    (cfg.out / "report.md").write_text(_markdown(cfg, singles), encoding="utf-8")
    print(f"report written to {cfg.out / 'report.md'}")


def _table(values):
    lines = ["| Metric | " + " | ".join(n for _, n in TABLE_COLUMNS) + " |",
             "|---" * (len(TABLE_COLUMNS) + 1) + "|"]
    for m in METRICS:
        cells = []
        for key, _ in TABLE_COLUMNS:
            v = values.get(key, {}).get(m)
            cells.append("-" if v is None else f"{v:.3f}")
        lines.append(f"| {NICE[m]} | " + " | ".join(cells) + " |")
    lines.append("| Time (seconds) | " + " | ".join("see timing.json" for _ in TABLE_COLUMNS)
                 + " |")
    return "\n".join(lines)


def _markdown(cfg, singles):
    parts = ["# Clustering report", ""]
    if singles:
        sizes = {a: (s["n_points"], s["n_clusters"], s["subsample_size"]) for a, s in singles.items()}
        parts += ["## Single run", "", _table(singles), ""]
        parts += [f"- {a}: n={n}, clusters={k}, metric subsample={m}"
                  for a, (n, k, m) in sizes.items()] + [""]
    bpath = cfg.out / "bench.json"
    if bpath.exists():
        bench = json.loads(bpath.read_text(encoding="utf-8"))
        parts += [f"## Mean over {bench['runs']} runs", "", _table(bench["means"]), ""]
        lines = ["| Metric | t-statistic | p-value |", "|---|---|---|"]
        for m in METRICS:
            t = bench["ttests"].get(m)
            if t is None:
                lines.append(f"| {NICE[m]} | n/a | {bench['ttest_errors'].get(m, '-')} |")
            else:
                lines.append(f"| {NICE[m]} | {t['t']:.3f} | {t['p']:.3e} |")
        parts += ["## Two-sample t-test (K-means minus AP & AHC)", "", *lines, ""]
    return "\n".join(parts)


def cmd_synth(cfg: PipelineConfig, docs: int, seed: int) -> None:
    z, k = write_dataset_csvs(cfg.out, n_docs=docs, seed=seed)
    print(f"wrote {z} and {k}")


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.show_config:
            print(json.dumps(asdict(cfg), indent=2))
            return 0
        if args.command != "ingest" and args.command != "synth":
            _need(cfg.out, "output directory")
        if args.command == "ingest":
            cmd_ingest(cfg)
        elif args.command == "featurize":
            cmd_featurize(cfg)
        elif args.command == "cluster":
            cmd_cluster(cfg)
        elif args.command == "bench":
            cmd_bench(cfg)
        elif args.command == "report":
            cmd_report(cfg, args.algo)
        elif args.command == "synth":
            cmd_synth(cfg, args.docs, SYNTH_SEED if args.seed is None else args.seed)
    except (ApsentError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - top-level guard maps to exit code 1
        print(f"internal error: {exc!r}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
