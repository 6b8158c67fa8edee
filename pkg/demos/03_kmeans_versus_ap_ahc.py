"""
K-means against AP followed by agglomerative merging
====================================================

Both methods are asked for three clusters on the same PCA features and
scored with the three validity indices.  A short repeated-run benchmark
and the two-sample t-test close the comparison.
"""

import numpy as np

from apsent.corpus import KAGGLE, RawRecord, merge_dedupe
from apsent.evaluate import bench_suite, compute_metrics
from apsent.features import build_vocabulary, fit_pca, pca_project, tfidf_transform
from apsent.hierarchy import ap_ahc_pipeline
from apsent.kmeans import KMeansParams, kmeans_fit
from apsent.synthetic import topic_corpus

texts, topics = topic_corpus(n_docs=800, seed=3)
corpus = merge_dedupe([], [RawRecord(str(i), t, KAGGLE) for i, t in enumerate(texts)])
X = tfidf_transform(corpus, build_vocabulary(corpus))
Z = pca_project(fit_pca(X, k=30), X)

km = kmeans_fit(Z, KMeansParams(k=3, seed=0))
hy = ap_ahc_pipeline(Z)
print("AP found", hy.ap_stage.k, "exemplars; merged down to", hy.k)
print("cluster sizes  K-means:", np.bincount(km.labels), " AP & AHC:", np.bincount(hy.labels))

for res in (km, hy):
    m = compute_metrics(Z, res.labels, res.algorithm, res.elapsed_seconds)
    print(f"{m.algorithm:7s} silhouette {m.silhouette:.3f}  CH {m.calinski_harabasz:.2f}  "
          f"DB {m.davies_bouldin:.3f}  {res.elapsed_seconds:.2f}s")

# five seeded runs each; t is K-means minus AP & AHC
suite = bench_suite(Z, runs=5)
for metric, t in suite.ttests.items():
    if t is None:
        print(metric, "no test:", suite.ttest_errors[metric])
    else:
        print(f"{metric:18s} t = {t.t:8.3f}  p = {t.p:.2e}")
