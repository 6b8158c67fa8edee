import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from apsent.affinity import ApParams, ap_fit
from apsent.errors import ParameterError
from apsent.hierarchy import AhcParams, ahc_fit, ap_ahc_pipeline, write_merges_csv


def test_two_pairs_trace(line4):
    merges, labels = ahc_fit(line4, AhcParams(target_k=2))
    assert [(m.left, m.right, m.distance, m.new_id, m.size) for m in merges] == [
        (0, 1, 1.0, 4, 2), (2, 3, 1.0, 5, 2)]
    assert labels.tolist() == [0, 0, 1, 1]
    merges, _ = ahc_fit(line4, AhcParams(target_k=1))
    assert merges[-1].distance == 100.5 and merges[-1].size == 4


def test_no_merges_and_identical_points():
    merges, labels = ahc_fit(np.arange(3.0)[:, None], AhcParams(target_k=3))
    assert merges == [] and labels.tolist() == [0, 1, 2]
    merges, labels = ahc_fit(np.zeros((4, 2)), AhcParams(target_k=1))
    assert [(m.left, m.right) for m in merges] == [(0, 1), (2, 3), (4, 5)]
    assert all(m.distance == 0.0 for m in merges) and labels.tolist() == [0] * 4


def test_linkage_rules():
    X = np.array([[0.0], [1.0], [3.0]])
    for linkage, dist in (("average", (4 + 9) / 2), ("complete", 9.0), ("single", 4.0)):
        merges, _ = ahc_fit(X, AhcParams(linkage=linkage, target_k=1))
        assert merges[1].distance == dist
    with pytest.raises(ParameterError):
        AhcParams(linkage="ward")
    with pytest.raises(ParameterError):
        ahc_fit(X, AhcParams(target_k=4))


points = arrays(np.float64, st.tuples(st.integers(2, 40), st.just(2)), elements=st.floats(-100, 100))


@settings(max_examples=150, deadline=None)
@given(points, st.sampled_from(["average", "complete"]))
def test_merge_distances_never_decrease(X, linkage):
    merges, _ = ahc_fit(X, AhcParams(linkage=linkage, target_k=1))
    assert len(merges) == X.shape[0] - 1
    d = [m.distance for m in merges]
    for a, b in zip(d, d[1:]):
        assert b >= a - 1e-9 * max(1.0, abs(a))
    assert [m.new_id for m in merges] == list(range(X.shape[0], 2 * X.shape[0] - 1))
    assert merges[-1].size == X.shape[0]


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 4))
def test_permutation_equivariance(seed, k):
    r = np.random.default_rng(seed)
    X = r.normal(size=(15, 2))
    perm = r.permutation(15)
    _, a = ahc_fit(X, AhcParams(target_k=k))
    _, b = ahc_fit(X[perm], AhcParams(target_k=k))
    pairs = set(zip(a[perm].tolist(), b.tolist()))
    assert len(pairs) == k


def test_pipeline_three_groups():
    X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0], [100.0], [101.0], [102.0]])
    out = ap_ahc_pipeline(X, ApParams(preference=-20.0), AhcParams(target_k=2))
    ap = out.ap_stage
    assert ap.exemplars.tolist() == [1, 4, 7]
    assert [(m.left, m.right, m.distance) for m in out.merges] == [(0, 1, 100.0)]
    assert out.algorithm == "APAHC" and out.k == 2
    assert out.labels.tolist() == [0] * 6 + [1] * 3
    assert out.elapsed_seconds >= ap.elapsed_seconds


def test_pipeline_pass_through_and_fallback(line4):
    out = ap_ahc_pipeline(line4, ApParams(), AhcParams(target_k=2))
    assert out.merges == [] and out.labels.tolist() == out.ap_stage.labels.tolist()
    few = ap_ahc_pipeline(line4, ApParams(), AhcParams(target_k=3))
    assert few.k == 2 and few.warnings


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_pipeline_never_splits_ap_clusters(seed):
    r = np.random.default_rng(seed)
    X = np.vstack([r.normal(c, 0.5, size=(8, 2)) for c in (0, 3, 6, 9)])
    ap = ap_fit(X)
    out = ap_ahc_pipeline(X, ahc_params=AhcParams(target_k=2), ap_result=ap)
    for c in range(ap.k):
        assert len(set(out.labels[ap.labels == c].tolist())) == 1


def test_merges_csv(tmp_path, line4):
    merges, _ = ahc_fit(line4, AhcParams(target_k=1))
    write_merges_csv(merges, tmp_path / "m.csv")
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows[0] == ["step", "left", "right", "distance", "size"]
    assert rows[1:] == [["0", "0", "1", "1.0", "2"], ["1", "2", "3", "1.0", "2"],
                        ["2", "4", "5", "100.5", "4"]]
