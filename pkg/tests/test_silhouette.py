import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import direct_silhouette, random_points
from slicecluster.cluster import ahc_average_linkage, cut, pairwise_distances, silhouette, silhouette_sweep

PAIRS = [(0, 0, 0), (0, 0, 1), (100, 0, 0), (100, 0, 1)]


def test_two_far_pairs():
    sc = silhouette(pairwise_distances(PAIRS), [0, 0, 1, 1])
    # frozen from the direct per-point oracle
    assert sc == pytest.approx(0.9900002499875008, abs=1e-15)
    assert sc == pytest.approx(direct_silhouette(PAIRS, [0, 0, 1, 1]), abs=1e-15)


def test_identical_points_score_zero():
    pts = [(5, 5, 5)] * 4
    assert silhouette(pairwise_distances(pts), [0, 0, 1, 1]) == 0.0


def test_all_singletons_score_zero():
    pts = random_points(np.random.default_rng(2), 6)
    for variant in ("mean", "nearest"):
        assert silhouette(pairwise_distances(pts), list(range(6)), variant) == 0.0


def test_undefined_for_one_cluster():
    with pytest.raises(ValueError):
        silhouette(pairwise_distances(PAIRS), [0, 0, 0, 0])
    with pytest.raises(ValueError):
        silhouette(pairwise_distances(PAIRS), [0, 0, 1, 1], variant="median")


def test_variants_differ_when_three_clusters():
    pts = [(0, 0, 0), (0, 0, 1), (10, 0, 0), (10, 0, 1), (200, 0, 0), (200, 0, 1)]
    labels = [0, 0, 1, 1, 2, 2]
    d = pairwise_distances(pts)
    mean, nearest = silhouette(d, labels, "mean"), silhouette(d, labels, "nearest")
    assert mean != nearest
    assert mean == pytest.approx(direct_silhouette(pts, labels, "mean"), abs=1e-12)
    assert nearest == pytest.approx(direct_silhouette(pts, labels, "nearest"), abs=1e-12)


def _random_labels(rng, n, k):
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    rng.shuffle(labels)
    return labels


@pytest.mark.parametrize("variant", ["mean", "nearest"])
def test_matches_direct_oracle(variant):
    rng = np.random.default_rng(99)
    for _ in range(25):
        n = int(rng.integers(2, 120))
        k = int(rng.integers(2, min(10, n) + 1))
        pts = random_points(rng, n)
        labels = _random_labels(rng, n, k)
        got = silhouette(pairwise_distances(pts), labels, variant)
        assert abs(got - direct_silhouette(pts, labels, variant)) <= 1e-12
        assert -1.0 <= got <= 1.0


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 60), st.integers(0, 2**32 - 1), st.sampled_from(["mean", "nearest"]))
def test_sweep_equals_direct_cuts(n, seed, variant):
    pts = random_points(np.random.default_rng(seed), n)
    d = pairwise_distances(pts)
    dendro = ahc_average_linkage(d)
    sweep = silhouette_sweep(dendro, d, 2, n, variant)
    assert sorted(sweep) == list(range(2, n + 1))
    for k, v in sweep.items():
        assert v == pytest.approx(silhouette(d, cut(dendro, k), variant), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(3, 30), st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_scale_invariance(n, seed, c):
    rng = np.random.default_rng(seed)
    pts = random_points(rng, n)
    labels = _random_labels(rng, n, 2)
    a = silhouette(pairwise_distances(pts), labels)
    b = silhouette(pairwise_distances(pts * c), labels)
    assert a == pytest.approx(b, abs=1e-12)
