import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucmf import ClusterAssignment, build_neighbor_weights, vss

from conftest import make_dataset, random_dataset


def naive_vss(i, f, ds):
    ri = {int(j): r for j, r in zip(*ds.by_user(i))}
    rf = {int(j): r for j, r in zip(*ds.by_user(f))}
    common = sorted(set(ri) & set(rf))
    if not common:
        return 0.0
    num = sum(ri[j] * rf[j] for j in common)
    return num / (math.sqrt(sum(ri[j] ** 2 for j in common))
                  * math.sqrt(sum(rf[j] ** 2 for j in common)))


def assignment_for(labels):
    labels = np.asarray(labels)
    k = labels.max() + 1
    return ClusterAssignment(
        labels=labels,
        centroids=np.zeros((k, 1)),
        distortion=0.0,
        iterations_run=0,
    )


class TestVss:
    def test_hand_example(self):
        ds = make_dataset([(0, 0, 4.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)])
        assert vss(0, 1, ds) == pytest.approx(0.8)

    def test_self_similarity(self):
        ds = make_dataset([(0, 0, 4.0), (0, 1, 2.0)], n_users=1)
        assert vss(0, 0, ds) == pytest.approx(1.0, abs=1e-12)

    def test_no_common_items(self):
        ds = make_dataset([(0, 0, 5.0), (1, 1, 5.0)])
        assert vss(0, 1, ds) == 0.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        ds = random_dataset(rng, 8, 10, density=0.5)
        for i in range(8):
            for f in range(8):
                s = vss(i, f, ds)
                assert 0.0 <= s <= 1.0
                assert s == pytest.approx(vss(f, i, ds), abs=1e-15)

    def test_matches_naive(self):
        rng = np.random.default_rng(1)
        ds = random_dataset(rng, 6, 8, density=0.6)
        for i in range(6):
            for f in range(6):
                assert vss(i, f, ds) == pytest.approx(naive_vss(i, f, ds), abs=1e-12)

    @given(st.integers(1, 5), st.lists(st.integers(1, 5), min_size=1, max_size=6))
    @settings(max_examples=30, deadline=None)
    def test_scale_invariance(self, scale, ratings_i):
        # real-valued ratings are allowed on synthetic data
        n = len(ratings_i)
        triples = [(0, j, float(r)) for j, r in enumerate(ratings_i)]
        triples += [(1, j, float((j % 5) + 1)) for j in range(n)]
        base = vss(0, 1, make_dataset(triples, n_users=2, n_items=n))
        scaled = [(u, j, r * scale) for u, j, r in triples]
        assert vss(0, 1, make_dataset(scaled, n_users=2, n_items=n)) == \
            pytest.approx(base, abs=1e-12)


class TestNeighborWeights:
    def test_singleton_cluster(self):
        ds = make_dataset([(0, 0, 5.0), (1, 0, 3.0), (2, 1, 4.0)])
        weights = build_neighbor_weights(assignment_for([0, 1, 1]), ds)
        idx, w = weights.neighbors(0)
        assert len(idx) == 0
        assert weights.weight_sum(0) == 0.0

    def test_pair_cluster(self):
        ds = make_dataset([(0, 0, 4.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 4.0)])
        weights = build_neighbor_weights(assignment_for([0, 0]), ds)
        idx, w = weights.neighbors(0)
        assert list(idx) == [1]
        assert w[0] == pytest.approx(0.8)
        idx, w = weights.neighbors(1)
        assert list(idx) == [0]
        assert w[0] == pytest.approx(0.8)
        assert weights.weight_sum(0) == pytest.approx(0.8)

    def test_list_lengths(self):
        rng = np.random.default_rng(2)
        ds = random_dataset(rng, 9, 6, density=0.8)
        labels = np.array([0, 0, 0, 1, 1, 2, 2, 2, 2])
        weights = build_neighbor_weights(assignment_for(labels), ds)
        total = 0
        for i in range(9):
            idx, _ = weights.neighbors(i)
            size = int((labels == labels[i]).sum())
            assert len(idx) == size - 1
            total += len(idx)
        sizes = np.bincount(labels)
        assert total == int((sizes * (sizes - 1)).sum())

    def test_matrix_matches_pairwise_vss(self):
        rng = np.random.default_rng(3)
        ds = random_dataset(rng, 7, 8, density=0.5)
        labels = rng.integers(0, 2, 7)
        weights = build_neighbor_weights(assignment_for(labels), ds)
        dense = weights.matrix.toarray()
        for i in range(7):
            for f in range(7):
                if i != f and labels[i] == labels[f]:
                    assert dense[i, f] == pytest.approx(vss(i, f, ds), abs=1e-12)
                else:
                    assert dense[i, f] == 0.0

    def test_symmetric_storage(self):
        rng = np.random.default_rng(4)
        ds = random_dataset(rng, 10, 10, density=0.4)
        labels = rng.integers(0, 3, 10)
        weights = build_neighbor_weights(assignment_for(labels), ds)
        diff = (weights.matrix - weights.matrix.T)
        max_asym = abs(diff).max() if diff.nnz else 0.0
        assert max_asym == 0.0

    def test_coverage_mismatch_rejected(self):
        ds = make_dataset([(0, 0, 5.0), (1, 0, 3.0)])
        with pytest.raises(ValueError):
            build_neighbor_weights(assignment_for([0]), ds)
