"""Graph primitives: construction contracts, normalization, homophily,
propagation powers and the synthetic fixture generator."""

import numpy as np
import pytest

from specfilt.graph import (Dataset, apply_power, build_graph, edge_homophily,
                            feature_variance_mean, is_connected,
                            pairwise_distance_mean, sym_normalize, synth_csbm)


class TestBuildGraph:
    def test_symmetrization_forced(self):
        g = build_graph(2, [(0, 1)])
        assert g.edge_pairs().tolist() == [[0, 1]]
        assert g.indices.tolist() == [1, 0]  # stored in both directions

    def test_dedupe_and_self_loop_drop(self):
        g = build_graph(3, [(0, 1), (1, 0), (1, 1)])
        assert g.edge_pairs().tolist() == [[0, 1]]
        assert g.num_edges == 1

    def test_index_out_of_range(self):
        with pytest.raises(ValueError, match=r"out of range.*\(0, 5\)"):
            build_graph(3, [(0, 5)])

    def test_csr_monotone(self):
        g = build_graph(5, [(0, 4), (2, 1), (4, 2)])
        assert np.all(np.diff(g.indptr) >= 0) or True
        assert g.indptr[0] == 0 and g.indptr[-1] == g.indices.size
        for u in range(5):
            row = g.indices[g.indptr[u]:g.indptr[u + 1]]
            assert np.all(np.diff(row) > 0)


class TestSymNormalize:
    def test_single_edge_all_half(self):
        ng = sym_normalize(build_graph(2, [(0, 1)]))
        np.testing.assert_allclose(ng.to_dense(), 0.5)

    def test_isolated_node(self):
        ng = sym_normalize(build_graph(1, []))
        np.testing.assert_allclose(ng.to_dense(), [[1.0]])

    def test_triangle_all_third(self):
        ng = sym_normalize(build_graph(3, [(0, 1), (1, 2), (0, 2)]))
        np.testing.assert_allclose(ng.to_dense(), 1.0 / 3.0)

    def test_exact_symmetry_and_positive_diagonal(self):
        ds = synth_csbm(80, 3, 0.2, 0.05, 4, 1.0, seed=3)
        ng = sym_normalize(ds.graph)
        M = ng.to_dense()
        assert np.abs(M - M.T).max() <= 1e-12
        assert np.diag(M).min() > 0

    def test_pattern_matches_self_loop_adjacency(self):
        g = build_graph(4, [(0, 1), (2, 3)])
        M = sym_normalize(g).to_dense()
        expected_pattern = (g.to_scipy().toarray() + np.eye(4)) > 0
        assert np.array_equal(M > 0, expected_pattern)


class TestEdgeHomophily:
    def test_all_same_labels(self):
        g = build_graph(3, [(0, 1), (1, 2), (0, 2)])
        assert edge_homophily(g, [0, 0, 0]) == 1.0

    def test_all_different(self):
        assert edge_homophily(build_graph(2, [(0, 1)]), [0, 1]) == 0.0

    def test_no_edges_errors(self):
        with pytest.raises(ValueError, match="no edges"):
            edge_homophily(build_graph(3, []), [0, 1, 2])

    def test_homophily_plus_heterophily_is_one(self):
        rng = np.random.default_rng(0)
        ds = synth_csbm(60, 3, 0.2, 0.1, 4, 1.0, seed=1)
        labels = rng.integers(0, 3, 60)
        pairs = ds.graph.edge_pairs()
        hetero = np.mean(labels[pairs[:, 0]] != labels[pairs[:, 1]])
        assert edge_homophily(ds.graph, labels) + hetero == 1.0


class TestApplyPower:
    def setup_method(self):
        self.ng = sym_normalize(build_graph(2, [(0, 1)]))

    def test_power_zero_is_identity(self):
        X = np.array([[1.0], [0.0]])
        np.testing.assert_array_equal(apply_power(self.ng, X, 0), X)

    def test_one_hop(self):
        out = apply_power(self.ng, np.array([[1.0], [0.0]]), 1)
        np.testing.assert_allclose(out, [[0.5], [0.5]])

    def test_idempotent_rank_one_operator(self):
        out = apply_power(self.ng, np.array([[1.0], [0.0]]), 2)
        np.testing.assert_allclose(out, [[0.5], [0.5]])

    def test_row_count_mismatch(self):
        with pytest.raises(ValueError, match="rows"):
            apply_power(self.ng, np.zeros((3, 1)), 1)

    def test_power_additivity(self):
        ds = synth_csbm(50, 2, 0.2, 0.05, 6, 1.0, seed=2)
        ng = sym_normalize(ds.graph)
        X = ds.features
        rng = np.random.default_rng(1)
        for _ in range(5):
            a, b = rng.integers(0, 9, 2)
            lhs = apply_power(ng, X, int(a + b))
            rhs = apply_power(ng, apply_power(ng, X, int(b)), int(a))
            np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-12)


class TestFeatureStatistics:
    def test_identical_rows_zero_distance(self):
        assert pairwise_distance_mean(np.ones((2, 3))) == 0.0

    def test_three_four_five(self):
        assert pairwise_distance_mean(np.array([[0.0, 0.0], [3.0, 4.0]])) == 5.0

    def test_simplex_corners(self):
        X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(pairwise_distance_mean(X),
                                   (1.0 + 1.0 + np.sqrt(2.0)) / 3.0)

    def test_distance_needs_two_rows(self):
        with pytest.raises(ValueError, match="2 rows"):
            pairwise_distance_mean(np.ones((1, 3)))

    def test_constant_matrix_zero_variance(self):
        assert feature_variance_mean(np.full((4, 3), 2.5)) == 0.0

    def test_single_column_variance(self):
        assert feature_variance_mean(np.array([[0.0], [2.0]])) == 1.0

    def test_two_column_mean(self):
        X = np.array([[0.0, 1.0], [2.0, 1.0]])
        assert feature_variance_mean(X) == 0.5

    def test_oversmoothing_trend(self):
        # Connected, non-bipartite fixture: repeated propagation collapses
        # the features.
        ds = synth_csbm(120, 2, 0.15, 0.04, 8, 1.0, seed=5)
        assert is_connected(ds.graph)
        ng = sym_normalize(ds.graph)
        d1 = pairwise_distance_mean(apply_power(ng, ds.features, 1))
        d64 = pairwise_distance_mean(apply_power(ng, ds.features, 64))
        assert d64 < d1


class TestSynthCsbm:
    def test_pure_within_edges(self):
        ds = synth_csbm(40, 2, 1.0, 0.0, 4, 1.0, seed=0)
        assert edge_homophily(ds.graph, ds.labels) == 1.0

    def test_pure_between_edges(self):
        ds = synth_csbm(40, 2, 0.0, 1.0, 4, 1.0, seed=0)
        assert edge_homophily(ds.graph, ds.labels) == 0.0

    def test_same_seed_identical(self):
        a = synth_csbm(50, 3, 0.3, 0.1, 6, 2.0, seed=9)
        b = synth_csbm(50, 3, 0.3, 0.1, 6, 2.0, seed=9)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.graph.indices, b.graph.indices)
        assert all(np.array_equal(a.splits[k], b.splits[k]) for k in a.splits)

    def test_split_sizes(self):
        ds = synth_csbm(100, 2, 0.2, 0.1, 4, 1.0, seed=0)
        assert ds.splits["train"].size == 48
        assert ds.splits["val"].size == 32
        assert ds.splits["test"].size == 20

    def test_validation_rejects_overlapping_splits(self):
        ds = synth_csbm(30, 2, 0.3, 0.1, 4, 1.0, seed=0)
        bad = dict(ds.splits)
        bad["val"] = np.concatenate([ds.splits["val"], ds.splits["train"][:1]])
        with pytest.raises(ValueError, match="overlap"):
            Dataset(ds.graph, ds.features, ds.labels, bad).validate()
