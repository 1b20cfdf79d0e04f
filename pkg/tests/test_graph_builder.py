import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokengraph.errors import ValidationError
from tokengraph.graph_builder import build_edges, build_graph, collate, graph_from_ids
from tokengraph.tokenizer import TokenSequence


def brute_force_edges(seq_len, n_hop):
    return {
        (u, v)
        for u in range(seq_len)
        for v in range(seq_len)
        if u != v and abs(u - v) <= n_hop
    }


def seq_of(n):
    return TokenSequence(0, tuple((i + 10, f"t{i}") for i in range(n)))


class TestBuildEdges:
    def test_chain_of_four(self):
        edges = set(map(tuple, build_edges(4, 1).tolist()))
        assert edges == {(0, 1), (1, 0), (1, 2), (2, 1), (2, 3), (3, 2)}

    def test_single_node_is_isolated(self):
        assert build_edges(1, 3).shape == (0, 2)

    def test_count_formula(self):
        assert build_edges(5, 2).shape[0] == 14
        for seq_len, n_hop in [(1, 1), (2, 3), (10, 4), (64, 4)]:
            expected = 2 * sum(max(0, seq_len - k) for k in range(1, n_hop + 1))
            assert build_edges(seq_len, n_hop).shape[0] == expected

    def test_zero_arguments_rejected(self):
        with pytest.raises(ValidationError):
            build_edges(0, 1)
        with pytest.raises(ValidationError):
            build_edges(4, 0)

    @given(st.integers(1, 64), st.integers(1, 4))
    @settings(max_examples=150)
    def test_matches_brute_force(self, seq_len, n_hop):
        edges = build_edges(seq_len, n_hop)
        assert set(map(tuple, edges.tolist())) == brute_force_edges(seq_len, n_hop)
        assert edges.shape[0] == len(brute_force_edges(seq_len, n_hop))

    @given(st.integers(1, 40), st.integers(1, 4))
    @settings(max_examples=100)
    def test_symmetry_no_loops_locality(self, seq_len, n_hop):
        edges = set(map(tuple, build_edges(seq_len, n_hop).tolist()))
        for u, v in edges:
            assert (v, u) in edges
            assert u != v
            assert 1 <= abs(u - v) <= n_hop


class TestBuildGraph:
    def test_two_tokens(self):
        g = build_graph(seq_of(2), np.zeros((2, 4)), n_hop=1, label=1)
        assert g.num_nodes == 2
        assert set(map(tuple, g.edges.tolist())) == {(0, 1), (1, 0)}
        assert g.label == 1

    def test_single_token_graph_is_valid(self):
        g = build_graph(seq_of(1), np.ones((1, 4)))
        assert g.num_nodes == 1
        assert g.edges.shape == (0, 2)

    def test_shape_mismatch(self):
        with pytest.raises(ValidationError):
            build_graph(seq_of(4), np.zeros((3, 4)))

    def test_features_upcast_to_float64(self):
        g = build_graph(seq_of(2), np.zeros((2, 4), dtype=np.float32))
        assert g.features.dtype == np.float64


class TestCollate:
    def test_membership(self):
        a = graph_from_ids(0, [1, 2], np.zeros((2, 4)))
        b = graph_from_ids(1, [3, 4, 5], np.ones((3, 4)))
        batch = collate([a, b])
        assert batch.num_nodes == 5
        assert batch.membership.tolist() == [0, 0, 1, 1, 1]
        # edge re-indexing offsets the second graph by 2
        assert set(map(tuple, batch.edges.tolist())) == {
            (0, 1), (1, 0), (2, 3), (3, 2), (3, 4), (4, 3),
        }

    def test_empty_batch_rejected(self):
        with pytest.raises(ValidationError):
            collate([])

    def test_single_graph_identity(self):
        g = graph_from_ids(7, [1, 2, 3], np.arange(12, dtype=float).reshape(3, 4))
        batch = collate([g])
        assert np.array_equal(batch.features, g.features)
        assert np.array_equal(batch.edges, g.edges)
        assert batch.membership.tolist() == [0, 0, 0]

    def test_mixed_dims_rejected(self):
        a = graph_from_ids(0, [1], np.zeros((1, 4)))
        b = graph_from_ids(1, [2], np.zeros((1, 5)))
        with pytest.raises(ValidationError):
            collate([a, b])

    @given(st.lists(st.integers(1, 6), min_size=1, max_size=5), st.integers(0, 10_000))
    @settings(max_examples=60)
    def test_split_by_membership_recovers_features(self, sizes, seed):
        rng = np.random.default_rng(seed)
        graphs = [
            graph_from_ids(i, rng.integers(0, 50, size=n), rng.normal(size=(n, 3)))
            for i, n in enumerate(sizes)
        ]
        batch = collate(graphs)
        for i, g in enumerate(graphs):
            rows = batch.features[batch.membership == i]
            assert np.array_equal(rows, g.features)
