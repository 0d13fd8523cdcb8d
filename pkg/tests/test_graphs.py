"""Graph containers, ingestion, splits, mirroring, and the synthetic task."""

import numpy as np
import pytest

import specband as sb
from specband.graphs import GraphError, write_edge_list
from specband.spectral import grouping_tolerance


def _graph_from_text(tmp_path, text):
    path = tmp_path / "edges.txt"
    path.write_text(text)
    return sb.load_edge_list(path)


class TestGraph:
    def test_canonical_edges(self):
        g = sb.Graph(3, ((2, 1), (0, 1)))
        assert g.edges == ((0, 1), (1, 2))
        assert g.m == 2

    def test_rejects_self_loop(self):
        with pytest.raises(GraphError, match="self-loop"):
            sb.Graph(2, ((1, 1),))

    def test_rejects_out_of_range(self):
        with pytest.raises(GraphError, match="out of range"):
            sb.Graph(2, ((0, 2),))

    def test_duplicate_edges_collapse(self):
        g = sb.Graph(3, ((0, 1), (1, 0), (0, 1)))
        assert g.m == 1

    def test_degrees(self):
        g = sb.Graph(4, ((0, 1), (0, 2), (0, 3)))
        assert g.degrees().tolist() == [3, 1, 1, 1]


class TestLoadEdgeList:
    def test_direct_parse(self, tmp_path):
        g = _graph_from_text(tmp_path, "0 1\n1 2\n")
        assert (g.n, g.m) == (3, 2)
        assert g.edges == ((0, 1), (1, 2))

    def test_reversed_edge_dedup(self, tmp_path):
        g = _graph_from_text(tmp_path, "0 1\n1 0\n")
        assert (g.n, g.m) == (2, 1)

    def test_self_loop_error(self, tmp_path):
        with pytest.raises(GraphError, match="self-loop"):
            _graph_from_text(tmp_path, "0 0\n")

    def test_parse_error_carries_line_number(self, tmp_path):
        with pytest.raises(GraphError, match=":2:"):
            _graph_from_text(tmp_path, "0 1\n1 two\n")

    def test_empty_file_error(self, tmp_path):
        with pytest.raises(GraphError, match="empty"):
            _graph_from_text(tmp_path, "# just a comment\n")

    def test_nodes_header_allows_isolated_tail(self, tmp_path):
        g = _graph_from_text(tmp_path, "#nodes 5\n0 1\n")
        assert (g.n, g.m) == (5, 1)

    def test_header_conflict(self, tmp_path):
        with pytest.raises(GraphError, match="exceeds"):
            _graph_from_text(tmp_path, "#nodes 2\n0 3\n")

    def test_roundtrip(self, tmp_path):
        g = sb.Graph(5, ((0, 1), (2, 3)))
        path = tmp_path / "out.txt"
        write_edge_list(g, path)
        assert sb.load_edge_list(path) == g


class TestNormalizedAdjacency:
    def test_single_edge(self):
        a = sb.normalized_adjacency(sb.Graph(2, ((0, 1),)))
        assert a.tolist() == [[0.0, 1.0], [1.0, 0.0]]

    def test_triangle(self):
        a = sb.normalized_adjacency(sb.Graph(3, ((0, 1), (1, 2), (0, 2))))
        expect = (np.ones((3, 3)) - np.eye(3)) / 2.0
        np.testing.assert_allclose(a, expect)
        lam = np.linalg.eigvalsh(a)
        np.testing.assert_allclose(lam, [-0.5, -0.5, 1.0], atol=1e-12)

    def test_star_spectrum(self):
        # oracle: direct eigensolve of the 4x4 matrix
        a = sb.normalized_adjacency(sb.Graph(4, ((0, 1), (0, 2), (0, 3))))
        lam = np.linalg.eigvalsh(a)
        np.testing.assert_allclose(lam, [-1.0, 0.0, 0.0, 1.0], atol=1e-8)

    def test_isolated_node_row_is_zero(self):
        a = sb.normalized_adjacency(sb.Graph(3, ((0, 1),)))
        assert np.all(a[2] == 0.0) and np.all(a[:, 2] == 0.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_exact_symmetry_and_range(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 40))
        edges = set()
        for _ in range(3 * n):
            u, v = rng.integers(0, n, size=2)
            if u != v:
                edges.add((min(u, v), max(u, v)))
        g = sb.Graph(n, tuple(edges))
        a = sb.normalized_adjacency(g)
        assert np.array_equal(a, a.T)
        lam = np.linalg.eigvalsh(a)
        assert np.all(np.abs(lam) <= 1.0 + 1e-8)

    def test_sparse_matches_dense(self):
        g = sb.Graph(6, ((0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (0, 5), (1, 4)))
        dense = sb.normalized_adjacency(g)
        np.testing.assert_array_equal(sb.normalized_adjacency_sparse(g).toarray(), dense)


class TestMakeSplits:
    def test_sizes(self):
        s = sb.make_splits(10, seed=0)
        assert (s.train.sum(), s.val.sum(), s.test.sum()) == (6, 2, 2)

    def test_deterministic(self):
        a, b = sb.make_splits(10, 0), sb.make_splits(10, 0)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.val, b.val)
        assert np.array_equal(a.test, b.test)

    def test_seeds_differ(self):
        a, b = sb.make_splits(10, 0), sb.make_splits(10, 1)
        assert not (np.array_equal(a.train, b.train) and np.array_equal(a.val, b.val))

    def test_too_small(self):
        with pytest.raises(GraphError):
            sb.make_splits(4, 0)

    @pytest.mark.parametrize("n,seed", [(5, 0), (7, 3), (23, 1), (100, 9), (101, 2)])
    def test_partition_property(self, n, seed):
        s = sb.make_splits(n, seed)
        assert s.train.sum() == round(0.6 * n)
        assert s.val.sum() == round(0.2 * n)
        combined = s.train.astype(int) + s.val.astype(int) + s.test.astype(int)
        assert np.all(combined == 1)

    def test_json_roundtrip(self, tmp_path):
        s = sb.make_splits(12, seed=4)
        path = tmp_path / "split.json"
        s.save(path)
        loaded = sb.SplitMask.load(path)
        assert np.array_equal(loaded.train, s.train)
        assert loaded.seed == 4


def _zero_eigs(graph, tol=1e-8):
    lam = np.linalg.eigvalsh(sb.normalized_adjacency(graph))
    return int(np.count_nonzero(np.abs(lam) <= tol))


class TestDuplicateSubgraph:
    def test_single_edge_gains_zero(self):
        g = sb.duplicate_subgraph(sb.Graph(2, ((0, 1),)), [1])
        assert g.n == 3
        lam = np.linalg.eigvalsh(sb.normalized_adjacency(g))
        np.testing.assert_allclose(lam, [-1.0, 0.0, 1.0], atol=1e-8)

    def test_empty_list_is_identity(self):
        g = sb.Graph(3, ((0, 1), (1, 2)))
        assert sb.duplicate_subgraph(g, []) is g

    def test_invalid_node(self):
        with pytest.raises(GraphError, match="out of range"):
            sb.duplicate_subgraph(sb.Graph(2, ((0, 1),)), [5])

    def test_duplicate_node_in_list(self):
        with pytest.raises(GraphError, match="duplicate"):
            sb.duplicate_subgraph(sb.Graph(3, ((0, 1), (1, 2))), [1, 1])

    def test_mirrors_internal_and_external_edges(self):
        # path 0-1-2-3, mirror the middle edge pair {1, 2}
        g = sb.duplicate_subgraph(sb.Graph(4, ((0, 1), (1, 2), (2, 3))), [1, 2])
        assert g.n == 6
        assert g.has_edge(4, 5)  # internal edge mirrored
        assert g.has_edge(0, 4) and g.has_edge(3, 5)  # external edges mirrored
        assert not g.has_edge(1, 4) and not g.has_edge(2, 5)  # no twin links

    @pytest.mark.parametrize("seed", range(8))
    def test_zero_multiplicity_rises_with_antisymmetric_vector(self, seed):
        # mirrored sets with singular induced adjacency: here independent sets
        rng = np.random.default_rng(seed)
        n = int(rng.integers(6, 16))
        edges = set()
        for i in range(n - 1):
            edges.add((i, i + 1))
        for _ in range(n):
            u, v = rng.integers(0, n, size=2)
            if u != v:
                edges.add((min(u, v), max(u, v)))
        g = sb.Graph(n, tuple(edges))
        nodes = list(rng.choice(n, size=2, replace=False))
        if g.has_edge(nodes[0], nodes[1]):
            nodes = nodes[:1]
        before = _zero_eigs(g)
        g2 = sb.duplicate_subgraph(g, nodes)
        assert _zero_eigs(g2) >= before + 1
        # explicit antisymmetric eigenvector on the (p, q) pairs
        a = sb.normalized_adjacency(g2)
        deg = g2.degrees().astype(float)
        u = np.zeros(g2.n)
        p, q = nodes[0], g.n
        u[p] = np.sqrt(deg[p])
        u[q] = -np.sqrt(deg[q])
        u /= np.linalg.norm(u)
        assert np.max(np.abs(a @ u)) <= 1e-8
        assert abs(u[p] + u[q]) <= 1e-12

    def test_three_duplications_raise_multiplicity_by_three(self):
        # triangle base has no zero eigenvalue; each single-node mirror adds one
        g = sb.Graph(3, ((0, 1), (1, 2), (0, 2)))
        counts = [_zero_eigs(g)]
        for node in (0, 1, 2):
            g = sb.duplicate_subgraph(g, [node])
            counts.append(_zero_eigs(g))
        assert counts == [0, 1, 2, 3]


class TestSynthSpectralDataset:
    def test_deterministic(self):
        a = sb.synth_spectral_dataset(40, seed=3, noise=0.1)
        b = sb.synth_spectral_dataset(40, seed=3, noise=0.1)
        assert a.graph == b.graph
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_noise_free_labels_follow_projector(self):
        from specband.graphs import _synth_graph

        ds = sb.synth_spectral_dataset(40, seed=1, noise=0.0)
        spec = sb.eigendecompose(sb.normalized_adjacency(ds.graph))
        tol = grouping_tolerance(spec)
        u0 = spec.eigenvectors[:, np.abs(spec.eigenvalues) <= tol]
        # replay the generator's rng stream: graph draws first, then the vector
        rng = np.random.default_rng(1)
        g2, _ = _synth_graph(40, rng)
        assert g2 == ds.graph
        z = rng.standard_normal(40)
        proj = u0 @ (u0.T @ z)
        assert np.array_equal(ds.labels, (proj > 0).astype(np.int64))

    def test_zero_multiplicity_fraction(self):
        ds = sb.synth_spectral_dataset(200, seed=7, noise=0.0)
        spec = sb.eigendecompose(sb.normalized_adjacency(ds.graph))
        assert sb.zero_multiplicity(spec) / ds.graph.n >= 0.2

    def test_noise_flips_labels(self):
        clean = sb.synth_spectral_dataset(60, seed=2, noise=0.0)
        noisy = sb.synth_spectral_dataset(60, seed=2, noise=0.2)
        flipped = np.count_nonzero(clean.labels != noisy.labels)
        assert flipped == round(0.2 * 60)

    def test_too_small(self):
        with pytest.raises(GraphError):
            sb.synth_spectral_dataset(10, seed=0, noise=0.0)
