import random

import numpy as np
import pytest
import scipy.sparse as sp

from conftest import random_adjacency, random_tree
from sylstm.depgraph import (ROOT, DependencyParse, GraphError, ParseError, TweetGraph,
                             batch_graphs, build_graph, normalize, read_adjacency_cache,
                             read_conllu, write_adjacency_cache, write_conllu)


def dense_normalized(edges, n, alpha=1.0):
    """Brute-force dense D^{-1/2} (A + I) D^{-1/2}."""
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = alpha
    a_tilde = a + np.eye(n)
    d = a_tilde.sum(axis=1)
    return a_tilde / np.sqrt(np.outer(d, d))


class TestReadConllu:
    def test_two_token_block(self, tmp_path):
        f = tmp_path / "x.conllu"
        f.write_text("1\tI\t_\t_\t_\t_\t2\tnsubj\t_\t_\n"
                     "2\trun\t_\t_\t_\t_\t0\troot\t_\t_\n\n")
        parses = read_conllu(str(f))
        assert len(parses) == 1
        assert parses[0].tokens == ("I", "run")
        assert parses[0].heads == (1, ROOT)

    def test_empty_file(self, tmp_path):
        f = tmp_path / "x.conllu"
        f.write_text("")
        assert read_conllu(str(f)) == []

    def test_cycle_rejected(self, tmp_path):
        f = tmp_path / "x.conllu"
        f.write_text("1\ta\t_\t_\t_\t_\t2\tdep\t_\t_\n"
                     "2\tb\t_\t_\t_\t_\t1\tdep\t_\t_\n"
                     "3\tc\t_\t_\t_\t_\t0\troot\t_\t_\n\n")
        with pytest.raises(ParseError, match="sentence 0"):
            read_conllu(str(f))

    def test_multiword_ranges_skipped(self, tmp_path):
        f = tmp_path / "x.conllu"
        f.write_text("1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
                     "1\tdo\t_\t_\t_\t_\t0\troot\t_\t_\n"
                     "2\tnot\t_\t_\t_\t_\t1\tadvmod\t_\t_\n\n")
        assert read_conllu(str(f))[0].tokens == ("do", "not")

    def test_ragged_columns(self, tmp_path):
        f = tmp_path / "x.conllu"
        f.write_text("1\ta\t0\troot\n\n")
        with pytest.raises(ParseError, match="10 columns"):
            read_conllu(str(f))

    def test_comments_ignored_and_round_trip(self, tmp_path):
        parses = [random_tree(n, random.Random(n)) for n in (1, 3, 7)]
        f = tmp_path / "x.conllu"
        write_conllu(str(f), parses)
        assert read_conllu(str(f)) == parses


class TestParseValidation:
    def test_multiple_roots(self):
        with pytest.raises(ParseError, match="root"):
            DependencyParse(("a", "b"), (ROOT, ROOT), ("root", "root"))

    def test_ragged_arrays(self):
        with pytest.raises(ParseError):
            DependencyParse(("a", "b"), (ROOT,), ("root", "dep"))

    def test_self_head(self):
        with pytest.raises(ParseError):
            DependencyParse(("a", "b"), (ROOT, 1), ("root", "dep"))


class TestBuildGraph:
    def test_single_dependency(self):
        p = DependencyParse(("a", "b"), (1, ROOT), ("dep", "root"))
        g = build_graph(p)
        assert g.n == 2 and g.edges == frozenset({(0, 1)})

    def test_chain(self):
        p = DependencyParse(("a", "b", "c"), (1, 2, ROOT), ("dep", "dep", "root"))
        assert build_graph(p).edges == frozenset({(0, 1), (1, 2)})

    def test_single_token(self):
        p = DependencyParse(("a",), (ROOT,), ("root",))
        g = build_graph(p)
        assert g.n == 1 and g.edges == frozenset()

    def test_no_self_loops_in_edge_set(self):
        rng = random.Random(0)
        for _ in range(50):
            g = build_graph(random_tree(rng.randint(1, 10), rng))
            assert all(i != j for i, j in g.edges)

    def test_truncation_drops_cross_edges(self):
        p = DependencyParse(("a", "b", "c", "d"), (3, 0, 1, ROOT),
                            ("dep", "dep", "dep", "root"))
        g = build_graph(p, max_len=2)
        assert g.n == 2 and g.edges == frozenset({(0, 1)})


class TestNormalize:
    def test_two_node_closed_form(self):
        g = TweetGraph(n=2, edges=frozenset({(0, 1)}))
        adj = normalize(g)
        assert np.allclose(adj.matrix.toarray(), [[0.5, 0.5], [0.5, 0.5]])
        assert np.array_equal(adj.degrees, [2.0, 2.0])

    def test_isolated_node(self):
        adj = normalize(TweetGraph(n=1, edges=frozenset()))
        assert adj.matrix.toarray() == [[1.0]]

    def test_against_dense_oracle(self):
        rng = random.Random(1)
        for _ in range(50):
            tree = random_tree(rng.randint(1, 6), rng)
            g = build_graph(tree)
            adj = normalize(g)
            expected = dense_normalized(g.edges, g.n)
            assert np.max(np.abs(adj.matrix.toarray() - expected)) < 1e-12

    def test_alpha_must_be_positive(self):
        with pytest.raises(GraphError):
            normalize(TweetGraph(n=2, edges=frozenset({(0, 1)})), alpha=0.0)

    def test_alpha_weighting(self):
        g = TweetGraph(n=2, edges=frozenset({(0, 1)}))
        adj = normalize(g, alpha=2.0)
        assert np.max(np.abs(adj.matrix.toarray() - dense_normalized(g.edges, 2, 2.0))) < 1e-12


class TestInvariants:
    def test_symmetry_degree_spectrum_direction(self):
        rng = random.Random(7)
        for _ in range(100):
            tree = random_tree(rng.randint(1, 12), rng)
            g = build_graph(tree)
            adj = normalize(g)
            dense = adj.matrix.toarray()
            assert (adj.matrix != adj.matrix.T).nnz == 0
            # degree identity: row sums of A + I equal the stored degrees
            a_tilde = dense * np.sqrt(np.outer(adj.degrees, adj.degrees))
            assert np.allclose(a_tilde.sum(axis=1), adj.degrees)
            eigs = np.linalg.eigvalsh(dense)
            assert eigs.min() >= -1 - 1e-9 and eigs.max() <= 1 + 1e-9
            # reversing every dependency direction yields the same edge set
            swapped = {(min(h, d), max(h, d))
                       for d, h in enumerate(tree.heads) if h != ROOT}
            assert swapped == set(g.edges)

    def test_entries_in_unit_interval(self):
        rng = random.Random(3)
        for _ in range(50):
            adj = random_adjacency(rng.randint(1, 10), rng)
            data = adj.matrix.data
            assert (data > 0).all() and (data <= 1).all()


class TestBatchGraphs:
    def test_two_graphs_block_diagonal(self):
        g = TweetGraph(n=2, edges=frozenset({(0, 1)}))
        packed, offsets = batch_graphs([normalize(g), normalize(g)])
        assert packed.n == 4 and offsets == [0, 2]
        dense = packed.matrix.toarray()
        assert not dense[:2, 2:].any() and not dense[2:, :2].any()

    def test_single_graph_identity_packing(self):
        adj = random_adjacency(5, random.Random(0))
        packed, offsets = batch_graphs([adj])
        assert offsets == [0]
        assert (packed.matrix != adj.matrix).nnz == 0

    def test_empty_list_rejected(self):
        with pytest.raises(GraphError):
            batch_graphs([])


def test_adjacency_cache_round_trip(tmp_path):
    rng = random.Random(5)
    adjs = {f"id{i}": random_adjacency(rng.randint(1, 9), rng) for i in range(10)}
    path = str(tmp_path / "adj.bin")
    write_adjacency_cache(path, adjs)
    loaded = read_adjacency_cache(path)
    assert set(loaded) == set(adjs)
    for key in adjs:
        assert loaded[key].n == adjs[key].n
        assert np.max(np.abs((loaded[key].matrix - adjs[key].matrix).toarray())) == 0
        assert np.allclose(loaded[key].degrees, adjs[key].degrees)
