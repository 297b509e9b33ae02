import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgmlearn import kernels
from dgmlearn.gaifman import (build_gaifman_graph, generate_neighborhoods, graph_stats, hop_distance,
                              r_neighborhood, write_edge_list)
from dgmlearn.kb import parse_facts

from conftest import D1, D2, D3, E1, T1, T2


def test_statin_edges(statin_kb):
    g = build_gaifman_graph(statin_kb)
    expected = {frozenset(p) for p in [(D1, T1), (D2, T2), (D1, E1), (D3, E1), (D2, E1)]}
    assert {frozenset(e) for e in g.edges()} == expected
    assert len(g) == 6


def test_target_edge_included_when_asked(statin_kb):
    g = build_gaifman_graph(statin_kb, exclude_target=False)
    assert hop_distance(g, D1, D2) == 1


def test_unary_facts_no_edges():
    g = build_gaifman_graph(parse_facts("A(x).\nA(y).\nB(z).\n"))
    assert len(g) == 3 and g.n_edges == 0


def test_ternary_fact_is_triangle():
    g = build_gaifman_graph(parse_facts("R(a, b, c)."))
    assert set(g.edges()) == {("a", "b"), ("a", "c"), ("b", "c")}


def test_statin_distances(statin_kb):
    g = build_gaifman_graph(statin_kb)
    assert hop_distance(g, D1, T1) == 1
    assert hop_distance(g, D1, D2) == 2
    assert hop_distance(g, D1, D1) == 0


def test_statin_neighborhoods(statin_kb):
    g = build_gaifman_graph(statin_kb)
    assert r_neighborhood(g, D1, 1) == {T1, E1}
    assert r_neighborhood(g, D1, 2) == {T1, E1, D2, D3}


def test_isolated_and_unknown():
    kb = parse_facts("A(x).\nP(y, z).\n")
    g = build_gaifman_graph(kb)
    assert r_neighborhood(g, "x", 2) == set()
    assert hop_distance(g, "x", "y") is None
    with pytest.raises(KeyError):
        hop_distance(g, "x", "nope")
    with pytest.raises(KeyError):
        r_neighborhood(g, "nope", 1)


def test_statin_sample_union(statin_kb):
    g = build_gaifman_graph(statin_kb)
    [nb] = generate_neighborhoods(g, (D1, D2), 1, 10, 1, 0)
    assert nb.members == {T1, T2, E1}
    assert nb.index == 0


def test_k1_single_neighbor_always_kept():
    g = build_gaifman_graph(parse_facts("P(a, x).\nP(b, y).\nP(y, z).\n"))
    for nb in generate_neighborhoods(g, ("a",), 1, 1, 7, 3):
        assert nb.members == {"x"}


def test_w_samples_indexed(planted_kb):
    g = build_gaifman_graph(planted_kb)
    nbs = generate_neighborhoods(g, ("Drug000", "Drug001"), 1, 2, 5, 0)
    assert [nb.index for nb in nbs] == [0, 1, 2, 3, 4]
    assert all(nb.r == 1 and nb.k == 2 for nb in nbs)


def test_sampling_caps_per_entity_and_is_deterministic(planted_kb):
    g = build_gaifman_graph(planted_kb)
    tup = ("Drug000", "Drug001")
    a = generate_neighborhoods(g, tup, 2, 3, 4, 11)
    b = generate_neighborhoods(g, tup, 2, 3, 4, 11)
    assert [x.members for x in a] == [x.members for x in b]
    full = r_neighborhood(g, tup[0], 2) | r_neighborhood(g, tup[1], 2)
    for nb in a:
        assert len(nb.members) <= 6
        assert nb.members <= full


def test_missing_entity_contributes_nothing(statin_kb):
    g = build_gaifman_graph(statin_kb)
    with pytest.warns(UserWarning):
        [nb] = generate_neighborhoods(g, (D1, "Nobody"), 1, 10, 1, 0)
    assert nb.members == {T1, E1}


def test_edge_list_and_stats(statin_kb, tmp_path):
    g = build_gaifman_graph(statin_kb)
    write_edge_list(g, tmp_path / "g.tsv")
    lines = (tmp_path / "g.tsv").read_text().splitlines()
    assert lines == sorted(lines) and len(lines) == 5
    assert all(len(l.split("\t")) == 2 for l in lines)
    stats = graph_stats(g)
    assert stats["nodes"] == 6 and stats["edges"] == 5
    assert stats["degree_histogram"] == {1: 3, 2: 2, 3: 1}


def _floyd(n, edges):
    inf = 10 ** 9
    d = np.full((n, n), inf)
    np.fill_diagonal(d, 0)
    for a, b in edges:
        d[a, b] = d[b, a] = 1
    for m in range(n):
        d = np.minimum(d, d[:, [m]] + d[[m], :])
    return d, inf


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 25), st.lists(st.tuples(st.integers(0, 24), st.integers(0, 24)), max_size=60),
       st.integers(1, 3))
def test_distance_properties_random(n, pairs, r):
    pairs = [(a % n, b % n) for a, b in pairs if a % n != b % n]
    text = "\n".join(f"E(n{a}, n{b})." for a, b in pairs) + "\n" + \
        "\n".join(f"V(n{i})." for i in range(n))
    g = build_gaifman_graph(parse_facts(text))
    ids = [g.node_id(f"n{i}") for i in range(n)]
    d, inf = _floyd(n, pairs)
    for i in range(n):
        for j in range(n):
            got = hop_distance(g, f"n{i}", f"n{j}")
            assert got == (None if d[i, j] >= inf else int(d[i, j]))
            assert got == hop_distance(g, f"n{j}", f"n{i}")
        nr = r_neighborhood(g, f"n{i}", r)
        assert nr <= r_neighborhood(g, f"n{i}", r + 1)
    # sampling with k above every degree is the identity
    big = generate_neighborhoods(g, ("n0", "n1"), r, 10 ** 6, 3, 5)
    assert len({nb.members for nb in big}) == 1
    for nb in generate_neighborhoods(g, ("n0", "n1"), r, 2, 3, 5):
        for m in nb.members:
            ds = [hop_distance(g, m, e) for e in ("n0", "n1")]
            assert any(x is not None and x <= r for x in ds)


def test_bfs_kernels_agree(planted_kb):
    g = build_gaifman_graph(planted_kb)
    for src in range(0, len(g), 7):
        for depth in (-1, 1, 2, 3):
            a = kernels.bfs_depths_nb(g.indptr, g.indices, src, depth)
            b = kernels.bfs_depths_np(g.indptr, g.indices, src, depth)
            np.testing.assert_array_equal(a, b)
