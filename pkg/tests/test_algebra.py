from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_triangle, random_multigraph
from lacelab.algebra import (
    GeneralizedDiagram,
    WSet,
    convolve,
    double_convolve,
    expand,
    uplus,
    w_edge,
)
from lacelab.dgf import write_dgf
from lacelab.errors import DegeneratePair, LabelCollision, ScriptError
from lacelab.graph import build, canonical_key

O, X, X2, Y = (0, 0, 0), (2, 0, 0), (0, 3, 0), (1, 1, 1)


def edge(a=O, b=X):
    return build(["p1", "p2"], [("p1", "p2")], {"p1": a, "p2": b})


def degrees(G):
    return sorted(G.degree(v) for v in G.vertices)


def test_uplus_three_cases():
    G = edge()
    both = uplus(G, O, X)
    assert both.vertices == G.vertices and both.num_edges == 2
    assert both.mult("p1", "p2") == 2
    one = uplus(G, O, X2)
    assert len(one.vertices) == 3 and one.num_edges == 2
    assert one.vertex_at[X2] not in G.vertices
    none = uplus(G, X2, Y)
    assert len(none.vertices) == 4 and none.num_edges == 2
    with pytest.raises(DegeneratePair):
        uplus(G, X, X)


def test_uplus_keeps_marked():
    T = make_triangle()
    assert uplus(T, (0, 0, 0), (4, 0, 0)).marked == T.marked


def test_convolve_single_edge_is_a_star():
    fam = convolve(edge(), X2)
    assert len(fam) == 1 and fam.raw_count == 1
    (M,) = fam.members
    assert M.num_edges == 3 and len(M.vertices) == 4
    centre = [v for v in M.unlabeled]
    assert len(centre) == 1 and M.degree(centre[0]) == 3
    assert {O, X, X2} == set(M.vertex_at)


def test_convolve_present_label_returns_g():
    G = edge()
    fam = convolve(G, X)
    assert fam.members == (G,)


def test_convolve_triangle_counts():
    T = make_triangle()
    fam = convolve(T, Y)
    assert fam.raw_count == 3 and len(fam) == 3
    assert all(M.num_edges == 5 for M in fam)


def test_double_convolve_edge():
    fam = double_convolve(edge(), X2)
    assert len(fam) == 1
    (M,) = fam.members
    assert M.num_edges == 5 and len(M.vertices) == 5
    assert degrees(M) == [1, 1, 2, 3, 3]


def test_double_convolve_path():
    P = build(["a", "b", "c"], [("a", "b"), ("b", "c")], {"a": O, "b": X, "c": X2})
    fam = double_convolve(P, Y)
    assert fam.raw_count == 3 and len(fam) == 3
    assert all(M.num_edges == 6 for M in fam)
    with pytest.raises(LabelCollision):
        double_convolve(P, X)


def test_w_edge_windows():
    G = edge()
    single = w_edge(G, X, WSet(((0, 0, 0),)))
    assert single.members == (uplus(G, X, O),)
    two = w_edge(G, X2, [(0, 0, 0), (1, 0, 0)])
    assert len(two) == 2
    # w == x contributes G itself
    loop = w_edge(G, O, [(0, 0, 0)])
    assert loop.members == (G,)
    with pytest.raises(ValueError):
        WSet(((1, 0, 0),))
    with pytest.raises(ValueError):
        WSet(((0, 0, 0), (0, 0, 0)))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_counts_and_deltas(seed):
    rng = random.Random(seed)
    G = random_multigraph(rng, n_vertices=rng.randint(2, 6), n_labeled=2, max_edges=7)
    u = (9, 9, 9)
    e = G.num_edges
    c = convolve(G, u)
    assert c.raw_count == e
    assert all(M.num_edges == e + 2 and len(M.vertices) == len(G.vertices) + 2 for M in c)
    c2 = double_convolve(G, u)
    assert c2.raw_count == e + e * (e - 1) // 2
    assert all(M.num_edges == e + 4 for M in c2)
    assert len(set(c2.keys)) == len(c2)


def test_w_edge_never_grows_beyond_window():
    rng = random.Random(5)
    for _ in range(20):
        G = random_multigraph(rng, n_vertices=5, n_labeled=2, max_edges=6)
        W = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (-1, 0, 0)]
        x = G.label_of[min(G.labeled)]
        assert len(w_edge(G, x, W)) <= len(W)


def test_expand_ex_graph():
    fam = expand("edge (0,0,0) (2,0,0)\nconvolve (0,3,0)\nuplus (0,0,0) (0,3,0)\n")
    assert len(fam) == 1
    (M,) = fam.members
    assert M.num_edges == 4
    by_hand = build(
        ["o", "x", "y", "c"],
        [("o", "c"), ("x", "c"), ("y", "c"), ("o", "y")],
        {"o": O, "x": X, "y": X2},
    )
    assert canonical_key(M) == canonical_key(by_hand)


def test_expand_seed_only(tmp_path):
    T = make_triangle()
    (tmp_path / "t.dgf").write_text(write_dgf(T))
    fam = expand("# just the seed\nseed t.dgf\n", base_dir=tmp_path)
    assert fam.members == (T,)


def test_expand_raw_count_before_dedup():
    fam = expand("edge (0,0,0) (2,0,0)\nconvolve (0,3,0)\nconvolve (1,1,1)\n")
    assert fam.raw_count == 3
    assert len(fam) <= 3


def _brute_two_convolutions(G, u, v):
    keys = set()
    for M in convolve(G, u).members:
        for N in convolve(M, v).members:
            keys.add(canonical_key(N))
    return keys


def test_expand_matches_definition():
    fam = expand("edge (0,0,0) (2,0,0)\nconvolve (0,3,0)\nconvolve (1,1,1)\n")
    assert set(fam.keys) == _brute_two_convolutions(edge(), X2, Y)


def test_expand_is_deterministic():
    s = "edge (0,0) (1,0)\nconvolve2 (0,2)\nwedge (0,2) W{(0,0);(1,1)}\nconvolve (3,3)\n"
    a, b = expand(s), expand(s)
    assert a.keys == b.keys and a.provenance == b.provenance


@pytest.mark.parametrize(
    "script, line",
    [
        ("convolve (1,0)\n", 1),
        ("edge (0,0) (1,0)\nedge (0,0) (1,0)\n", 2),
        ("edge (0,0) (1,0)\nfrobnicate\n", 2),
        ("edge (0,0) (1,0)\n\nuplus (0,0)\n", 3),
        ("edge (0,0) (1,0)\nwedge (0,0) W{(1,1)}\n", 2),
    ],
)
def test_script_errors(script, line):
    with pytest.raises(ScriptError) as exc:
        expand(script)
    assert exc.value.line == line


def test_family_rejects_mixed_dimensions():
    with pytest.raises(ValueError):
        GeneralizedDiagram.from_items([(edge(), "a"), (edge((0, 0), (1, 0)), "b")])
