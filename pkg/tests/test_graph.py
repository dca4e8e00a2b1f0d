from __future__ import annotations

import random

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_g9, make_k23, make_triangle, random_multigraph
from lacelab.errors import BadAnchors, DanglingEdge, DuplicateLabel, SelfLoop, TooLarge
from lacelab.graph import build, canonical_key, canonical_order, key_hex, relabel


def test_build_minimal():
    G = build(["a", "b"], [("a", "b", 1)], {"a": (0, 0, 0), "b": (2, 0, 0)})
    assert G.vertices == ("a", "b")
    assert G.edges == (("a", "b", 1),)
    assert G.dim == 3
    assert G.label_of["b"] == (2, 0, 0)
    assert G.unlabeled == ()


def test_build_errors():
    with pytest.raises(SelfLoop):
        build(["a"], [("a", "a")], dim=3)
    with pytest.raises(DanglingEdge):
        build(["a"], [("a", "b")], dim=3)
    with pytest.raises(DuplicateLabel):
        build(["a", "b"], [("a", "b")], {"a": (0, 0, 0), "b": (0, 0, 0)})
    with pytest.raises(BadAnchors):
        build(["a", "b"], [("a", "b")], dim=3, marked=("a", "a", "b"))


def test_repeated_edges_accumulate():
    G = build(["a", "b"], [("a", "b"), ("b", "a", 2)], dim=3)
    assert G.mult("a", "b") == 3
    assert G.degree("a") == 3
    assert not G.graph.is_simple()


def test_handshake_on_random_graphs():
    rng = random.Random(3)
    for _ in range(50):
        n = rng.randint(2, 8)
        G = random_multigraph(rng, n_vertices=n, n_labeled=min(3, n))
        assert sum(G.degree(v) for v in G.vertices) == 2 * G.num_edges


def test_keys_distinguish_basic_shapes(triangle, k23):
    assert canonical_key(triangle) != canonical_key(k23)
    a = build(["x", "y"], [("x", "y")], {"x": (0, 0, 0)})
    b = build(["x", "y"], [("x", "y", 2)], {"x": (0, 0, 0)})
    assert canonical_key(a) != canonical_key(b)


def test_key_depends_on_label_points():
    a = build(["x", "y"], [("x", "y")], {"x": (0, 0, 0), "y": (1, 0, 0)})
    b = build(["x", "y"], [("x", "y")], {"x": (0, 0, 0), "y": (2, 0, 0)})
    assert canonical_key(a) != canonical_key(b)
    assert len(key_hex(canonical_key(a))) == 16


def test_exchangeable_anchors():
    G = make_g9()
    # swapping anchor labels gives a different labelled graph ...
    H = G.with_labels({"s2": G.label_of["s3"], "s3": G.label_of["s2"]})
    assert canonical_key(G) != canonical_key(H)
    # ... but the same graph modulo permutations of the anchors
    S = G.marked
    assert canonical_key(G, exchangeable=S) == canonical_key(H, exchangeable=S)


def test_too_large():
    vs = [f"v{i}" for i in range(17)]
    G = build(vs, list(zip(vs, vs[1:])), dim=2)
    with pytest.raises(TooLarge):
        canonical_key(G)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 9))
def test_key_invariant_under_internal_renaming(seed, n):
    rng = random.Random(seed)
    G = random_multigraph(rng, n_vertices=n, n_labeled=min(2, n))
    perm = list(G.vertices)
    rng.shuffle(perm)
    H = relabel(G, {v: f"z{w}" for v, w in zip(G.vertices, perm)})
    assert canonical_key(G) == canonical_key(H)


def _nx(G):
    M = nx.MultiGraph()
    for v in G.vertices:
        M.add_node(v, label=G.label_of.get(v))
    for a, b, m in G.edges:
        for _ in range(m):
            M.add_edge(a, b)
    return M


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_key_equality_matches_isomorphism_oracle(seed):
    rng = random.Random(seed)
    n = rng.randint(3, 6)
    G = random_multigraph(rng, n_vertices=n, n_labeled=1, max_edges=n + 2, dim=1)
    H = random_multigraph(rng, n_vertices=n, n_labeled=1, max_edges=n + 2, dim=1)
    H = H.with_labels({v: (0,) for v in H.labeled})
    G = G.with_labels({v: (0,) for v in G.labeled})
    iso = nx.is_isomorphic(_nx(G), _nx(H), node_match=lambda a, b: a["label"] == b["label"])
    assert (canonical_key(G) == canonical_key(H)) == iso


def test_canonical_order_is_a_permutation():
    G = make_k23()
    pos = canonical_order(G)
    assert sorted(pos.values()) == list(range(len(G.vertices)))


def test_fresh_id_skips_taken():
    G = make_triangle()
    assert G.fresh_id("s") == "s4"
    assert G.fresh_id("w", ["w1"]) == "w2"
