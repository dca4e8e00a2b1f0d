"""Exhaustive generation of small anchored graphs with prescribed degrees."""

from __future__ import annotations

from itertools import combinations
from typing import Iterator, Sequence

from .errors import Unsupported
from .graph import DiagrammaticGraph, build, canonical_key
from .reduction import has_adjacent_internal_pair, h_reduce, is_h_reducible, is_three_connected

ANCHOR_IDS = ("s1", "s2", "s3")


def default_anchor_labels(dim: int = 3) -> dict[str, tuple[int, ...]]:
    """Distinct lattice points for the three anchors (0, 4e1, 4e2)."""
    z = [0] * dim
    e1 = list(z)
    e1[0] = 4
    e2 = list(z)
    e2[1 % dim] = 4 if dim > 1 else -4
    return {"s1": tuple(z), "s2": tuple(e1), "s3": tuple(e2)}


def _degree_graphs(targets: Sequence[int], classes: Sequence[int]) -> Iterator[list[tuple[int, int]]]:
    """Simple graphs on ``range(n)`` with the given degrees.

    Untouched vertices of the same class are interchangeable, so only the
    lowest-indexed ones are ever picked; this prunes symmetric duplicates
    without losing any isomorphism class.
    """
    n = len(targets)
    rem = list(targets)
    touched = [False] * n
    edges: list[tuple[int, int]] = []

    def rec(i):
        while i < n and rem[i] == 0:
            i += 1
        if i == n:
            yield list(edges)
            return
        cand = [j for j in range(i + 1, n) if rem[j] > 0]
        need = rem[i]
        if len(cand) < need:
            return
        for combo in combinations(cand, need):
            ok = True
            chosen = set(combo)
            for j in combo:
                if not touched[j]:
                    for k in cand:
                        if k >= j:
                            break
                        if not touched[k] and classes[k] == classes[j] and k not in chosen:
                            ok = False
                            break
                if not ok:
                    break
            if not ok:
                continue
            saved = [touched[j] for j in combo] + [touched[i]]
            for j in combo:
                rem[j] -= 1
                touched[j] = True
                edges.append((i, j))
            rem[i] = 0
            touched[i] = True
            yield from rec(i + 1)
            rem[i] = need
            for j in combo:
                rem[j] += 1
                edges.pop()
            for j, t in zip(list(combo) + [i], saved):
                touched[j] = t

    yield from rec(0)


def _anchored(internal_degrees: Sequence[int], edges, dim: int) -> DiagrammaticGraph:
    k = len(internal_degrees)
    names = list(ANCHOR_IDS) + [f"v{i}" for i in range(1, k + 1)]
    return build(
        names,
        [(names[a], names[b]) for a, b in edges],
        default_anchor_labels(dim),
        dim=dim,
        marked=ANCHOR_IDS,
    )


def _generate(internal_degrees: Sequence[int], dim: int) -> list[DiagrammaticGraph]:
    targets = [2, 2, 2] + list(internal_degrees)
    classes = [0, 0, 0] + [1 + d for d in internal_degrees]
    found: dict[bytes, DiagrammaticGraph] = {}
    for edges in _degree_graphs(targets, classes):
        G = _anchored(internal_degrees, edges, dim)
        if not G.graph.is_connected() or not is_three_connected(G, ANCHOR_IDS):
            continue
        key = canonical_key(G, exchangeable=ANCHOR_IDS)
        found.setdefault(key, G)
    return [found[k] for k in sorted(found)]


def enumerate_admissible(k: int, dim: int = 3) -> list[DiagrammaticGraph]:
    """All admissible graphs with ``k`` internal vertices, up to isomorphism.

    Admissible: simple, connected, anchors ``s1, s2, s3`` of degree 2,
    internal vertices of degree 3, 3-connected to the anchors.  Graphs
    differing by a permutation of the anchors are identified.  The order is
    deterministic (sorted by canonical key).
    """
    if not isinstance(k, int) or k < 0 or k % 2 or k > 8:
        raise Unsupported(f"k must be an even integer in [0, 8], got {k!r}")
    return _generate([3] * k, dim)


def usable_edges(G: DiagrammaticGraph, S: Sequence[str] | None = None) -> list[tuple[str, str]]:
    """H-reducible edges whose reduction stays simple and 3-connected."""
    S = S or G.marked
    out = []
    for e in G.graph.pairs:
        if is_h_reducible(G, e, S):
            R = h_reduce(G, e, S)
            if R.graph.is_simple() and is_three_connected(R, S):
                out.append(e)
    return out


def search_stuck(max_internal: int = 4, dim: int = 3, first_only: bool = False) -> list[DiagrammaticGraph]:
    """Anchored graphs with internal degrees in {3, 4} on which reduction is stuck.

    Returned graphs are simple, connected, 3-connected to the anchors, have
    a degree-4 internal vertex and an edge between two internal vertices,
    yet every H-reduction either creates a parallel edge or breaks
    3-connectivity.  With all internal degrees equal to 3 this cannot happen.
    """
    out = []
    for k in range(1, max_internal + 1):
        for n4 in range(1, k + 1):
            degrees = [4] * n4 + [3] * (k - n4)
            if (6 + sum(degrees)) % 2:
                continue
            for G in _generate(degrees, dim):
                if has_adjacent_internal_pair(G) and not usable_edges(G):
                    out.append(G)
                    if first_only:
                        return out
    return out
