"""Multigraphs with labelled vertices, and canonical keys up to labelled isomorphism.

A :class:`DiagrammaticGraph` is a loopless multigraph together with a subset
of labelled vertices and an injective map from those vertices to points of
``Z^d``.  Values are immutable; all "modifying" helpers return new objects.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import (
    BadAnchors,
    DanglingEdge,
    DuplicateLabel,
    GraphError,
    SelfLoop,
    TooLarge,
)

Point = tuple[int, ...]
Edge = tuple[str, str]

MAX_KEY_VERTICES = 16


def _pair(a: str, b: str) -> Edge:
    return (a, b) if a <= b else (b, a)


def _check_id(v) -> str:
    if not isinstance(v, str) or not v or any(c.isspace() for c in v) or "#" in v:
        raise GraphError(f"invalid vertex id {v!r}")
    return v


@dataclass(frozen=True)
class Multigraph:
    """Loopless multigraph.

    ``vertices`` is sorted; ``edges`` holds ``(a, b, m)`` triples with
    ``a < b`` and multiplicity ``m >= 1``, sorted lexicographically.
    """

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str, int], ...]

    @cached_property
    def _adj(self) -> dict[str, dict[str, int]]:
        adj: dict[str, dict[str, int]] = {v: {} for v in self.vertices}
        for a, b, m in self.edges:
            adj[a][b] = m
            adj[b][a] = m
        return adj

    @cached_property
    def edge_mult(self) -> dict[Edge, int]:
        return {(a, b): m for a, b, m in self.edges}

    def neighbors(self, v: str) -> dict[str, int]:
        """Neighbour -> multiplicity map of ``v`` (a fresh dict)."""
        return dict(self._adj[v])

    def mult(self, a: str, b: str) -> int:
        return self._adj.get(a, {}).get(b, 0)

    def degree(self, v: str) -> int:
        return sum(self._adj[v].values())

    @property
    def num_edges(self) -> int:
        """|E(G)| counting parallel edges separately."""
        return sum(m for _, _, m in self.edges)

    @property
    def pairs(self) -> tuple[Edge, ...]:
        return tuple((a, b) for a, b, _ in self.edges)

    def is_simple(self) -> bool:
        return all(m == 1 for _, _, m in self.edges)

    def is_connected(self) -> bool:
        if not self.vertices:
            return True
        seen = {self.vertices[0]}
        stack = [self.vertices[0]]
        while stack:
            v = stack.pop()
            for w in self._adj[v]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == len(self.vertices)


@dataclass(frozen=True)
class DiagrammaticGraph:
    """A multigraph with labelled vertices ``S`` and labels in ``Z^dim``.

    ``marked`` optionally records an ordered anchor triple; it is carried
    through serialization but plays no role in canonical keys.
    """

    graph: Multigraph
    labels: tuple[tuple[str, Point], ...]
    dim: int
    marked: tuple[str, str, str] | None = field(default=None)

    # convenience views
    @cached_property
    def label_of(self) -> dict[str, Point]:
        return dict(self.labels)

    @cached_property
    def vertex_at(self) -> dict[Point, str]:
        return {p: v for v, p in self.labels}

    @property
    def labeled(self) -> frozenset[str]:
        return frozenset(self.label_of)

    @cached_property
    def unlabeled(self) -> tuple[str, ...]:
        lab = self.label_of
        return tuple(v for v in self.graph.vertices if v not in lab)

    @property
    def vertices(self) -> tuple[str, ...]:
        return self.graph.vertices

    @property
    def edges(self) -> tuple[tuple[str, str, int], ...]:
        return self.graph.edges

    @property
    def num_edges(self) -> int:
        return self.graph.num_edges

    def degree(self, v: str) -> int:
        return self.graph.degree(v)

    def mult(self, a: str, b: str) -> int:
        return self.graph.mult(a, b)

    def neighbors(self, v: str) -> dict[str, int]:
        return self.graph.neighbors(v)

    def with_marked(self, marked: Sequence[str] | None) -> "DiagrammaticGraph":
        return build(self.vertices, self.edges, self.label_of, dim=self.dim, marked=marked)

    def with_labels(self, labels: Mapping[str, Sequence[int]]) -> "DiagrammaticGraph":
        """Replace the label of some vertices (others keep theirs)."""
        new = dict(self.label_of)
        new.update({v: tuple(p) for v, p in labels.items()})
        return build(self.vertices, self.edges, new, dim=self.dim, marked=self.marked)

    def fresh_id(self, prefix: str, taken: Iterable[str] = ()) -> str:
        """First id ``prefix1``, ``prefix2``, ... not used by this graph."""
        used = set(self.graph.vertices) | set(taken)
        i = 1
        while f"{prefix}{i}" in used:
            i += 1
        return f"{prefix}{i}"


def build(
    vertices: Iterable[str],
    edges: Iterable[Sequence],
    labels: Mapping[str, Sequence[int]] | None = None,
    dim: int | None = None,
    marked: Sequence[str] | None = None,
) -> DiagrammaticGraph:
    """Validate raw data and return a :class:`DiagrammaticGraph`.

    ``edges`` items are ``(a, b)`` or ``(a, b, m)``; repeated pairs add up.
    """
    vs: set[str] = set()
    for v in vertices:
        _check_id(v)
        if v in vs:
            raise GraphError(f"duplicate vertex id {v!r}")
        vs.add(v)
    mult: dict[Edge, int] = {}
    for e in edges:
        if len(e) == 2:
            a, b = e
            m = 1
        elif len(e) == 3:
            a, b, m = e
        else:
            raise GraphError(f"malformed edge {e!r}")
        if not isinstance(m, int) or m < 1:
            raise GraphError(f"edge multiplicity must be a positive integer, got {m!r}")
        if a == b:
            raise SelfLoop(f"self-loop at {a!r}")
        for x in (a, b):
            if x not in vs:
                raise DanglingEdge(f"edge endpoint {x!r} is not a vertex")
        p = _pair(a, b)
        mult[p] = mult.get(p, 0) + m

    labels = dict(labels or {})
    lab: dict[str, Point] = {}
    seen: dict[Point, str] = {}
    for v, pt in labels.items():
        if v not in vs:
            raise DanglingEdge(f"labelled vertex {v!r} is not a vertex")
        pt = tuple(int(c) for c in pt)
        if dim is None:
            dim = len(pt)
        if len(pt) != dim:
            raise GraphError(f"label of {v!r} has {len(pt)} coordinates, expected {dim}")
        if pt in seen:
            raise DuplicateLabel(f"vertices {seen[pt]!r} and {v!r} share label {pt}")
        seen[pt] = v
        lab[v] = pt
    if dim is None:
        raise GraphError("dimension unknown: pass dim or label at least one vertex")
    if not isinstance(dim, int) or dim < 1:
        raise GraphError(f"dimension must be a positive integer, got {dim!r}")

    mk = None
    if marked is not None:
        mk = tuple(marked)
        if len(mk) != 3 or len(set(mk)) != 3 or any(v not in vs for v in mk):
            raise BadAnchors(f"marked must name 3 distinct vertices, got {mk!r}")

    g = Multigraph(
        vertices=tuple(sorted(vs)),
        edges=tuple(sorted((a, b, m) for (a, b), m in mult.items())),
    )
    return DiagrammaticGraph(
        graph=g, labels=tuple(sorted(lab.items())), dim=dim, marked=mk
    )


# ---------------------------------------------------------------------------
# canonical form


def _refine(vs, nbrs, col):
    ncells = len(set(col.values()))
    while True:
        sig = {
            v: (col[v], tuple(sorted((col[w], m) for w, m in nbrs[v].items())))
            for v in vs
        }
        keys = sorted(set(sig.values()))
        rank = {k: i for i, k in enumerate(keys)}
        col = {v: rank[sig[v]] for v in vs}
        if len(keys) == ncells:
            return col
        ncells = len(keys)


def _twin_reps(vs, nbrs, init):
    """Map each vertex to the least member of its twin class.

    ``v`` and ``w`` are twins when swapping them is an automorphism that
    respects the initial colouring.
    """
    rep = {}
    for v in vs:
        rep[v] = v
        for w in vs:
            if w >= v:
                break
            if rep[w] != w or init[w] != init[v]:
                continue
            nv = {u: m for u, m in nbrs[v].items() if u != w}
            nw = {u: m for u, m in nbrs[w].items() if u != v}
            if nv == nw:
                rep[v] = w
                break
    return rep


def canonical_form(
    G: DiagrammaticGraph, exchangeable: Iterable[str] | None = None
) -> tuple[tuple, tuple[str, ...]]:
    """Return ``(encoding, vertex_order)`` of the canonical labelling.

    Labelled vertices are pinned by their label; vertices in
    ``exchangeable`` instead share a single colour, so the result is
    invariant under permutations of that set.
    """
    vs = G.graph.vertices
    if len(vs) > MAX_KEY_VERTICES:
        raise TooLarge(f"{len(vs)} vertices exceeds the cap of {MAX_KEY_VERTICES}")
    exch = set(exchangeable or ())
    lab = G.label_of
    init = {}
    for v in vs:
        if v in exch:
            init[v] = (1,)
        elif v in lab:
            init[v] = (0, lab[v])
        else:
            init[v] = (2,)
    nbrs = {v: G.graph._adj[v] for v in vs}
    keys = sorted(set(init.values()))
    col0 = {v: keys.index(init[v]) for v in vs}
    reps = _twin_reps(vs, nbrs, init)

    best: list = [None, None]

    def leaf(col):
        order = tuple(sorted(vs, key=lambda v: col[v]))
        pos = {v: i for i, v in enumerate(order)}
        edges = tuple(
            sorted((min(pos[a], pos[b]), max(pos[a], pos[b]), m) for a, b, m in G.graph.edges)
        )
        enc = (G.dim, tuple(init[v] for v in order), edges)
        if best[0] is None or enc < best[0]:
            best[0], best[1] = enc, order

    def search(col):
        col = _refine(vs, nbrs, col)
        cells: dict[int, list[str]] = {}
        for v in vs:
            cells.setdefault(col[v], []).append(v)
        target = None
        for c in sorted(cells):
            if len(cells[c]) > 1:
                target = c
                break
        if target is None:
            leaf(col)
            return
        cell = cells[target]
        tried = set()
        for v in cell:
            r = reps[v]
            if r in tried:
                continue
            tried.add(r)
            new = {
                w: 2 * col[w] + (1 if col[w] == target and w != v else 0) for w in vs
            }
            search(new)

    search(col0)
    return best[0], best[1]


def canonical_key(G: DiagrammaticGraph, exchangeable: Iterable[str] | None = None) -> bytes:
    """Byte string equal for two graphs iff they are labelled-isomorphic."""
    enc, _ = canonical_form(G, exchangeable)
    return repr(enc).encode()


def key_hex(key: bytes, size: int = 8) -> str:
    """Short stable hex digest of a canonical key, used in traces."""
    return hashlib.blake2b(key, digest_size=size).hexdigest()


def canonical_order(G: DiagrammaticGraph) -> dict[str, int]:
    """Position of every vertex in the canonical labelling."""
    _, order = canonical_form(G)
    return {v: i for i, v in enumerate(order)}


def relabel(G: DiagrammaticGraph, mapping: Mapping[str, str]) -> DiagrammaticGraph:
    """Rename vertex ids (vertices absent from ``mapping`` keep theirs)."""
    f = lambda v: mapping.get(v, v)  # noqa: E731
    marked = tuple(f(v) for v in G.marked) if G.marked else None
    return build(
        [f(v) for v in G.vertices],
        [(f(a), f(b), m) for a, b, m in G.edges],
        {f(v): p for v, p in G.labels},
        dim=G.dim,
        marked=marked,
    )
