"""H-reduction, 3-connectivity to an anchor triple, and reduction to a fixpoint."""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

from .errors import (
    BadAnchors,
    HypothesisViolation,
    InvariantBroken,
    NotReducible,
    UnknownEdge,
)
from .graph import DiagrammaticGraph, build, canonical_key, canonical_order, key_hex

BOTH_DEG3 = "both-deg-3"
ONE_DEG3 = "one-deg-3"
BOTH_GE4 = "both-ge-4"

TRIANGLE = "Triangle"
K23 = "K23"
OTHER = "Other"


def anchors_of(G: DiagrammaticGraph, S: Sequence[str] | None) -> tuple[str, str, str]:
    """Resolve the anchor triple: explicit ``S``, else ``G.marked``."""
    if S is None:
        S = G.marked
    if S is None:
        raise BadAnchors("no anchor triple given and the graph has no 'marked' line")
    S = tuple(S)
    vs = set(G.vertices)
    if len(S) != 3 or len(set(S)) != 3 or any(s not in vs for s in S):
        raise BadAnchors(f"anchors must be 3 distinct vertices of G, got {S!r}")
    return S  # type: ignore[return-value]


def _require_edge(G: DiagrammaticGraph, e: Sequence[str]) -> tuple[str, str]:
    a, b = e
    if G.mult(a, b) == 0:
        raise UnknownEdge(f"{a}-{b} is not an edge")
    return a, b


def is_h_reducible(G: DiagrammaticGraph, e: Sequence[str], S: Sequence[str] | None = None) -> bool:
    """Both endpoints outside S, of degree at least 3, joined by a single edge."""
    S = anchors_of(G, S)
    x, y = _require_edge(G, e)
    return (
        x not in S
        and y not in S
        and G.mult(x, y) == 1
        and G.degree(x) >= 3
        and G.degree(y) >= 3
    )


def reduction_case(G: DiagrammaticGraph, e: Sequence[str]) -> str:
    dx, dy = G.degree(e[0]), G.degree(e[1])
    if dx == 3 and dy == 3:
        return BOTH_DEG3
    if dx == 3 or dy == 3:
        return ONE_DEG3
    return BOTH_GE4


def _others(nbrs: dict[str, int], skip: str) -> list[str]:
    return [w for w, m in sorted(nbrs.items()) if w != skip for _ in range(m)]


def h_reduce(G: DiagrammaticGraph, e: Sequence[str], S: Sequence[str] | None = None) -> DiagrammaticGraph:
    """Apply the H-reduction of ``G`` along ``e``.

    A degree-3 endpoint is removed and its two remaining stubs are joined;
    a pair of stubs that would form a self-loop is dropped.
    """
    S = anchors_of(G, S)
    if not is_h_reducible(G, e, S):
        raise NotReducible(f"edge {e[0]}-{e[1]} is not H-reducible")
    x, y = e
    case = reduction_case(G, e)
    if case == ONE_DEG3 and G.degree(x) != 3:
        x, y = y, x
    mult = {(a, b): m for a, b, m in G.edges}
    vs = set(G.vertices)

    def dec(a, b):
        p = (a, b) if a <= b else (b, a)
        mult[p] -= 1
        if not mult[p]:
            del mult[p]

    def inc(a, b):
        if a == b:
            return  # loop of weight one
        p = (a, b) if a <= b else (b, a)
        mult[p] = mult.get(p, 0) + 1

    if case == BOTH_GE4:
        dec(x, y)
    else:
        removed = [x] if case == ONE_DEG3 else [x, y]
        joins = []
        for v in removed:
            other = y if v == x else x
            stubs = _others(G.neighbors(v), other)
            joins.append(stubs)
            for w in stubs:
                dec(v, w)
        dec(x, y)
        for v in removed:
            vs.discard(v)
        for a, b in joins:
            inc(a, b)
    labels = {v: p for v, p in G.labels if v in vs}
    return build(vs, [(a, b, m) for (a, b), m in mult.items()], labels, dim=G.dim, marked=G.marked)


# ---------------------------------------------------------------------------
# 3-connectivity


def _max_flow_to_anchors(G: DiagrammaticGraph, src: str, S: Sequence[str], need: int = 3) -> int:
    """Unit max-flow from ``src`` to a super-sink fed by each anchor (Edmonds-Karp)."""
    sink = object()
    cap: dict = {v: dict(G.graph._adj[v]) for v in G.vertices}
    cap[sink] = {}
    for s in S:
        cap[s][sink] = cap[s].get(sink, 0) + 1
        cap[sink].setdefault(s, 0)
    flow = 0
    while flow < need:
        prev = {src: None}
        q = deque([src])
        while q and sink not in prev:
            v = q.popleft()
            for w, c in cap[v].items():
                if c > 0 and w not in prev:
                    prev[w] = v
                    q.append(w)
        if sink not in prev:
            break
        w = sink
        while prev[w] is not None:
            v = prev[w]
            cap[v][w] -= 1
            cap[w][v] = cap[w].get(v, 0) + 1
            w = v
        flow += 1
    return flow


def is_three_connected(G: DiagrammaticGraph, S: Sequence[str] | None = None) -> bool:
    """Every non-anchor vertex has edge-disjoint paths to all three anchors."""
    S = anchors_of(G, S)
    for v in G.vertices:
        if v in S:
            continue
        if G.degree(v) < 3 or _max_flow_to_anchors(G, v, S) < 3:
            return False
    return True


# ---------------------------------------------------------------------------
# strong reducibility and fixpoints


def strongly_reducible_edges(G: DiagrammaticGraph, S: Sequence[str] | None = None) -> list[tuple[str, str]]:
    """All strongly H-reducible edges, ordered by canonical vertex positions."""
    S = anchors_of(G, S)
    pos = canonical_order(G)
    out = []
    for a, b in G.graph.pairs:
        if is_h_reducible(G, (a, b), S) and is_three_connected(h_reduce(G, (a, b), S), S):
            out.append((a, b))
    out.sort(key=lambda e: tuple(sorted((pos[e[0]], pos[e[1]]))))
    return out


def find_strongly_reducible(
    G: DiagrammaticGraph, S: Sequence[str] | None = None, rng: random.Random | None = None
) -> tuple[str, str] | None:
    """Least strong edge in canonical order (or a random one if ``rng`` is given)."""
    edges = strongly_reducible_edges(G, S)
    if not edges:
        return None
    return rng.choice(edges) if rng is not None else edges[0]


def classify_canonical(G: DiagrammaticGraph, S: Sequence[str] | None = None) -> str:
    S = anchors_of(G, S)
    a, b, c = S
    internal = [v for v in G.vertices if v not in S]
    if not internal:
        if sorted(G.edges) == sorted(
            [tuple(sorted(p)) + (1,) for p in ((a, b), (b, c), (a, c))]
        ):
            return TRIANGLE
        return OTHER
    if len(internal) == 2 and G.num_edges == 6:
        if all(G.mult(v, s) == 1 for v in internal for s in S):
            return K23
    return OTHER


@dataclass(frozen=True)
class ReductionStep:
    edge: tuple[str, str]
    case: str
    key: bytes
    graph: DiagrammaticGraph


@dataclass
class ReductionTrace:
    steps: list[ReductionStep] = field(default_factory=list)
    final_class: str = OTHER

    def lines(self) -> list[str]:
        out = [
            f"step {i} edge {s.edge[0]}-{s.edge[1]} case {s.case} key {key_hex(s.key)}"
            for i, s in enumerate(self.steps, start=1)
        ]
        out.append(f"class {self.final_class}")
        return out


def check_hypotheses(G: DiagrammaticGraph, S: Sequence[str] | None = None) -> list[str]:
    """Reasons why G fails the fixpoint-procedure hypotheses (empty if none)."""
    S = anchors_of(G, S)
    bad = []
    if not G.graph.is_simple():
        bad.append("graph is not simple")
    if not G.graph.is_connected():
        bad.append("graph is not connected")
    for v in G.vertices:
        d = G.degree(v)
        if v in S and d > 2:
            bad.append(f"anchor {v} has degree {d} > 2")
        if v not in S and d != 3:
            bad.append(f"internal vertex {v} has degree {d} != 3")
    if not bad and not is_three_connected(G, S):
        bad.append("graph is not 3-connected to the anchors")
    return bad


def _step_violations(before: DiagrammaticGraph, after: DiagrammaticGraph, S) -> list[str]:
    bad = []
    if after.num_edges >= before.num_edges:
        bad.append("edge count did not decrease")
    if not after.graph.is_simple():
        bad.append("result is not simple")
    if not after.graph.is_connected():
        bad.append("result is not connected")
    for v in after.vertices:
        d = after.degree(v)
        if v in S and d != before.degree(v):
            bad.append(f"anchor {v} changed degree")
        if v not in S and d != 3:
            bad.append(f"internal vertex {v} has degree {d}")
    if not is_three_connected(after, S):
        bad.append("result is not 3-connected")
    return bad


def reduce_to_fixpoint(
    G: DiagrammaticGraph,
    S: Sequence[str] | None = None,
    rng: random.Random | None = None,
) -> tuple[DiagrammaticGraph, ReductionTrace]:
    """Strongly H-reduce until no strong edge remains, checking every step."""
    S = anchors_of(G, S)
    bad = check_hypotheses(G, S)
    if bad:
        raise HypothesisViolation("; ".join(bad))
    trace = ReductionTrace()
    cur = G
    for _ in range(G.num_edges + 1):
        e = find_strongly_reducible(cur, S, rng)
        if e is None:
            break
        case = reduction_case(cur, e)
        nxt = h_reduce(cur, e, S)
        bad = _step_violations(cur, nxt, S)
        if bad:
            raise InvariantBroken(f"step on {e[0]}-{e[1]}: " + "; ".join(bad))
        trace.steps.append(ReductionStep(e, case, canonical_key(nxt), nxt))
        cur = nxt
    trace.final_class = classify_canonical(cur, S)
    return cur, trace


def has_adjacent_internal_pair(G: DiagrammaticGraph, S: Sequence[str] | None = None) -> bool:
    S = anchors_of(G, S)
    return any(a not in S and b not in S for a, b in G.graph.pairs)
