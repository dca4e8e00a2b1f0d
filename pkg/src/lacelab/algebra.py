"""Edge union, convolution and double convolution of diagrammatic graphs.

Every operation that can produce several graphs returns a
:class:`GeneralizedDiagram`, a set of graphs deduplicated by canonical key.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .dgf import read_dgf
from .errors import DegeneratePair, LabelCollision, LacelabError, ScriptError
from .graph import DiagrammaticGraph, Point, build, canonical_key


@dataclass(frozen=True)
class GeneralizedDiagram:
    """Deduplicated family of diagrammatic graphs, ordered by canonical key.

    ``raw_count`` is the number of graphs produced by the last operation
    before deduplication.
    """

    dim: int
    members: tuple[DiagrammaticGraph, ...]
    keys: tuple[bytes, ...]
    provenance: tuple[str, ...]
    raw_count: int

    @classmethod
    def from_items(cls, items: Iterable[tuple[DiagrammaticGraph, str]], dim: int | None = None):
        items = list(items)
        by_key: dict[bytes, tuple[DiagrammaticGraph, str]] = {}
        for g, prov in items:
            if dim is None:
                dim = g.dim
            elif g.dim != dim:
                raise ValueError(f"mixed dimensions {dim} and {g.dim} in one family")
            k = canonical_key(g)
            if k not in by_key:
                by_key[k] = (g, prov)
        if dim is None:
            raise ValueError("empty family needs an explicit dimension")
        ks = tuple(sorted(by_key))
        return cls(
            dim=dim,
            members=tuple(by_key[k][0] for k in ks),
            keys=ks,
            provenance=tuple(by_key[k][1] for k in ks),
            raw_count=len(items),
        )

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


@dataclass(frozen=True)
class WSet:
    """Finite window of lattice points containing the origin."""

    points: tuple[Point, ...]

    def __post_init__(self):
        pts = tuple(tuple(int(c) for c in p) for p in self.points)
        if not pts:
            raise ValueError("W must be nonempty")
        d = len(pts[0])
        if any(len(p) != d for p in pts):
            raise ValueError("W points must share one dimension")
        if len(set(pts)) != len(pts):
            raise ValueError("W points must be distinct")
        if (0,) * d not in pts:
            raise ValueError("W must contain the origin")
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)


# ---------------------------------------------------------------------------
# helpers on raw graph data


def _raw(G: DiagrammaticGraph):
    return list(G.vertices), {(a, b): m for a, b, m in G.edges}, dict(G.label_of)


def _add(mult, a, b, k=1):
    p = (a, b) if a <= b else (b, a)
    mult[p] = mult.get(p, 0) + k


def _remove(mult, a, b):
    p = (a, b) if a <= b else (b, a)
    mult[p] -= 1
    if mult[p] == 0:
        del mult[p]


def _make(G, vs, mult, labels):
    return build(vs, [(a, b, m) for (a, b), m in mult.items()], labels, dim=G.dim)


def _edge_instances(G: DiagrammaticGraph) -> list[tuple[str, str]]:
    """Edges of G with parallel copies listed separately."""
    return [(a, b) for a, b, m in G.edges for _ in range(m)]


def _fmt(p: Point) -> str:
    return "(" + ",".join(str(c) for c in p) + ")"


def _check_point(G: DiagrammaticGraph, p) -> Point:
    p = tuple(int(c) for c in p)
    if len(p) != G.dim:
        raise ValueError(f"point {p} has dimension {len(p)}, graph has {G.dim}")
    return p


# ---------------------------------------------------------------------------
# operations


def uplus(G: DiagrammaticGraph, x: Sequence[int], y: Sequence[int]) -> DiagrammaticGraph:
    """Add one edge between the vertices labelled ``x`` and ``y``.

    Missing labels get fresh labelled vertices.
    """
    x, y = _check_point(G, x), _check_point(G, y)
    if x == y:
        raise DegeneratePair(f"uplus with x = y = {x} would create a self-loop")
    vs, mult, labels = _raw(G)
    ends = []
    taken: list[str] = []
    for p in (x, y):
        v = G.vertex_at.get(p)
        if v is None:
            v = G.fresh_id("p", taken)
            taken.append(v)
            vs.append(v)
            labels[v] = p
        ends.append(v)
    _add(mult, ends[0], ends[1])
    out = _make(G, vs, mult, labels)
    if G.marked is not None:
        out = out.with_marked(G.marked)
    return out


def convolve(G: DiagrammaticGraph, u: Sequence[int]) -> GeneralizedDiagram:
    """Reroute each edge in turn through a new unlabelled vertex joined to ``u``."""
    u = _check_point(G, u)
    if u in G.vertex_at:
        return GeneralizedDiagram.from_items([(G, f"convolve {_fmt(u)}: label present")], G.dim)
    items = []
    for a, b in _edge_instances(G):
        vs, mult, labels = _raw(G)
        star = G.fresh_id("w")
        lu = G.fresh_id("p", [star])
        vs += [star, lu]
        labels[lu] = u
        _remove(mult, a, b)
        _add(mult, a, star)
        _add(mult, b, star)
        _add(mult, lu, star)
        items.append((_make(G, vs, mult, labels), f"convolve {_fmt(u)} at {a}-{b}"))
    return GeneralizedDiagram.from_items(items, G.dim)


def double_convolve(G: DiagrammaticGraph, u: Sequence[int]) -> GeneralizedDiagram:
    """Members where one edge, or a pair of distinct edges, is rerouted twice through ``u``."""
    u = _check_point(G, u)
    if u in G.vertex_at:
        raise LabelCollision(f"{_fmt(u)} already labels vertex {G.vertex_at[u]!r}")
    inst = _edge_instances(G)
    items = []

    def fresh():
        s1 = G.fresh_id("w")
        s2 = G.fresh_id("w", [s1])
        lu = G.fresh_id("p", [s1, s2])
        return s1, s2, lu

    for x, y in inst:
        vs, mult, labels = _raw(G)
        s1, s2, lu = fresh()
        vs += [s1, s2, lu]
        labels[lu] = u
        _remove(mult, x, y)
        for a, b in ((lu, s1), (lu, s2), (s1, x), (s1, s2), (s2, y)):
            _add(mult, a, b)
        items.append((_make(G, vs, mult, labels), f"convolve2 {_fmt(u)} at {x}-{y}"))
    for i in range(len(inst)):
        for j in range(i + 1, len(inst)):
            (x1, y1), (x2, y2) = inst[i], inst[j]
            vs, mult, labels = _raw(G)
            s1, s2, lu = fresh()
            vs += [s1, s2, lu]
            labels[lu] = u
            _remove(mult, x1, y1)
            _remove(mult, x2, y2)
            for a, b in ((lu, s1), (x1, s1), (s1, y1), (lu, s2), (x2, s2), (s2, y2)):
                _add(mult, a, b)
            items.append(
                (_make(G, vs, mult, labels), f"convolve2 {_fmt(u)} at {x1}-{y1},{x2}-{y2}")
            )
    return GeneralizedDiagram.from_items(items, G.dim)


def w_edge(G: DiagrammaticGraph, x: Sequence[int], W: WSet | Iterable[Sequence[int]]) -> GeneralizedDiagram:
    """Union over ``w`` in ``W`` of ``uplus(G, x, w)``.

    The term ``w = x`` would be a self-loop of weight one and contributes
    ``G`` itself.
    """
    if not isinstance(W, WSet):
        W = WSet(tuple(W))
    x = _check_point(G, x)
    items = []
    for w in W.points:
        if w == x:
            items.append((G, f"wedge {_fmt(x)} to {_fmt(w)}: loop dropped"))
        else:
            items.append((uplus(G, x, w), f"wedge {_fmt(x)} to {_fmt(w)}"))
    return GeneralizedDiagram.from_items(items, G.dim)


# ---------------------------------------------------------------------------
# ops-scripts

_POINT = re.compile(r"\(\s*-?\d+(?:\s*,\s*-?\d+)*\s*\)")


def parse_point(text: str) -> Point:
    text = text.strip()
    if not _POINT.fullmatch(text):
        raise ValueError(f"malformed point {text!r}, expected (c1,...,cd)")
    return tuple(int(c) for c in text[1:-1].split(","))


def _family_map(fam: GeneralizedDiagram, op) -> GeneralizedDiagram:
    items = []
    raw = 0
    for g in fam.members:
        out = op(g)
        raw += out.raw_count
        items.extend(zip(out.members, out.provenance))
    res = GeneralizedDiagram.from_items(items, fam.dim)
    return GeneralizedDiagram(res.dim, res.members, res.keys, res.provenance, raw)


def apply_step(fam: GeneralizedDiagram, line: str) -> GeneralizedDiagram:
    """Apply one ops-script step (other than a seed) to every member."""
    kw, _, rest = line.strip().partition(" ")
    rest = rest.strip()
    if kw == "uplus":
        pts = _POINT.findall(rest)
        if len(pts) != 2 or _POINT.sub("", rest).strip():
            raise ValueError("expected 'uplus <point> <point>'")
        x, y = parse_point(pts[0]), parse_point(pts[1])
        items = [(uplus(g, x, y), f"uplus {_fmt(x)} {_fmt(y)}") for g in fam.members]
        return GeneralizedDiagram.from_items(items, fam.dim)
    if kw in ("convolve", "convolve2"):
        u = parse_point(rest)
        op = convolve if kw == "convolve" else double_convolve
        return _family_map(fam, lambda g: op(g, u))
    if kw == "wedge":
        m = re.fullmatch(r"(\(.*?\))\s*W\{(.*)\}", rest)
        if not m:
            raise ValueError("expected 'wedge <point> W{<point>;...}'")
        x = parse_point(m.group(1))
        W = WSet(tuple(parse_point(p) for p in m.group(2).split(";")))
        return _family_map(fam, lambda g: w_edge(g, x, W))
    raise ValueError(f"unknown step {kw!r}")


def expand(script: str, base_dir: str | os.PathLike = ".") -> GeneralizedDiagram:
    """Run an ops-script and return the expanded, deduplicated family.

    The first step must be ``seed <dgf-file>`` (resolved relative to
    ``base_dir``) or ``edge <point> <point>``, which seeds a single edge.
    """
    fam: GeneralizedDiagram | None = None
    for n, raw in enumerate(script.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kw = line.split()[0]
        try:
            if kw in ("seed", "edge"):
                if fam is not None:
                    raise ValueError("seed must be the first step")
                if kw == "seed":
                    path = line.split(None, 1)[1].strip() if len(line.split()) > 1 else ""
                    if not path:
                        raise ValueError("expected 'seed <dgf-file>'")
                    g = read_dgf(os.path.join(base_dir, path))
                else:
                    pts = _POINT.findall(line[4:])
                    if len(pts) != 2:
                        raise ValueError("expected 'edge <point> <point>'")
                    x, y = parse_point(pts[0]), parse_point(pts[1])
                    if x == y:
                        raise DegeneratePair(f"seed edge with x = y = {x}")
                    g = build(["p1", "p2"], [("p1", "p2")], {"p1": x, "p2": y})
                fam = GeneralizedDiagram.from_items([(g, f"seed {line.split(None, 1)[1]}")])
            else:
                if fam is None:
                    raise ValueError("script must start with a seed step")
                fam = apply_step(fam, line)
        except LacelabError:
            raise
        except (ValueError, OSError) as exc:
            raise ScriptError(str(exc), n) from exc
    if fam is None:
        raise ScriptError("script has no seed step", 1)
    return fam
