"""Gadget templates glued onto an anchored graph after a convolution.

A template is an unlabelled DGF graph with reserved vertex ids:

``u``      identified with the anchor being expanded,
``uplus``  the new anchor replacing ``u``,
``c1``/``c2``  connectors, identified with the unlabelled vertices created
by a convolution (one connector) or a double convolution (two).

The convolution point is the template vertex adjacent to the connectors;
it is ``uplus`` itself or a vertex that becomes a fresh labelled point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

from .algebra import GeneralizedDiagram, convolve, double_convolve
from .dgf import parse_dgf, read_dgf
from .errors import BadGadget
from .graph import DiagrammaticGraph, Point, build
from .reduction import anchors_of, is_three_connected

UPLUS_ONLY = "uplus-only"
CONV = "conv"
CONV2 = "conv2"
_MODE_CONNECTORS = {UPLUS_ONLY: 0, CONV: 1, CONV2: 2}


@dataclass(frozen=True)
class GadgetSpec:
    template: DiagrammaticGraph
    name: str = "gadget"

    def __post_init__(self):
        vs = set(self.template.vertices)
        for need in ("u", "uplus"):
            if need not in vs:
                raise BadGadget(f"{self.name}: template lacks reserved vertex {need!r}")
        if self.template.labels:
            raise BadGadget(f"{self.name}: template vertices must be unlabelled")
        if not self.template.graph.is_connected():
            raise BadGadget(f"{self.name}: template is not connected")
        if "c2" in vs and "c1" not in vs:
            raise BadGadget(f"{self.name}: connector c2 without c1")

    @property
    def connectors(self) -> tuple[str, ...]:
        return tuple(c for c in ("c1", "c2") if c in self.template.vertices)

    def point_vertex(self) -> str | None:
        """Template vertex adjacent to every connector (the convolution point)."""
        cs = self.connectors
        if not cs:
            return None
        common = None
        for c in cs:
            nb = set(self.template.neighbors(c))
            if len(nb) != 1 or self.template.degree(c) != 1:
                raise BadGadget(f"{self.name}: connector {c} must have exactly one template edge")
            common = nb if common is None else common & nb
        if not common:
            raise BadGadget(f"{self.name}: connectors do not share their neighbour")
        (p,) = common
        if p == "u":
            raise BadGadget(f"{self.name}: connectors cannot attach to u directly")
        return p


def load_gadget(path) -> GadgetSpec:
    return GadgetSpec(read_dgf(path), name=str(path))


def default_gadget(name: str) -> GadgetSpec:
    """One of ``gadget1``, ``gadget2``, ``gadget3``, ``uplus_only``."""
    text = resources.files("lacelab").joinpath("gadgets").joinpath(f"{name}.dgf").read_text("utf-8")
    return GadgetSpec(parse_dgf(text), name=name)


def _fresh_points(G: DiagrammaticGraph, n: int) -> list[Point]:
    m = max((p[0] for _, p in G.labels), default=0)
    return [(m + 1 + i,) + (0,) * (G.dim - 1) for i in range(n)]


@dataclass(frozen=True)
class GlueResult:
    diagram: GeneralizedDiagram
    anchors: tuple[str, str, str]
    three_connected: tuple[bool, ...] = field(default=())

    @property
    def all_three_connected(self) -> bool:
        return all(self.three_connected)


def glue_gadget(
    G: DiagrammaticGraph,
    S: Sequence[str] | None,
    gadget: GadgetSpec,
    mode: str,
    uplus_point: Sequence[int] | None = None,
    y_point: Sequence[int] | None = None,
) -> GlueResult:
    """Convolve ``G`` as ``mode`` prescribes, then merge the gadget at ``S[1]``.

    The anchors of every member become ``(S[0], uplus, S[2])``: the new
    vertex ``uplus`` takes the place of ``S[1]``, which turns internal.
    """
    S = anchors_of(G, S)
    if mode not in _MODE_CONNECTORS:
        raise BadGadget(f"unknown mode {mode!r}")
    if len(gadget.connectors) != _MODE_CONNECTORS[mode]:
        raise BadGadget(
            f"mode {mode} needs {_MODE_CONNECTORS[mode]} connectors, "
            f"{gadget.name} has {len(gadget.connectors)}"
        )
    p = gadget.point_vertex()
    auto = iter(_fresh_points(G, 2))
    up = tuple(uplus_point) if uplus_point is not None else next(auto)
    yp = tuple(y_point) if y_point is not None else next(auto)
    if up in G.vertex_at or (p not in (None, "uplus") and yp in G.vertex_at) or up == yp:
        raise BadGadget("gadget points must be fresh and distinct")

    if mode == UPLUS_ONLY:
        bases = [G]
        conv_pt = None
    else:
        conv_pt = up if p == "uplus" else yp
        fam = (convolve if mode == CONV else double_convolve)(G, conv_pt)
        bases = list(fam.members)

    T = gadget.template
    items = []
    for M in bases:
        mapping = {"u": S[1]}
        mult = {(a, b): m for a, b, m in M.edges}
        vs = list(M.vertices)
        labels = dict(M.label_of)
        skip = set()
        if conv_pt is not None:
            lp = M.vertex_at[conv_pt]
            mapping[p] = lp
            stars = sorted(M.neighbors(lp))
            if len(stars) != len(gadget.connectors):
                raise BadGadget("convolution point has an unexpected neighbourhood")
            for c, s in zip(gadget.connectors, stars):
                mapping[c] = s
                skip.add(frozenset((c, p)))
        taken: list[str] = []
        for t in T.vertices:
            if t in mapping:
                continue
            v = M.fresh_id("g" if t != "uplus" else "up", taken)
            taken.append(v)
            mapping[t] = v
            vs.append(v)
            if t == "uplus":
                labels[v] = up
        for a, b, m in T.edges:
            if frozenset((a, b)) in skip:
                continue
            x, y = sorted((mapping[a], mapping[b]))
            mult[(x, y)] = mult.get((x, y), 0) + m
        anchors = (S[0], mapping["uplus"], S[2])
        out = build(vs, [(a, b, m) for (a, b), m in mult.items()], labels, dim=G.dim, marked=anchors)
        items.append((out, f"glue {gadget.name} {mode}"))
    fam = GeneralizedDiagram.from_items(items, G.dim)
    flags = tuple(is_three_connected(m, m.marked) for m in fam.members)
    return GlueResult(fam, fam.members[0].marked if fam.members else S, flags)
