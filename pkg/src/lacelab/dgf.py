"""Reading and writing the line-oriented DGF graph format.

Example::

    dgf 1
    dim 3
    vertex a label 0 0 0
    vertex b label 2 0 0
    vertex c
    edge a c
    edge b c mult 2
"""

from __future__ import annotations

from .errors import (
    DanglingEdge,
    DgfSemanticError,
    DgfSyntaxError,
    DuplicateLabel,
    GraphError,
    SelfLoop,
)
from .graph import DiagrammaticGraph, build


def _tokens(text: str):
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = line.split()
        if toks:
            yield n, toks


def _int(tok: str, n: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise DgfSyntaxError(f"expected integer {what}, got {tok!r}", n) from None


def parse_dgf(text: str) -> DiagrammaticGraph:
    """Parse one DGF document."""
    lines = list(_tokens(text))
    if not lines:
        raise DgfSyntaxError("empty document, expected 'dgf 1'", 1)
    n, toks = lines[0]
    if toks != ["dgf", "1"]:
        raise DgfSyntaxError("first line must be 'dgf 1'", n)
    if len(lines) < 2 or lines[1][1][0] != "dim":
        raise DgfSyntaxError("second line must be 'dim <d>'", lines[1][0] if len(lines) > 1 else n)
    n, toks = lines[1]
    if len(toks) != 2:
        raise DgfSyntaxError("expected 'dim <d>'", n)
    dim = _int(toks[1], n, "dimension")
    if dim < 1:
        raise DgfSyntaxError("dimension must be positive", n)

    vertices: list[str] = []
    seen: dict[str, int] = {}
    labels: dict[str, tuple[int, ...]] = {}
    edges: list[tuple[str, str, int]] = []
    edge_line: list[int] = []
    marked = None
    marked_line = None
    for n, toks in lines[2:]:
        kw = toks[0]
        if kw == "vertex":
            if len(toks) == 2:
                pass
            elif len(toks) >= 3 and toks[2] == "label":
                coords = toks[3:]
                if len(coords) != dim:
                    raise DgfSyntaxError(f"label needs {dim} coordinates, got {len(coords)}", n)
                labels[toks[1]] = tuple(_int(c, n, "coordinate") for c in coords)
            else:
                raise DgfSyntaxError("expected 'vertex <id> [label <c1> ... <cd>]'", n)
            v = toks[1]
            if v in seen:
                raise DgfSemanticError(GraphError(f"duplicate vertex id {v!r}"), n)
            seen[v] = n
            vertices.append(v)
        elif kw == "edge":
            if len(toks) == 3:
                m = 1
            elif len(toks) == 5 and toks[3] == "mult":
                m = _int(toks[4], n, "multiplicity")
                if m < 1:
                    raise DgfSyntaxError("multiplicity must be >= 1", n)
            else:
                raise DgfSyntaxError("expected 'edge <id1> <id2> [mult <m>]'", n)
            edges.append((toks[1], toks[2], m))
            edge_line.append(n)
        elif kw == "marked":
            if len(toks) != 4:
                raise DgfSyntaxError("expected 'marked <id> <id> <id>'", n)
            if marked is not None:
                raise DgfSyntaxError("duplicate 'marked' line", n)
            marked = tuple(toks[1:])
            marked_line = n
        elif kw in ("dgf", "dim"):
            raise DgfSyntaxError(f"unexpected {kw!r} line", n)
        else:
            raise DgfSyntaxError(f"unknown keyword {kw!r}", n)

    # report semantic problems at their line
    for (a, b, _), n in zip(edges, edge_line):
        if a == b:
            raise DgfSemanticError(SelfLoop(f"self-loop at {a!r}"), n)
        for x in (a, b):
            if x not in seen:
                raise DgfSemanticError(DanglingEdge(f"edge endpoint {x!r} is not a vertex"), n)
    owner: dict[tuple[int, ...], str] = {}
    for v, pt in labels.items():
        if pt in owner:
            raise DgfSemanticError(
                DuplicateLabel(f"vertices {owner[pt]!r} and {v!r} share label {pt}"), seen[v]
            )
        owner[pt] = v
    try:
        return build(vertices, edges, labels, dim=dim, marked=marked)
    except GraphError as exc:
        raise DgfSemanticError(exc, marked_line) from exc


def write_dgf(G: DiagrammaticGraph) -> str:
    """Canonical DGF text: vertices by id, edges lexicographic."""
    out = ["dgf 1", f"dim {G.dim}"]
    lab = G.label_of
    for v in G.vertices:
        if v in lab:
            out.append(f"vertex {v} label " + " ".join(str(c) for c in lab[v]))
        else:
            out.append(f"vertex {v}")
    for a, b, m in G.edges:
        out.append(f"edge {a} {b}" + (f" mult {m}" if m != 1 else ""))
    if G.marked is not None:
        out.append("marked " + " ".join(G.marked))
    return "\n".join(out) + "\n"


def split_blocks(text: str) -> list[str]:
    """Split concatenated DGF documents at their ``dgf`` header lines."""
    blocks: list[list[str]] = []
    for raw in text.splitlines(keepends=True):
        if raw.split("#", 1)[0].split()[:1] == ["dgf"]:
            blocks.append([])
        if blocks:
            blocks[-1].append(raw)
        elif raw.split("#", 1)[0].strip():
            raise DgfSyntaxError("content before the first 'dgf' header", 1)
    return ["".join(b) for b in blocks]


def parse_dgf_many(text: str) -> list[DiagrammaticGraph]:
    return [parse_dgf(b) for b in split_blocks(text)]


def write_dgf_many(graphs) -> str:
    return "".join(write_dgf(g) for g in graphs)


def read_dgf(path) -> DiagrammaticGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_dgf(fh.read())
