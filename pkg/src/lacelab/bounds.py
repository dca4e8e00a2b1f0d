"""Measured constants of diagram inequalities on finite boxes.

A bound ``LHS <= C * RHS`` cannot be proved numerically; what can be
checked is that the largest measured ratio ``LHS / RHS`` over a parameter
grid does not grow when the box radius doubles.  Every report keeps both
maxima so the verdict can be audited.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .algebra import GeneralizedDiagram, WSet, convolve, parse_point, w_edge
from .diag import DiagEvaluator
from .errors import Infeasible, NotReducible, Unsupported, UnknownBound
from .graph import DiagrammaticGraph, Point, build
from .kernels import (
    KernelModel,
    LatticeBox,
    LoopTransfer,
    StepKernel,
    decay_slope,
    default_triples,
    dtau_ratio_sup,
    power_law,
)
from .parallel import pmap
from .reduction import anchors_of, h_reduce, is_h_reducible, strongly_reducible_edges

BOUND_NAMES = (
    "holder",
    "triangle_plus",
    "kill_bill",
    "neglect_w",
    "extra_diag",
    "hreduction",
    "convbd",
    "dtau",
    "aass",
)


@dataclass
class BoundReport:
    """Per-grid-point ratios at radius ``R`` and, when measured, at ``2R``.

    ``rule`` says how ``passed`` was decided; ``note`` records anything that
    prevented a measurement (for instance an infeasible doubled box).
    """

    name: str
    grid: list[dict[str, Any]]
    lhs: np.ndarray
    rhs: np.ndarray
    R: int
    lhs_2R: np.ndarray | None = None
    rhs_2R: np.ndarray | None = None
    rule: str = "factor 2"
    passed: bool = False
    note: str = ""
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if not self.grid:
            raise ValueError("grid must be nonempty")
        self.lhs = np.asarray(self.lhs, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        if len(self.lhs) != len(self.grid) or len(self.rhs) != len(self.grid):
            raise ValueError("one lhs and one rhs value per grid point")

    @staticmethod
    def _ratio(lhs, rhs) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(rhs != 0, lhs / np.where(rhs != 0, rhs, 1.0), np.inf)

    @property
    def ratio(self) -> np.ndarray:
        return self._ratio(self.lhs, self.rhs)

    @property
    def ratio_2R(self) -> np.ndarray | None:
        if self.lhs_2R is None:
            return None
        return self._ratio(self.lhs_2R, self.rhs_2R)

    @property
    def max_R(self) -> float:
        return float(np.max(self.ratio))

    @property
    def max_2R(self) -> float:
        r = self.ratio_2R
        return float("nan") if r is None else float(np.max(r))

    @property
    def argmax(self) -> dict[str, Any]:
        return self.grid[int(np.argmax(self.ratio))]

    def rows(self) -> list[dict[str, Any]]:
        out = []
        sets = [(self.R, self.lhs, self.rhs, self.ratio)]
        if self.lhs_2R is not None:
            sets.append((2 * self.R, self.lhs_2R, self.rhs_2R, self.ratio_2R))
        for R, lhs, rhs, ratio in sets:
            for g, a, b, r in zip(self.grid, lhs, rhs, ratio):
                row = {"name": self.name}
                row.update({k: format_param(v) for k, v in g.items()})
                row.update({"lhs": float(a), "rhs": float(b), "ratio": float(r), "R": R})
                out.append(row)
        return out

    def summary(self) -> str:
        verdict = "pass" if self.passed else "fail"
        s = f"{self.name}: max ratio {self.max_R:.6g} at R={self.R}"
        if self.lhs_2R is not None:
            s += f", {self.max_2R:.6g} at R={2 * self.R}"
        s += f" ({self.rule}): {verdict}"
        if self.note:
            s += f"; {self.note}"
        return s


def format_param(v) -> str:
    if isinstance(v, tuple):
        return "(" + ",".join(str(int(c)) if float(c).is_integer() else repr(c) for c in v) + ")"
    return str(v)


def stable(m1: float, m2: float, factor: float = 2.0) -> bool:
    """Both maxima finite and within ``factor`` of each other."""
    if not (math.isfinite(m1) and math.isfinite(m2)) or m1 < 0 or m2 < 0:
        return False
    if m1 == 0 or m2 == 0:
        return m1 == m2
    return max(m1, m2) / min(m1, m2) <= factor


# ---------------------------------------------------------------------------
# grids and small graphs


def axis(d: int, i: int, r: int) -> Point:
    p = [0] * d
    p[i % d] = r
    return tuple(p)


def axis_grid(d: int, radii: Sequence[int] = (2, 4, 8), names=("u", "u'")) -> list[dict[str, Point]]:
    """Pairs ``(r e1, r' e2)`` for ``r, r'`` in ``radii`` (``r'`` negated in d=1)."""
    a, b = names
    sign = -1 if d == 1 else 1
    return [{a: axis(d, 0, r), b: axis(d, 1, sign * s)} for r in radii for s in radii]


def default_radii(R: int) -> tuple[int, ...]:
    """Axis distances ``R/4, R/2, R`` (deduplicated, at least 1)."""
    return tuple(sorted({max(1, R // 4), max(1, R // 2), R}))


def parse_grid(text: str, d: int, names=("u", "u'")) -> list[dict[str, Point]]:
    """``axis:2,4,8`` or ``;``-separated ``(..)|(..)`` pairs."""
    text = text.strip()
    if text.startswith("axis:"):
        radii = [int(t) for t in text[5:].split(",") if t.strip()]
        return axis_grid(d, radii, names)
    out = []
    for part in text.split(";"):
        if not part.strip():
            continue
        pts = [parse_point(t) for t in part.split("|")]
        if len(pts) != len(names) or any(len(p) != d for p in pts):
            raise ValueError(f"grid entry {part!r} needs {len(names)} points of dimension {d}")
        out.append(dict(zip(names, pts)))
    if not out:
        raise ValueError("empty grid")
    return out


def _tau1(model: KernelModel, x) -> float:
    return float(model.tau(np.asarray([x], dtype=np.int64))[0])


def holder_graph(u: Point, u2: Point) -> DiagrammaticGraph:
    d = len(u)
    return build(
        ["o", "a", "b", "x"],
        [("x", "o"), ("x", "a"), ("x", "b")],
        {"o": (0,) * d, "a": u, "b": u2},
    )


def triangle_plus_graph(x: Point, x2: Point) -> DiagrammaticGraph:
    d = len(x)
    return build(
        ["o", "x", "x2", "y"],
        [("o", "x"), ("o", "y"), ("x", "y"), ("x2", "y")],
        {"o": (0,) * d, "x": x, "x2": x2},
    )


def extra_diag_graph(x: Point, x2: Point) -> DiagrammaticGraph:
    """Composite diagram: the edge ``0-x``, a path ``x-y`` and two detours joining ``0``, ``y``, ``x'``."""
    d = len(x)
    return build(
        ["o", "x", "x2", "y", "v1", "v2"],
        [
            ("o", "x"),
            ("x", "y"),
            ("v1", "o"),
            ("v1", "y"),
            ("v1", "x2"),
            ("v2", "o"),
            ("v2", "y"),
            ("v2", "x2"),
        ],
        {"o": (0,) * d, "x": x, "x2": x2},
    )


# ---------------------------------------------------------------------------
# generic driver


def _measure(evaluate: Callable[[DiagEvaluator, dict], tuple[float, float]], model, box, grid, ev_kw):
    ev = DiagEvaluator(model, box, **ev_kw)
    vals = pmap(lambda g: evaluate(ev, g), grid)
    return np.array([v[0] for v in vals]), np.array([v[1] for v in vals])


def _doubling_report(name, evaluate, model, box, grid, factor=2.0, ev_kw=None, extra=None) -> BoundReport:
    ev_kw = ev_kw or {}
    lhs, rhs = _measure(evaluate, model, box, grid, ev_kw)
    rep = BoundReport(name, list(grid), lhs, rhs, box.R, rule=f"max at 2R within factor {factor:g} of max at R")
    rep.extra.update(extra or {})
    try:
        rep.lhs_2R, rep.rhs_2R = _measure(evaluate, model, box.doubled(), grid, ev_kw)
    except Infeasible as exc:
        rep.note = f"R={2 * box.R} infeasible: {exc}"
        rep.passed = False
        return rep
    rep.passed = bool(np.all(rep.ratio >= 0)) and stable(rep.max_R, rep.max_2R, factor)
    return rep


def _anchor_labels(G: DiagrammaticGraph, S, g: Mapping[str, Point]) -> DiagrammaticGraph:
    d = G.dim
    return G.with_labels({S[0]: (0,) * d, S[1]: g["u"], S[2]: g["u'"]})


# ---------------------------------------------------------------------------
# named checks


def _hreduction_setup(G, e, S):
    S = anchors_of(G, S)
    if not is_h_reducible(G, e, S):
        raise NotReducible(f"edge {tuple(e)} is not H-reducible")
    Gt = h_reduce(G, e, S)

    def evaluate(ev, g):
        lhs = ev(_anchor_labels(G, S, g))
        rhs = ev(_anchor_labels(Gt, S, g))
        return lhs, rhs

    return evaluate


def hreduction_values(G, e, S, model: KernelModel, box: LatticeBox, grid, **ev_kw):
    """``(Diag(G), Diag(reduced G))`` at every grid placement, on one box."""
    return _measure(_hreduction_setup(G, e, S), model, box, list(grid), ev_kw)


def check_hreduction(
    G: DiagrammaticGraph,
    e: Sequence[str],
    S: Sequence[str] | None,
    model: KernelModel,
    box: LatticeBox,
    grid: Sequence[Mapping[str, Point]] | None = None,
    factor: float = 2.0,
    **ev_kw,
) -> BoundReport:
    """Ratio ``Diag(G) / Diag(reduced G)`` over anchor placements ``(0, u, u')``."""
    evaluate = _hreduction_setup(G, e, S)
    grid = list(grid) if grid is not None else axis_grid(G.dim, default_radii(box.R))
    return _doubling_report("hreduction", evaluate, model, box, grid, factor, ev_kw, {"edge": tuple(e)})


def _closed_form_rhs(g, model: KernelModel, exponent: float) -> float:
    x, x2 = np.asarray(g["x"]), np.asarray(g["x'"])
    m = max(1.0, min(float(np.linalg.norm(x)), float(np.linalg.norm(x - x2))))
    return _tau1(model, x) * _tau1(model, x2) * m ** (-exponent)


def _model_from(params: Mapping[str, Any]) -> KernelModel:
    if "model" in params:
        return params["model"]
    return KernelModel(int(params.get("d", 3)), float(params.get("alpha", 2.5)))


def _min_exponent(model: KernelModel, params) -> float:
    if "gamma" in params:
        return float(params["gamma"])
    if model.alpha is None:
        raise Unsupported("an empirical kernel needs an explicit 'gamma' exponent")
    return 2 * model.alpha - model.d


def check_named_bound(name: str, params: Mapping[str, Any] | None = None) -> BoundReport:
    """Run the named check; ``params`` supplies what the check needs.

    Common keys: ``model`` (or ``d``, ``alpha``), ``R``, ``grid``, ``factor``,
    and evaluator options under ``eval``.  Per name:

    ``holder``, ``triangle_plus``, ``extra_diag``: closed diagrams on a grid of
    two points; ``kill_bill``: ``graph`` (anchored); ``neglect_w``: ``graph``,
    ``W`` and a grid of points ``u``; ``hreduction``: ``graph``, ``edge``,
    ``S``; ``convbd``: ``pairs`` of exponents ``(a, b)``, ``tol``;
    ``dtau``: ``kernels`` as ``(mode, L)`` pairs, ``tol``; ``aass``: ``N``,
    ``triples``, ``p``.
    """
    params = dict(params or {})
    if name not in BOUND_NAMES:
        raise UnknownBound(f"unknown bound {name!r}; choose from {', '.join(BOUND_NAMES)}")
    model = _model_from(params)
    d = model.d
    R = int(params.get("R", 8))
    box = LatticeBox(R, d)
    factor = float(params.get("factor", 2.0))
    ev_kw = dict(params.get("eval", {}))
    tau = lambda x: _tau1(model, x)  # noqa: E731

    if name == "holder":
        grid = params.get("grid") or axis_grid(d, default_radii(R))

        def evaluate(ev, g):
            u, u2 = np.asarray(g["u"]), np.asarray(g["u'"])
            lhs = ev(holder_graph(g["u"], g["u'"]))
            return lhs, math.sqrt(tau(u) * tau(u - u2) * tau(u2))

        return _doubling_report(name, evaluate, model, box, grid, factor, ev_kw)

    if name in ("triangle_plus", "extra_diag"):
        grid = params.get("grid") or axis_grid(d, default_radii(R), names=("x", "x'"))
        gamma = _min_exponent(model, params)
        make = triangle_plus_graph if name == "triangle_plus" else extra_diag_graph

        def evaluate(ev, g):
            return ev(make(g["x"], g["x'"])), _closed_form_rhs(g, model, gamma)

        return _doubling_report(name, evaluate, model, box, grid, factor, ev_kw, {"gamma": gamma})

    if name == "kill_bill":
        G = params["graph"]
        S = anchors_of(G, params.get("S"))
        grid = params.get("grid") or axis_grid(d, default_radii(R))

        def evaluate(ev, g):
            u, u2 = np.asarray(g["u"]), np.asarray(g["u'"])
            return ev(_anchor_labels(G, S, g)), tau(u) * tau(u2 - u) * tau(u2)

        return _doubling_report(name, evaluate, model, box, grid, factor, ev_kw)

    if name == "neglect_w":
        G = params["graph"]
        W = params.get("W", ((0,) * d,))
        W = W if isinstance(W, WSet) else WSet(tuple(tuple(w) for w in W))
        grid = params.get("grid") or [{"u": axis(d, 0, r)} for r in default_radii(R)]

        def evaluate(ev, g):
            lhs = ev_family(ev, w_edge(G, g["u"], W))
            rhs = ev_family(ev, convolve(G, g["u"]))
            return lhs, rhs

        return _doubling_report(name, evaluate, model, box, grid, factor, ev_kw, {"W": W.points})

    if name == "hreduction":
        G = params["graph"]
        S = params.get("S")
        e = params.get("edge")
        if e is None:
            strong = strongly_reducible_edges(G, S)
            if not strong:
                raise NotReducible("graph has no strongly H-reducible edge; pass 'edge'")
            e = strong[0]
        return check_hreduction(G, e, S, model, box, params.get("grid"), factor, **ev_kw)

    if name == "convbd":
        return _check_convbd(params, d)
    if name == "dtau":
        return _check_dtau(params, model, box)
    return _check_aass(params, model, box)


def ev_family(ev: DiagEvaluator, fam: GeneralizedDiagram) -> float:
    return float(sum(ev(m) for m in fam.members))


def predicted_exponent(a: float, b: float, d: int) -> float:
    """Decay exponent of ``|x|^-a * |x|^-b`` for ``a >= b > 0``."""
    if not a >= b > 0:
        raise ValueError("need a >= b > 0")
    if a > d:
        return -b
    if a < d and a + b > d:
        return d - (a + b)
    raise ValueError(f"no decay law for a={a}, b={b} in d={d}")


def _check_convbd(params, d: int) -> BoundReport:
    R = int(params.get("R", 32))
    box = LatticeBox(R, d)
    tol = float(params.get("tol", 0.3))
    pairs = params.get("pairs") or [(4.0, 2.0), (3.5, 1.5), (2.5, 2.0), (2.8, 1.5)]
    rmin = int(params.get("rmin", 4))
    rmax = params.get("rmax")
    grid, lhs, rhs = [], [], []
    for a, b in pairs:
        slope, _, _ = decay_slope(power_law(a), power_law(b), box, rmin=rmin, rmax=rmax, method="fft")
        grid.append({"a": float(a), "b": float(b)})
        lhs.append(slope)
        rhs.append(predicted_exponent(a, b, d))
    rep = BoundReport("convbd", grid, lhs, rhs, R, rule=f"|slope - predicted| <= {tol:g}")
    rep.passed = bool(np.all(np.abs(rep.lhs - rep.rhs) <= tol))
    return rep


def _check_dtau(params, model: KernelModel, box: LatticeBox) -> BoundReport:
    tol = float(params.get("tol", 0.05))
    kernels = params.get("kernels") or [("nn", 1), ("spread", 1), ("spread", 2)]
    grid, sup, sup2 = [], [], []
    for mode, L in kernels:
        step = StepKernel(mode, model.d, int(L))
        r = dtau_ratio_sup(step, model, box)
        grid.append({"kernel": mode, "L": int(L)})
        sup.append(r.sup)
        sup2.append(r.sup_2R)
    ones = np.ones(len(grid))
    rep = BoundReport(
        "dtau", grid, sup, ones, box.R, lhs_2R=np.array(sup2), rhs_2R=ones,
        rule=f"sup at 2R within {100 * tol:g}% of sup at R",
    )
    rel = np.abs(rep.lhs_2R - rep.lhs) / rep.lhs
    rep.extra["rel_change"] = rel
    rep.passed = bool(np.all(np.isfinite(rep.lhs)) and np.all(np.isfinite(rep.lhs_2R)) and np.all(rel <= tol))
    return rep


def _check_aass(params, model: KernelModel, box: LatticeBox) -> BoundReport:
    N = int(params.get("N", 3))
    step = StepKernel(params.get("kernel", "nn"), model.d, int(params.get("L", 1)))
    lt = LoopTransfer(
        model, step, box, p=params.get("p"),
        **{k: params[k] for k in ("work_budget", "mem_budget") if k in params},
    )
    triples = params.get("triples") or default_triples(model.d)
    series = lt.series(N, triples)
    grid = [{"u": tuple(u), "v": tuple(v), "x": tuple(x)} for u, v, x in triples]
    rep = BoundReport("aass", grid, series.sum(axis=0), series[0], box.R, rule="finite ratio at R")
    rep.extra["series"] = series
    rep.passed = bool(np.all(np.isfinite(rep.ratio)) and np.all(rep.ratio > 0))
    return rep
