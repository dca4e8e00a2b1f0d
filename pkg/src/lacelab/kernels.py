"""Step kernels, two-point kernel models and lattice sums on finite boxes.

Points are integer vectors.  A :class:`LatticeBox` of radius ``R`` holds
the points with ``max_i |x_i| <= R``; arrays tabulated on a box have shape
``(2R+1,)*d`` with the origin at index ``(R,)*d``.  Sums over the box
ignore everything outside it (free boundary).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .errors import Infeasible, LabelOutsideBox

ArrayFn = Callable[[np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class LatticeBox:
    R: int
    d: int

    def __post_init__(self):
        if self.R < 1 or self.d < 1:
            raise ValueError(f"need R >= 1 and d >= 1, got R={self.R}, d={self.d}")

    @property
    def side(self) -> int:
        return 2 * self.R + 1

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.side,) * self.d

    @property
    def size(self) -> int:
        return self.side**self.d

    @cached_property
    def points(self) -> np.ndarray:
        """All box points, shape ``(size, d)``, in C order of :attr:`shape`."""
        axes = [np.arange(-self.R, self.R + 1)] * self.d
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and all(abs(int(c)) <= self.R for c in x)

    def index(self, x: Sequence[int]) -> int:
        """Flat index of ``x`` in :attr:`points`."""
        if not self.contains(x):
            raise LabelOutsideBox(f"point {tuple(x)} outside box of radius {self.R}")
        i = 0
        for c in x:
            i = i * self.side + int(c) + self.R
        return i

    def doubled(self) -> "LatticeBox":
        return LatticeBox(2 * self.R, self.d)


# ---------------------------------------------------------------------------
# two-point kernel models


def power_law(a: float) -> ArrayFn:
    """``x -> |x|^{-a}`` with value 1 at the origin."""

    def f(x: np.ndarray) -> np.ndarray:
        r2 = np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)
        out = np.ones_like(r2)
        nz = r2 > 0
        out[nz] = r2[nz] ** (-a / 2.0)
        return out

    return f


@dataclass(frozen=True)
class KernelModel:
    """Two-point kernel: synthetic ``|x|^{-alpha}`` or an empirical table.

    ``table`` maps points to values;  points missing from a table evaluate
    to 0.
    """

    d: int
    alpha: float | None = None
    table: Mapping[tuple[int, ...], float] | None = field(default=None, compare=False)

    def __post_init__(self):
        if (self.alpha is None) == (self.table is None):
            raise ValueError("give exactly one of alpha or table")
        if self.alpha is not None and self.alpha <= 0:
            raise ValueError("alpha must be positive")

    @property
    def mode(self) -> str:
        return "synthetic" if self.alpha is not None else "empirical"

    @cached_property
    def _dense(self):
        pts = np.array(list(self.table), dtype=np.int64).reshape(-1, self.d)
        R = int(np.abs(pts).max()) if len(pts) else 0
        arr = np.zeros((2 * R + 1,) * self.d)
        for p, v in self.table.items():
            arr[tuple(int(c) + R for c in p)] = v
        return R, arr

    def tau(self, x) -> np.ndarray:
        """Vectorised evaluation on an array of points with last axis ``d``."""
        x = np.asarray(x)
        if self.alpha is not None:
            return power_law(self.alpha)(x)
        R, arr = self._dense
        x = x.astype(np.int64)
        inside = np.all(np.abs(x) <= R, axis=-1)
        out = np.zeros(x.shape[:-1])
        idx = tuple(np.moveaxis(x[inside] + R, -1, 0))
        out[inside] = arr[idx]
        return out

    @classmethod
    def from_csv(cls, path, d: int | None = None) -> "KernelModel":
        table = {}
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        start = 0
        if rows and any(not _is_number(c) for c in rows[0]):
            start = 1
        for row in rows[start:]:
            if not row:
                continue
            *coords, val = row
            table[tuple(int(c) for c in coords)] = float(val)
        dims = {len(p) for p in table}
        if len(dims) != 1:
            raise ValueError("empirical table rows must share one dimension")
        (dd,) = dims
        if d is not None and d != dd:
            raise ValueError(f"table has dimension {dd}, expected {d}")
        return cls(d=dd, table=table)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def eval_tau(model: KernelModel, x: Sequence[int]) -> float:
    return float(model.tau(np.asarray([x]))[0])


# ---------------------------------------------------------------------------
# step kernels


@dataclass(frozen=True)
class StepKernel:
    """Nearest-neighbour (``nn``) or spread-out (``spread``, range ``L``) step distribution."""

    mode: str
    d: int
    L: int = 1

    def __post_init__(self):
        if self.mode not in ("nn", "spread"):
            raise ValueError(f"unknown step kernel {self.mode!r}")
        if self.L < 1:
            raise ValueError("L must be >= 1")

    @cached_property
    def offsets(self) -> np.ndarray:
        if self.mode == "nn":
            eye = np.eye(self.d, dtype=np.int64)
            return np.concatenate([eye, -eye])
        pts = LatticeBox(self.L, self.d).points
        return pts[np.any(pts != 0, axis=1)]

    @property
    def weight(self) -> float:
        """Common value of D on its support."""
        if self.mode == "nn":
            return 1.0 / (2 * self.d)
        return 1.0 / ((2 * self.L + 1) ** self.d - 1)

    @property
    def weights(self) -> np.ndarray:
        return np.full(len(self.offsets), self.weight)

    def D(self, y) -> np.ndarray:
        y = np.asarray(y)
        if self.mode == "nn":
            hit = np.sum(np.abs(y), axis=-1) == 1
        else:
            m = np.max(np.abs(y), axis=-1)
            hit = (m > 0) & (m <= self.L)
        return np.where(hit, self.weight, 0.0)


def d_conv(step: StepKernel, f: ArrayFn, x: np.ndarray) -> np.ndarray:
    """``(D * f)(x) = sum_y D(y) f(x - y)`` evaluated exactly at points ``x``."""
    x = np.asarray(x)
    out = np.zeros(x.shape[:-1])
    for s in step.offsets:
        out += step.weight * f(x - s)
    return out


# ---------------------------------------------------------------------------
# convolution


def tabulate(f, box: LatticeBox) -> np.ndarray:
    """Values of a closed-form ``f`` (or an existing table) on ``box``."""
    if isinstance(f, np.ndarray):
        if f.shape != box.shape:
            raise ValueError(f"table shape {f.shape} does not match box {box.shape}")
        return f
    return np.asarray(f(box.points), dtype=float).reshape(box.shape)


def _g_at(g, box: LatticeBox, z: np.ndarray) -> np.ndarray:
    if isinstance(g, np.ndarray):
        inside = np.all(np.abs(z) <= box.R, axis=-1)
        out = np.zeros(z.shape[:-1])
        idx = tuple(np.moveaxis(z[inside] + box.R, -1, 0))
        out[inside] = g[idx]
        return out
    return np.asarray(g(z), dtype=float)


def convolve_lattice(
    f,
    g,
    box: LatticeBox,
    method: str = "direct",
    at: Iterable[Sequence[int]] | None = None,
    budget: float = 4e9,
) -> np.ndarray:
    """``(f*g)(x) = sum_{y in box} f(y) g(x - y)``.

    ``f`` is summed over the box only; a closed-form ``g`` is evaluated
    exactly at every difference, a tabulated ``g`` is zero outside the box.
    Returns the table on the box, or the values at the points ``at``.
    ``method`` is ``"direct"`` (reference summation) or ``"fft"``.
    """
    F = tabulate(f, box)
    if at is not None:
        xs = np.asarray(list(at), dtype=np.int64).reshape(-1, box.d)
    else:
        xs = box.points
    if method == "direct":
        if len(xs) * box.size > budget:
            raise Infeasible(
                f"direct convolution needs {len(xs) * box.size:.3g} terms, budget {budget:.3g}"
            )
        fy = F.ravel()
        ys = box.points
        nz = fy != 0
        fy, ys = fy[nz], ys[nz]
        out = np.empty(len(xs))
        for i, x in enumerate(xs):
            out[i] = np.dot(fy, _g_at(g, box, x - ys))
        return out if at is not None else out.reshape(box.shape)
    if method == "fft":
        R = box.R
        if isinstance(g, np.ndarray):
            G2 = np.zeros(box.doubled().shape)
            G2[(slice(R, 3 * R + 1),) * box.d] = tabulate(g, box)
        else:
            G2 = tabulate(g, box.doubled())
        full = fftconvolve(F, G2, mode="full")
        table = full[(slice(2 * R, 4 * R + 1),) * box.d]
        if at is None:
            return table
        return np.array([table[tuple(int(c) + R for c in x)] for x in xs])
    raise ValueError(f"unknown method {method!r}")


def decay_slope(
    f,
    g,
    box: LatticeBox,
    rmin: int = 4,
    rmax: int | None = None,
    method: str = "direct",
) -> tuple[float, np.ndarray, np.ndarray]:
    """Least-squares log-log slope of ``(f*g)(r e_1)`` for ``rmin <= r <= rmax``.

    Returns ``(slope, radii, values)``; ``rmax`` defaults to ``R // 2``.
    """
    rmax = box.R // 2 if rmax is None else rmax
    radii = np.arange(rmin, rmax + 1)
    pts = np.zeros((len(radii), box.d), dtype=np.int64)
    pts[:, 0] = radii
    vals = convolve_lattice(f, g, box, method=method, at=pts)
    slope = float(np.polyfit(np.log(radii), np.log(vals), 1)[0])
    return slope, radii, vals


# ---------------------------------------------------------------------------
# D * tau domination


@dataclass(frozen=True)
class DtauReport:
    sup: float
    sup_2R: float
    argmax: tuple[int, ...]
    at_half: float
    R: int

    @property
    def rel_change(self) -> float:
        return abs(self.sup_2R - self.sup) / self.sup


def _dtau_sup(step: StepKernel, model: KernelModel, box: LatticeBox):
    pts = box.points
    pts = pts[np.any(pts != 0, axis=1)]
    ratio = d_conv(step, model.tau, pts) / model.tau(pts)
    i = int(np.argmax(ratio))
    return float(ratio[i]), tuple(int(c) for c in pts[i])


def dtau_ratio_sup(step: StepKernel, model: KernelModel, box: LatticeBox) -> DtauReport:
    """``sup_{x != 0} (D*tau)(x) / tau(x)`` on ``box`` and on the doubled box."""
    sup, arg = _dtau_sup(step, model, box)
    sup2, _ = _dtau_sup(step, model, box.doubled())
    half = np.zeros((1, box.d), dtype=np.int64)
    half[0, 0] = max(1, box.R // 2)
    at_half = float(d_conv(step, model.tau, half)[0] / model.tau(half)[0])
    return DtauReport(sup, sup2, arg, at_half, box.R)


# ---------------------------------------------------------------------------
# triangle constant


def triangle_value(model: KernelModel, box: LatticeBox, u, v) -> float:
    """``sum_{x,y in box} tau(u-x) tau(x-y) tau(y-v)``."""
    u = np.asarray(u)
    v = np.asarray(v)
    a = model.tau(u - box.points).reshape(box.shape)
    b = convolve_lattice(a, model.tau, box, method="fft")
    c = model.tau(box.points - v).reshape(box.shape)
    return float(np.sum(b * c))


def triangle_sup(model: KernelModel, box: LatticeBox, pairs=None) -> tuple[float, tuple]:
    """Largest triangle value over candidate ``(u, v)`` pairs.

    By default the pairs place ``u`` at the centre and ``v`` at distance
    0, 1, 2 along the first axis, where the truncated sum is largest.
    """
    if pairs is None:
        z = (0,) * model.d
        pairs = []
        for r in (0, 1, 2):
            v = [0] * model.d
            v[0] = r
            pairs.append((z, tuple(v)))
    best = max((triangle_value(model, box, u, v), (u, v)) for u, v in pairs)
    return best


# ---------------------------------------------------------------------------
# A^(N) transfer recursion


class LoopTransfer:
    """Transfer-matrix evaluation of the chained loop diagrams ``A^(N)``.

    Pair functions ``F(u, v)`` are stored as ``size x size`` matrices over
    the box.  One backward step applies the kernel ``A1 + A2``; the dashed
    factor ``p (D*tau)(t, x) = p sum_w D(w - t) tau(w - x)`` is exact, with
    ``w`` unrestricted.

    ``work_budget`` bounds the estimated floating-point work and
    ``mem_budget`` the bytes held in dense matrices; exceeding either raises
    :class:`Infeasible` before any heavy computation starts.
    """

    def __init__(
        self,
        model: KernelModel,
        step: StepKernel,
        box: LatticeBox,
        p: float | None = None,
        work_budget: float = 2e12,
        mem_budget: float = 2.5e9,
    ):
        self.model, self.step, self.box = model, step, box
        self.p = 1.0 / (2 * box.d) if p is None else float(p)
        self.work_budget = work_budget
        self.mem_budget = mem_budget
        self._T = None
        self._P = None

    # costs -----------------------------------------------------------------

    def estimated_work(self, N: int) -> float:
        n = float(self.box.size)
        if N <= 1:
            return 0.0
        return 6 * n**3 + (N - 2) * (2 * n**4 + 6 * n**3)

    def estimated_memory(self) -> float:
        return 8.0 * 8 * self.box.size**2

    def _check(self, N: int):
        w, m = self.estimated_work(N), self.estimated_memory()
        if m > self.mem_budget:
            raise Infeasible(
                f"A^({N}) on radius {self.box.R}: needs ~{m / 1e9:.2f} GB of matrices, "
                f"budget {self.mem_budget / 1e9:.2f} GB"
            )
        if w > self.work_budget:
            raise Infeasible(
                f"A^({N}) on radius {self.box.R}: estimated {w:.3g} flops exceeds "
                f"budget {self.work_budget:.3g}; the A2 block costs size^4"
            )

    # kernels -----------------------------------------------------------------

    def _diff_index(self) -> np.ndarray:
        box = self.box
        side2 = 4 * box.R + 1
        strides = side2 ** np.arange(box.d - 1, -1, -1)
        A = box.points @ strides
        c = int(np.sum(2 * box.R * strides))
        return A[:, None] - A[None, :] + c

    @property
    def T(self) -> np.ndarray:
        if self._T is None:
            big = self.box.doubled()
            tab = self.model.tau(big.points)
            self._T = tab[self._diff_index()]
        return self._T

    @property
    def P(self) -> np.ndarray:
        """``P[t, x] = p (D*tau)(t - x)``."""
        if self._P is None:
            big = self.box.doubled()
            tab = self.p * d_conv(self.step, self.model.tau, big.points)
            self._P = tab[self._diff_index()]
        return self._P

    def end(self, x: int) -> np.ndarray:
        """``A_end(u, v, x) = tau(u,x) tau(u,v) tau(v,x)`` as a matrix in ``(u, v)``."""
        col = self.T[:, x]
        return col[:, None] * self.T * col[None, :]

    def _G(self, F: np.ndarray) -> np.ndarray:
        # G[s, t] = sum_{u', v'} tau(s, v') P(t, u') F(u', v')
        return self.T @ (self.P @ F).T

    def full_step(self, F: np.ndarray) -> np.ndarray:
        """``(A1 + A2) F`` for every pair ``(u, v)``."""
        T = self.T
        G = self._G(F)
        out = T @ (T * G) @ T
        for u in range(T.shape[0]):
            M = (T * G[u][None, :]) @ T  # M[s, v] = sum_t T[s,t] G[u,t] T[t,v]
            out[u] += np.einsum("s,sv,sv->v", T[u], T, M)
        return out

    def point_step(self, F: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
        """``(A1 + A2) F`` at selected index pairs ``(u, v)``."""
        T = self.T
        G = self._G(F)
        H = T * G
        out = np.empty(len(pairs))
        for k, (u, v) in enumerate(pairs):
            a1 = T[u] @ H @ T[:, v]
            a2 = (T[u] * T[v]) @ T @ (T[v] * G[u])
            out[k] = a1 + a2
        return out

    # public ------------------------------------------------------------------

    def _idx(self, pt) -> int:
        return self.box.index(tuple(int(c) for c in pt))

    def a_n_many(self, N: int, triples: Sequence[tuple]) -> np.ndarray:
        """``A^(N)(u, v, x)`` for each ``(u, v, x)`` (points in the box)."""
        if N < 1:
            raise ValueError("N must be >= 1")
        idx = [(self._idx(u), self._idx(v), self._idx(x)) for u, v, x in triples]
        if N == 1:
            tau = self.model.tau
            return np.array(
                [
                    float(tau(np.subtract([u], [x]))[0] * tau(np.subtract([u], [v]))[0] * tau(np.subtract([v], [x]))[0])
                    for u, v, x in triples
                ]
            )
        self._check(N)
        out = np.empty(len(idx))
        for x in sorted({k[2] for k in idx}):
            sel = [i for i, k in enumerate(idx) if k[2] == x]
            F = self.end(x)
            for _ in range(N - 2):
                F = self.full_step(F)
            out[sel] = self.point_step(F, [idx[i][:2] for i in sel])
        return out

    def a_n(self, N: int, u, v, x) -> float:
        return float(self.a_n_many(N, [(u, v, x)])[0])

    def series(self, N_max: int, triples: Sequence[tuple]) -> np.ndarray:
        """Array ``[N-1, i] = A^(N)(triple_i)`` for ``N = 1..N_max``, sharing work."""
        if N_max < 1:
            raise ValueError("N_max must be >= 1")
        out = np.zeros((N_max, len(triples)))
        out[0] = self.a_n_many(1, triples)
        if N_max == 1:
            return out
        self._check(N_max)
        idx = [(self._idx(u), self._idx(v), self._idx(x)) for u, v, x in triples]
        for x in sorted({k[2] for k in idx}):
            sel = [i for i, k in enumerate(idx) if k[2] == x]
            F = self.end(x)
            for N in range(2, N_max + 1):
                out[N - 1, sel] = self.point_step(F, [idx[i][:2] for i in sel])
                if N < N_max:
                    F = self.full_step(F)
        return out

    def aass_ratio(self, N_max: int, triples: Sequence[tuple]) -> tuple[float, np.ndarray]:
        """Max over triples of ``sum_{N<=N_max} A^(N) / (tau tau tau)``, and all ratios."""
        s = self.series(N_max, triples).sum(axis=0)
        den = self.a_n_many(1, triples)
        ratios = s / den
        return float(ratios.max()), ratios


def default_triples(d: int, scale: int = 2) -> list[tuple]:
    """Sample ``(u, v, x)`` triples with distinct points on the coordinate axes."""
    def e(i, r):
        p = [0] * d
        p[i % d] = r
        return tuple(p)

    z = (0,) * d
    return [
        (z, e(0, scale), e(1, scale)),
        (e(0, scale), e(1, scale), z),
        (z, e(0, 1), e(0, scale)),
    ]
