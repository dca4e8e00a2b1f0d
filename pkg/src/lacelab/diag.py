"""Numerical diagram values by variable elimination on a finite box.

``Diag(G)`` sums, over all placements of the unlabelled vertices of ``G``
in the box, the product of ``tau(f(a) - f(b))**m`` over edges.  Vertices
are summed out one at a time (greedy minimum degree); a vertex with a
single unlabelled neighbour is absorbed by a lattice convolution, wider
eliminations build dense factors subject to arity and memory budgets.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg.blas import dsyrk
from scipy.signal import fftconvolve

from .algebra import GeneralizedDiagram
from .errors import Infeasible, LabelOutsideBox
from .graph import MAX_KEY_VERTICES, DiagrammaticGraph, canonical_order
from .kernels import KernelModel, LatticeBox


@dataclass
class _Factor:
    vars: tuple[str, ...]
    data: np.ndarray | None = None  # dense table, None for a kernel factor
    power: int = 0  # kernel factor tau(a - b)**power
    digest: bytes = b""  # identifies the computation that produced ``data``


class DiagEvaluator:
    """Evaluates diagrams for one kernel model on one box.

    ``max_arity`` caps the number of variables of a factor created by an
    elimination; ``mem_budget`` caps the bytes of any dense table.  Dense
    ``tau`` matrices are cached per power.  ``center`` translates the box.
    """

    def __init__(
        self,
        model: KernelModel,
        box: LatticeBox,
        max_arity: int = 2,
        mem_budget: float = 1.5e9,
        dense_limit: int = 6000,
        center: Sequence[int] | None = None,
    ):
        if model.d != box.d:
            raise ValueError("model and box dimensions differ")
        self.model, self.box = model, box
        self.max_arity = max_arity
        self.mem_budget = mem_budget
        self.dense_limit = dense_limit
        self.center = np.zeros(box.d, dtype=np.int64) if center is None else np.asarray(center, dtype=np.int64)
        self.points = box.points + self.center
        self._mats: dict[int, np.ndarray] = {}
        self._kern: dict[int, np.ndarray] = {}
        self._factors: OrderedDict[bytes, np.ndarray] = OrderedDict()
        self.cache_bytes = mem_budget / 2

    # tables ------------------------------------------------------------------

    def _check_mem(self, nbytes: float, what: str):
        if nbytes > self.mem_budget:
            raise Infeasible(
                f"{what} needs {nbytes / 1e9:.2f} GB (budget {self.mem_budget / 1e9:.2f} GB); "
                "shrink the box or the graph"
            )

    def matrix(self, power: int) -> np.ndarray:
        if power not in self._mats:
            n = self.box.size
            self._check_mem(8.0 * n * n * 2, f"dense tau matrix on {n} sites")
            diff = self.points[:, None, :] - self.points[None, :, :] if n <= 512 else None
            if diff is not None:
                M = self.model.tau(diff)
            else:
                big = self.box.doubled()
                side = big.side
                strides = side ** np.arange(self.box.d - 1, -1, -1)
                A = self.box.points @ strides
                c = int(np.sum(big.R * strides))
                M = self.model.tau(big.points)[A[:, None] - A[None, :] + c]
            self._mats[power] = M**power
        return self._mats[power]

    def _kernel_table(self, power: int) -> np.ndarray:
        if power not in self._kern:
            big = self.box.doubled()
            self._kern[power] = (self.model.tau(big.points) ** power).reshape(big.shape)
        return self._kern[power]

    def _kernel_apply(self, vec: np.ndarray, power: int) -> np.ndarray:
        """``w -> sum_v vec[v] tau(v - w)**power`` over the box."""
        n = self.box.size
        if n <= self.dense_limit:
            return self.matrix(power).T @ vec
        R = self.box.R
        full = fftconvolve(vec.reshape(self.box.shape), self._kernel_table(power), mode="full")
        return full[(slice(2 * R, 4 * R + 1),) * self.box.d].ravel()

    # evaluation --------------------------------------------------------------

    def _label_index(self, p) -> int:
        q = np.asarray(p, dtype=np.int64) - self.center
        if not self.box.contains(tuple(q)):
            raise LabelOutsideBox(f"label {tuple(p)} outside the box")
        return self.box.index(tuple(q))

    def __call__(self, G: DiagrammaticGraph, order: Sequence[str] | None = None) -> float:
        return self.evaluate(G, order)

    def evaluate(self, G: DiagrammaticGraph, order: Sequence[str] | None = None) -> float:
        if G.dim != self.box.d:
            raise ValueError(f"graph dimension {G.dim} differs from box dimension {self.box.d}")
        lab = G.label_of
        for p in lab.values():
            self._label_index(p)
        tau = self.model.tau
        const = 1.0
        unary: dict[str, np.ndarray] = {v: np.ones(self.box.size) for v in G.unlabeled}
        factors: list[_Factor] = []
        for a, b, m in G.edges:
            if a in lab and b in lab:
                const *= float(tau(np.subtract([lab[a]], [lab[b]]))[0]) ** m
            elif a in lab or b in lab:
                s, v = (a, b) if a in lab else (b, a)
                unary[v] = unary[v] * tau(self.points - np.asarray(lab[s])) ** m
            else:
                factors.append(_Factor((a, b), None, m))
        if not unary:
            return const

        if order is None:
            if len(G.vertices) <= MAX_KEY_VERTICES:
                pos = canonical_order(G)
            else:
                pos = {v: i for i, v in enumerate(G.vertices)}
        else:
            if sorted(order) != sorted(unary):
                raise ValueError("order must list every unlabelled vertex exactly once")
            pos = {v: i for i, v in enumerate(order)}

        remaining = set(unary)
        total = const
        while remaining:
            nb = {v: set() for v in remaining}
            for f in factors:
                for v in f.vars:
                    nb[v].update(w for w in f.vars if w != v)
            if order is None:
                v = min(remaining, key=lambda w: (len(nb[w]), pos[w]))
            else:
                v = min(remaining, key=lambda w: pos[w])
            mine = [f for f in factors if v in f.vars]
            factors = [f for f in factors if v not in f.vars]
            remaining.discard(v)
            u = unary.pop(v)
            others = sorted(nb[v])
            if not others:
                total *= float(np.sum(u))
            elif len(others) == 1 and all(f.data is None for f in mine):
                w = others[0]
                k = sum(f.power for f in mine)
                unary[w] = unary[w] * self._kernel_apply(u, k)
            else:
                new, digest = self._eliminate_cached(v, u, mine, others)
                if len(others) == 1:
                    unary[others[0]] = unary[others[0]] * new
                else:
                    factors.append(_Factor(tuple(others), new, 0, digest))
            if total == 0.0:
                return 0.0
        return total

    def _dense(self, f: _Factor) -> np.ndarray:
        if f.data is not None:
            return f.data
        return self.matrix(f.power)

    def _eliminate_cached(self, v, u, mine, others):
        h = hashlib.blake2b(np.ascontiguousarray(u).tobytes(), digest_size=20)
        for f in mine:
            h.update(repr((tuple(others.index(w) if w != v else -1 for w in f.vars), f.power)).encode())
            h.update(f.digest)
        key = h.digest()
        hit = self._factors.get(key)
        if hit is not None:
            self._factors.move_to_end(key)
            return hit, key
        new = self._eliminate_dense(v, u, mine, others)
        if new.ndim == 2 and new.nbytes <= self.cache_bytes:
            self._factors[key] = new
            while sum(a.nbytes for a in self._factors.values()) > self.cache_bytes:
                self._factors.popitem(last=False)
        return new, key

    def _eliminate_dense(self, v, u, mine, others) -> np.ndarray:
        n = self.box.size
        if len(others) > self.max_arity:
            raise Infeasible(
                f"eliminating {v} creates a factor over {len(others)} vertices "
                f"(max arity {self.max_arity}); shrink the graph or raise max_arity"
            )
        self._check_mem(8.0 * n ** len(others), f"factor over {len(others)} vertices")
        if len(others) == 2 and all(len(f.vars) == 2 for f in mine):
            a, b = others
            kern = [f for f in mine if f.data is None]
            if len(kern) == 2 and len(mine) == 2 and kern[0].power == kern[1].power and np.all(u >= 0):
                # sum_v u(v) T(v, a) T(v, b) is a symmetric rank-n update
                B = np.sqrt(u)[:, None] * self.matrix(kern[0].power)
                C = dsyrk(1.0, B, trans=1)
                return np.triu(C) + np.triu(C, 1).T
            mats = {a: None, b: None}
            for f in mine:
                w = f.vars[0] if f.vars[1] == v else f.vars[1]
                M = self._dense(f)
                if f.vars[0] != v:
                    M = M.T
                mats[w] = M if mats[w] is None else mats[w] * M
            return (mats[a] * u[:, None]).T @ mats[b]
        letters = {name: chr(ord("a") + i) for i, name in enumerate([v] + list(others))}
        ops, subs = [u], [letters[v]]
        for f in mine:
            ops.append(self._dense(f))
            subs.append("".join(letters[x] for x in f.vars))
        out = "".join(letters[x] for x in others)
        return np.einsum(",".join(subs) + "->" + out, *ops, optimize="greedy")


def eval_diag(G: DiagrammaticGraph, model: KernelModel, box: LatticeBox, **kw) -> float:
    """``Diag(G)`` on ``box`` (see :class:`DiagEvaluator` for options)."""
    return DiagEvaluator(model, box, **kw).evaluate(G)


def eval_family(fam: GeneralizedDiagram, model: KernelModel, box: LatticeBox, **kw) -> float:
    """Sum of member values of a generalized diagram."""
    ev = DiagEvaluator(model, box, **kw)
    return float(sum(ev.evaluate(g) for g in fam.members))
