"""Bond percolation on finite boxes: sampling, connectivity, two-arm events.

Sample ``i`` of a run is a pure function of ``(seed, i)``: its uniforms come
from a Philox generator whose counter starts at ``[0, 0, 0, i]``, so the
streams of different samples never overlap and any split of the samples
over threads gives the same tallies.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numba
import numpy as np

from .errors import BadP, DegenerateTargets, OutOfBox
from .parallel import pmap

CHUNK = 512  # samples per work unit


# ---------------------------------------------------------------------------
# lattice


@dataclass(frozen=True)
class PercLattice:
    """Sites of the box ``lo <= x <= hi`` with nearest-neighbour or spread-out bonds.

    Spread-out bonds join sites at sup-distance ``1..L``.
    """

    lo: tuple[int, ...]
    hi: tuple[int, ...]
    kernel: str = "nn"
    L: int = 1

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ValueError("lo and hi must have the same positive length")
        if any(a > b for a, b in zip(self.lo, self.hi)):
            raise ValueError("empty box")
        if self.kernel not in ("nn", "spread"):
            raise ValueError(f"kernel must be 'nn' or 'spread', got {self.kernel!r}")
        if self.L < 1:
            raise ValueError("L must be >= 1")

    @classmethod
    def cube(cls, d: int, radius: int, kernel: str = "nn", L: int = 1) -> "PercLattice":
        return cls((-radius,) * d, (radius,) * d, kernel, L)

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lo, self.hi))

    @property
    def num_sites(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def sites(self) -> np.ndarray:
        axes = [np.arange(a, b + 1) for a, b in zip(self.lo, self.hi)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)

    def contains(self, x: Sequence[int]) -> bool:
        return len(x) == self.d and all(a <= c <= b for a, c, b in zip(self.lo, x, self.hi))

    def index(self, x: Sequence[int]) -> int:
        if not self.contains(x):
            raise OutOfBox(f"point {tuple(x)} is outside the box {self.lo}..{self.hi}")
        i = 0
        for a, c, n in zip(self.lo, x, self.shape):
            i = i * n + (int(c) - a)
        return i

    @cached_property
    def offsets(self) -> np.ndarray:
        """Half of the bond offsets (lexicographically positive ones)."""
        d = self.d
        if self.kernel == "nn":
            offs = [tuple(1 if j == i else 0 for j in range(d)) for i in range(d)]
        else:
            rng = range(-self.L, self.L + 1)
            offs = [o for o in itertools.product(rng, repeat=d) if any(o) and o > (0,) * d]
        return np.array(offs, dtype=np.int64).reshape(-1, d)

    @cached_property
    def edges(self) -> np.ndarray:
        """Bonds as an ``(E, 2)`` array of site indices, in a fixed order."""
        shape = np.array(self.shape)
        rel = self.sites - np.array(self.lo)
        strides = np.array([int(np.prod(shape[i + 1 :])) for i in range(self.d)], dtype=np.int64)
        out = []
        for o in self.offsets:
            q = rel + o
            ok = np.all((q >= 0) & (q < shape), axis=1)
            a = np.nonzero(ok)[0]
            b = q[ok] @ strides
            out.append(np.stack([a, b], axis=1))
        E = np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)
        return np.ascontiguousarray(E, dtype=np.int64)

    @property
    def num_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class PercParams:
    lattice: PercLattice
    p: float
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0) or math.isnan(self.p):
            raise BadP(f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class PercConfig:
    lattice: PercLattice
    p: float
    occupied: np.ndarray = field(repr=False)
    seed: int = 0
    index: int = 0

    @property
    def num_occupied(self) -> int:
        return int(self.occupied.sum())


def _uniforms(seed: int, i: int, n: int) -> np.ndarray:
    bg = np.random.Philox(key=int(seed), counter=np.array([0, 0, 0, int(i)], dtype=np.uint64))
    return np.random.Generator(bg).random(n)


def sample_config(params: PercParams, i: int) -> PercConfig:
    """Configuration number ``i``: each bond open independently with probability ``p``."""
    if i < 0:
        raise ValueError("sample index must be >= 0")
    lat = params.lattice
    occ = _uniforms(params.seed, i, lat.num_edges) < params.p
    return PercConfig(lat, params.p, occ, params.seed, i)


# ---------------------------------------------------------------------------
# kernels


@numba.njit(cache=True, nogil=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@numba.njit(cache=True, nogil=True)
def _components(n, edges, occ):
    parent = np.arange(n)
    for k in range(edges.shape[0]):
        if occ[k]:
            a = _find(parent, edges[k, 0])
            b = _find(parent, edges[k, 1])
            if a != b:
                if a < b:
                    parent[b] = a
                else:
                    parent[a] = b
    for v in range(n):
        parent[v] = _find(parent, v)
    return parent


@numba.njit(cache=True, nogil=True)
def _two_arm(n, edges, occ, o, x, x2):
    """Max flow from ``o`` to a sink fed by unit arcs from ``x`` and ``x2`` is >= 2."""
    m = edges.shape[0]
    # residual graph: arc 2k goes a->b, arc 2k+1 goes b->a, each capacity 1 if open
    deg = np.zeros(n + 1, dtype=np.int64)
    for k in range(m):
        if occ[k]:
            deg[edges[k, 0]] += 1
            deg[edges[k, 1]] += 1
    start = np.zeros(n + 2, dtype=np.int64)
    for v in range(n + 1):
        start[v + 1] = start[v] + deg[v]
    # sink n gets arcs from x and x2; they are stored separately
    fill = start[:-1].copy()
    arc_to = np.empty(start[n + 1] + 1, dtype=np.int64)
    arc_id = np.empty(start[n + 1] + 1, dtype=np.int64)
    for k in range(m):
        if occ[k]:
            a, b = edges[k, 0], edges[k, 1]
            arc_to[fill[a]] = b
            arc_id[fill[a]] = 2 * k
            fill[a] += 1
            arc_to[fill[b]] = a
            arc_id[fill[b]] = 2 * k + 1
            fill[b] += 1
    flow = np.zeros(2 * m, dtype=np.int8)  # flow on arc, in {0, 1}
    sink_used = np.zeros(2, dtype=np.int8)  # arcs x->sink, x2->sink
    prev_v = np.empty(n, dtype=np.int64)
    prev_a = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    total = 0
    for _ in range(2):
        for v in range(n):
            prev_v[v] = -2
        prev_v[o] = -1
        head, tail = 0, 0
        queue[tail] = o
        tail += 1
        hit = -1
        while head < tail and hit < 0:
            v = queue[head]
            head += 1
            if v == x and sink_used[0] == 0:
                hit = 0
                break
            if v == x2 and sink_used[1] == 0:
                hit = 1
                break
            for j in range(start[v], start[v + 1]):
                w = arc_to[j]
                a = arc_id[j]
                rev = a ^ 1
                # residual capacity 1 - flow[a] + flow[rev] is positive
                if prev_v[w] == -2 and (flow[a] == 0 or flow[rev] == 1):
                    prev_v[w] = v
                    prev_a[w] = a
                    queue[tail] = w
                    tail += 1
        if hit < 0:
            break
        sink_used[hit] = 1
        v = x if hit == 0 else x2
        while v != o:
            a = prev_a[v]
            rev = a ^ 1
            if flow[rev] == 1:
                flow[rev] = 0
            else:
                flow[a] = 1
            v = prev_v[v]
        total += 1
    return total >= 2


@numba.njit(cache=True, nogil=True)
def _tally(n, edges, occ, o, tau_idx, pair_idx, tau_cnt, pair_cnt):
    comp = _components(n, edges, occ)
    c0 = comp[o]
    for t in range(tau_idx.shape[0]):
        if comp[tau_idx[t]] == c0:
            tau_cnt[t] += 1
    for t in range(pair_idx.shape[0]):
        x, x2 = pair_idx[t, 0], pair_idx[t, 1]
        if comp[x] == c0 and comp[x2] == c0:
            if _two_arm(n, edges, occ, o, x, x2):
                pair_cnt[t] += 1


# ---------------------------------------------------------------------------
# events


def connected(config: PercConfig, a: Sequence[int], b: Sequence[int]) -> bool:
    """Whether ``a`` and ``b`` are joined by open bonds (``a == b`` is always true)."""
    lat = config.lattice
    ia, ib = lat.index(a), lat.index(b)
    if ia == ib:
        return True
    comp = _components(lat.num_sites, lat.edges, config.occupied)
    return bool(comp[ia] == comp[ib])


def disjoint_two_arm(config: PercConfig, o: Sequence[int], x: Sequence[int], x2: Sequence[int]) -> bool:
    """Whether bond-disjoint open paths join ``o`` to ``x`` and ``o`` to ``x2``."""
    lat = config.lattice
    io, ix, ix2 = lat.index(o), lat.index(x), lat.index(x2)
    if ix == ix2:
        raise DegenerateTargets("the two targets must differ")
    return bool(_two_arm(lat.num_sites, lat.edges, config.occupied, io, ix, ix2))


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class McEstimate:
    quantity: str
    target: tuple
    value: float
    stderr: float
    samples: int
    seed: int
    params: dict = field(default_factory=dict, compare=False)
    ratio: float | None = None
    ratio_stderr: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("estimate outside [0, 1]")


def bernoulli_se(value: float, n: int) -> float:
    return math.sqrt(max(value * (1.0 - value), 0.0) / n)


def check_margin(lattice: PercLattice, o, targets, margin: float):
    """Every target must sit well inside the box: radius >= margin * |target - o|_inf."""
    if not margin:
        return
    o = np.asarray(o)
    room = min(min(c - a, b - c) for a, c, b in zip(lattice.lo, o, lattice.hi))
    far = max(int(np.max(np.abs(np.asarray(t) - o))) for t in targets)
    if room < margin * far:
        raise OutOfBox(
            f"box leaves {room} sites around the origin but targets reach {far}; "
            f"margin {margin:g} needs at least {math.ceil(margin * far)}"
        )


def _resolve(lattice: PercLattice, quantity: str, targets):
    if quantity == "tau":
        pts = [tuple(int(c) for c in t) for t in targets]
        return pts, [], [lattice.index(t) for t in pts], []
    if quantity == "sigma":
        pairs = [(tuple(int(c) for c in a), tuple(int(c) for c in b)) for a, b in targets]
        for a, b in pairs:
            if a == b:
                raise DegenerateTargets(f"two-arm target {a} repeated")
        singles = sorted({t for pr in pairs for t in pr})
        return singles, pairs, [lattice.index(t) for t in singles], [(lattice.index(a), lattice.index(b)) for a, b in pairs]
    raise ValueError(f"quantity must be 'tau' or 'sigma', got {quantity!r}")


def estimate(
    quantity: str,
    targets,
    params: PercParams,
    samples: int,
    origin: Sequence[int] | None = None,
    margin: float = 2.0,
    workers: int | None = None,
) -> list[McEstimate]:
    """Monte Carlo estimates of ``tau(origin, x)`` or ``sigma(origin; x, x')``.

    ``targets`` are points for ``tau`` and pairs of points for ``sigma``.  For
    ``sigma`` each estimate also carries ``sigma / (tau(x) tau(x'))`` with a
    first-order propagated error; the arm probabilities come from the same
    samples.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    lat = params.lattice
    o = tuple(origin) if origin is not None else (0,) * lat.d
    io = lat.index(o)
    singles, pairs, s_idx, p_idx = _resolve(lat, quantity, targets)
    check_margin(lat, o, singles, margin)
    s_idx = np.array(s_idx, dtype=np.int64)
    p_idx = np.array(p_idx, dtype=np.int64).reshape(-1, 2)
    n, E, edges = lat.num_sites, lat.num_edges, lat.edges

    def work(lo):
        tc = np.zeros(len(s_idx), dtype=np.int64)
        pc = np.zeros(len(p_idx), dtype=np.int64)
        for i in range(lo, min(lo + CHUNK, samples)):
            occ = _uniforms(params.seed, i, E) < params.p
            _tally(n, edges, occ, io, s_idx, p_idx, tc, pc)
        return tc, pc

    parts = pmap(work, range(0, samples, CHUNK), workers)
    tau_cnt = sum(p[0] for p in parts)
    pair_cnt = sum(p[1] for p in parts)
    info = {"d": lat.d, "kernel": lat.kernel, "L": lat.L, "p": params.p, "lo": lat.lo, "hi": lat.hi, "origin": o}
    taus = {}
    for t, c in zip(singles, tau_cnt):
        v = int(c) / samples
        taus[t] = McEstimate("tau", t, v, bernoulli_se(v, samples), samples, params.seed, info)
    if quantity == "tau":
        return [taus[t] for t in singles]
    out = []
    for (a, b), c in zip(pairs, pair_cnt):
        v = int(c) / samples
        se = bernoulli_se(v, samples)
        ta, tb = taus[a], taus[b]
        ratio = rse = None
        if ta.value > 0 and tb.value > 0:
            ratio = v / (ta.value * tb.value)
            rel = (se / v) ** 2 if v > 0 else 0.0
            rel += (ta.stderr / ta.value) ** 2 + (tb.stderr / tb.value) ** 2
            rse = ratio * math.sqrt(rel) if v > 0 else se / (ta.value * tb.value)
        extra = dict(info, tau_x=ta.value, tau_x_se=ta.stderr, tau_x2=tb.value, tau_x2_se=tb.stderr)
        out.append(McEstimate("sigma", (a, b), v, se, samples, params.seed, extra, ratio, rse))
    return out


def estimate_tau(targets, params: PercParams, samples: int, **kw) -> list[McEstimate]:
    return estimate("tau", targets, params, samples, **kw)


# ---------------------------------------------------------------------------
# exact oracle


MAX_EXACT_EDGES = 20


def exact_probabilities(lattice: PercLattice, p: float, origin, targets, quantity: str = "tau") -> list[float]:
    """Exact event probabilities by summing over all ``2^E`` configurations."""
    E = lattice.num_edges
    if E > MAX_EXACT_EDGES:
        raise ValueError(f"{E} bonds is too many for exhaustive enumeration (max {MAX_EXACT_EDGES})")
    if not 0.0 <= p <= 1.0:
        raise BadP(f"p must lie in [0, 1], got {p}")
    o = tuple(origin)
    io = lattice.index(o)
    out = np.zeros(len(targets))
    if quantity == "sigma":
        idx = [(lattice.index(a), lattice.index(b)) for a, b in targets]
        if any(a == b for a, b in idx):
            raise DegenerateTargets("two-arm targets must differ")
    elif quantity == "tau":
        idx = [lattice.index(t) for t in targets]
    else:
        raise ValueError(f"quantity must be 'tau' or 'sigma', got {quantity!r}")
    for bits in range(1 << E):
        occ = np.array([(bits >> k) & 1 for k in range(E)], dtype=np.bool_)
        k = int(occ.sum())
        w = p**k * (1 - p) ** (E - k)
        if w == 0.0:
            continue
        if quantity == "tau":
            comp = _components(lattice.num_sites, lattice.edges, occ)
            for j, t in enumerate(idx):
                out[j] += w * (comp[t] == comp[io])
        else:
            for j, (a, b) in enumerate(idx):
                out[j] += w * _two_arm(lattice.num_sites, lattice.edges, occ, io, a, b)
    return [float(v) for v in out]
