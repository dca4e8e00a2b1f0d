from __future__ import annotations

import itertools

import networkx as nx
import numpy as np
import pytest

from lacelab.errors import BadP, DegenerateTargets, OutOfBox
from lacelab.percolation import (
    PercLattice,
    PercParams,
    bernoulli_se,
    connected,
    disjoint_two_arm,
    estimate,
    estimate_tau,
    exact_probabilities,
    sample_config,
)


def oracle(lat, p, o, targets, quantity):
    """Exhaustive sum over bond configurations using networkx."""
    sites = [tuple(int(c) for c in s) for s in lat.sites]
    E = [(sites[a], sites[b]) for a, b in lat.edges]
    out = np.zeros(len(targets))
    for bits in itertools.product((0, 1), repeat=len(E)):
        k = sum(bits)
        w = p**k * (1 - p) ** (len(E) - k)
        H = nx.Graph()
        H.add_nodes_from(sites)
        H.add_edges_from(e for e, b in zip(E, bits) if b)
        for j, t in enumerate(targets):
            if quantity == "tau":
                hit = nx.has_path(H, o, t)
            else:
                D = nx.DiGraph()
                for a, b in H.edges:
                    D.add_edge(a, b, capacity=1)
                    D.add_edge(b, a, capacity=1)
                D.add_node(o)
                for s in t:
                    D.add_edge(s, "sink", capacity=1)
                hit = nx.maximum_flow_value(D, o, "sink") >= 2
            out[j] += w * hit
    return out


def test_p0_and_p1():
    lat = PercLattice.cube(2, 3)
    empty = sample_config(PercParams(lat, 0.0, 1), 0)
    full = sample_config(PercParams(lat, 1.0, 1), 0)
    assert empty.num_occupied == 0 and full.num_occupied == lat.num_edges
    assert connected(full, (-3, -3), (3, 3)) and not connected(empty, (0, 0), (1, 0))
    assert connected(empty, (1, 1), (1, 1))
    assert disjoint_two_arm(full, (0, 0), (1, 0), (0, 1))


def test_occupied_fraction():
    lat = PercLattice.cube(2, 5)
    params = PercParams(lat, 0.3, 7)
    occ = np.array([sample_config(params, i).num_occupied for i in range(10_000)])
    frac = occ.sum() / (10_000 * lat.num_edges)
    se = bernoulli_se(0.3, 10_000 * lat.num_edges)
    assert abs(frac - 0.3) < 3 * se


def test_sample_is_pure_function_of_seed_and_index():
    params = PercParams(PercLattice.cube(3, 2), 0.5, 42)
    a, b = sample_config(params, 17), sample_config(params, 17)
    assert np.array_equal(a.occupied, b.occupied)
    assert not np.array_equal(a.occupied, sample_config(params, 18).occupied)


def test_edge_sets():
    assert PercLattice.cube(2, 1).num_edges == 12
    assert PercLattice((0, 0), (1, 1), "spread", 1).num_edges == 6
    assert PercLattice.cube(1, 2).num_edges == 4


def test_chain_connection_is_p_squared():
    lat = PercLattice((0,), (2,))
    assert exact_probabilities(lat, 0.3, (0,), [(2,)])[0] == pytest.approx(0.09, rel=1e-14)


def test_degree_one_origin_has_no_two_arms():
    lat = PercLattice((0, 0), (2, 1))
    sub = [i for i, (a, b) in enumerate(lat.edges) if 0 in (a, b)]
    params = PercParams(lat, 1.0, 0)
    cfg = sample_config(params, 0)
    occ = cfg.occupied.copy()
    occ[sub[0]] = False  # origin corner keeps a single bond
    cfg = type(cfg)(lat, 1.0, occ)
    assert not disjoint_two_arm(cfg, (0, 0), (1, 1), (2, 1))


@pytest.mark.parametrize(
    "lat, o, tau_t, sig_t",
    [
        (PercLattice((0, 0), (1, 1)), (0, 0), [(1, 1), (0, 1)], [((1, 0), (0, 1)), ((1, 1), (0, 1))]),
        (PercLattice((-1, -1), (1, 1)), (0, 0), [(1, 1), (-1, 0)], [((1, 0), (0, 1)), ((1, 1), (-1, -1))]),
        (PercLattice((0, 0, 0), (1, 1, 1)), (0, 0, 0), [(1, 1, 1)], [((1, 0, 0), (1, 1, 1))]),
        (PercLattice((0, 0), (1, 1), "spread", 1), (0, 0), [(1, 1)], [((1, 0), (1, 1))]),
    ],
)
def test_exact_matches_oracle_and_mc(lat, o, tau_t, sig_t):
    p = 0.5
    for q, t in (("tau", tau_t), ("sigma", sig_t)):
        ex = exact_probabilities(lat, p, o, t, q)
        assert np.allclose(ex, oracle(lat, p, o, t, q), rtol=1e-12, atol=1e-15)
        mc = estimate(q, t, PercParams(lat, p, 3), 20_000, origin=o, margin=0)
        for e, v in zip(mc, ex):
            assert abs(e.value - v) <= 3 * max(e.stderr, 1e-9)


def test_tau_at_p0_is_delta():
    lat = PercLattice.cube(2, 4)
    est = estimate_tau([(0, 0), (1, 0), (-2, 1)], PercParams(lat, 0.0, 1), 100)
    assert [e.value for e in est] == [1.0, 0.0, 0.0]


def test_monotone_in_p_by_coupling():
    lat = PercLattice.cube(2, 8)
    targets = [(1, 0), (2, 1), (4, 0)]
    vals = [
        [e.value for e in estimate_tau(targets, PercParams(lat, p, 5), 4000)]
        for p in (0.2, 0.3, 0.4)
    ]
    # shared uniforms: every open bond at lower p is open at higher p
    assert all(a <= b for lo, hi in zip(vals, vals[1:]) for a, b in zip(lo, hi))


def test_symmetry_and_sigma_bounds():
    lat = PercLattice.cube(2, 8)
    params = PercParams(lat, 0.45, 9)
    pts = [(2, 1), (-1, 2), (1, -2), (-2, -1)]
    est = estimate_tau(pts, params, 20_000)
    for a, b in itertools.combinations(est, 2):
        assert abs(a.value - b.value) <= 3 * np.hypot(a.stderr, b.stderr)
    sig = estimate("sigma", [((2, 0), (0, 2)), ((1, 0), (-1, 0))], params, 20_000)
    for s in sig:
        tx, tx2 = s.params["tau_x"], s.params["tau_x2"]
        assert s.value <= min(tx, tx2) + 3 * s.stderr
        assert s.value <= tx * tx2 + 3 * s.stderr
        assert s.ratio is not None and s.ratio_stderr > 0


def test_determinism_across_workers(monkeypatch):
    lat = PercLattice.cube(2, 6)
    params = PercParams(lat, 0.5, 11)
    t = [((1, 0), (0, 2)), ((2, 2), (-1, 0))]
    runs = []
    for threads in ("1", "3", "0"):
        monkeypatch.setenv("LACELAB_THREADS", threads)
        runs.append(estimate("sigma", t, params, 2000))
    runs.append(estimate("sigma", t, params, 2000, workers=2))
    assert all(r == runs[0] for r in runs)
    assert all(a.params == b.params for a, b in zip(runs[0], runs[-1]))


def test_errors():
    lat = PercLattice.cube(2, 4)
    with pytest.raises(BadP):
        PercParams(lat, 1.5)
    with pytest.raises(BadP):
        PercParams(lat, float("nan"))
    with pytest.raises(OutOfBox):
        estimate_tau([(3, 0)], PercParams(lat, 0.5), 10)
    with pytest.raises(OutOfBox):
        lat.index((5, 0))
    cfg = sample_config(PercParams(lat, 0.5), 0)
    with pytest.raises(DegenerateTargets):
        disjoint_two_arm(cfg, (0, 0), (1, 0), (1, 0))
    with pytest.raises(DegenerateTargets):
        estimate("sigma", [((1, 0), (1, 0))], PercParams(lat, 0.5), 10)
    with pytest.raises(ValueError):
        exact_probabilities(PercLattice.cube(2, 2), 0.5, (0, 0), [(1, 0)])
