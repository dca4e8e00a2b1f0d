from __future__ import annotations

import itertools

import numpy as np
import pytest

from lacelab.errors import Infeasible, LabelOutsideBox
from lacelab.kernels import (
    KernelModel,
    LatticeBox,
    LoopTransfer,
    StepKernel,
    convolve_lattice,
    d_conv,
    decay_slope,
    default_triples,
    dtau_ratio_sup,
    eval_tau,
    power_law,
    triangle_sup,
)

M3 = KernelModel(d=3, alpha=2.5)


def test_eval_tau_closed_form_and_symmetry():
    assert eval_tau(M3, (2, 0, 0)) == pytest.approx(2**-2.5, rel=1e-15)
    assert eval_tau(M3, (0, 0, 0)) == 1.0
    x = (3, -1, 2)
    for perm in itertools.permutations(x):
        for signs in itertools.product((1, -1), repeat=3):
            y = tuple(s * c for s, c in zip(signs, perm))
            assert eval_tau(M3, y) == eval_tau(M3, x)


def test_kernel_model_validation():
    with pytest.raises(ValueError):
        KernelModel(d=3)
    with pytest.raises(ValueError):
        KernelModel(d=3, alpha=-1.0)


def test_empirical_table_from_csv(tmp_path):
    p = tmp_path / "tau.csv"
    p.write_text("x1,x2,value\n0,0,1\n1,0,0.5\n0,1,0.5\n-1,0,0.5\n0,-1,0.5\n")
    m = KernelModel.from_csv(p)
    assert m.mode == "empirical" and m.d == 2
    assert eval_tau(m, (1, 0)) == 0.5 and eval_tau(m, (5, 5)) == 0.0


@pytest.mark.parametrize("step", [StepKernel("nn", 3), StepKernel("spread", 3, 1), StepKernel("spread", 2, 3)])
def test_step_kernel_normalised(step):
    assert step.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert step.D(np.zeros((1, step.d), dtype=int))[0] == 0.0
    assert np.all(step.D(step.offsets) == step.weight)


def test_spread_l1_is_the_26_shell():
    s = StepKernel("spread", 3, 1)
    assert len(s.offsets) == 26
    shell = {p for p in itertools.product((-1, 0, 1), repeat=3) if p != (0, 0, 0)}
    assert {tuple(p) for p in s.offsets} == shell


def test_dtau_at_origin_is_one():
    val = d_conv(StepKernel("nn", 3), M3.tau, np.zeros((1, 3), dtype=int))[0]
    assert val == pytest.approx(1.0, rel=1e-15)


def test_point_mass_is_identity():
    box = LatticeBox(3, 2)
    delta = np.zeros(box.shape)
    delta[3, 3] = 1.0
    for method in ("direct", "fft"):
        out = convolve_lattice(delta, delta, box, method=method)
        assert np.allclose(out, delta, atol=1e-14)


def test_fft_matches_direct_on_random_tables():
    rng = np.random.default_rng(0)
    for d, R in ((1, 9), (2, 5), (3, 3)):
        box = LatticeBox(R, d)
        f = rng.random(box.shape)
        g = rng.random(box.shape)
        a = convolve_lattice(f, g, box, method="direct")
        b = convolve_lattice(f, g, box, method="fft")
        assert np.max(np.abs(a - b) / np.abs(a)) < 1e-10


def test_fft_matches_direct_for_closed_form():
    box = LatticeBox(5, 3)
    a = convolve_lattice(M3.tau, M3.tau, box, method="direct")
    b = convolve_lattice(M3.tau, M3.tau, box, method="fft")
    assert np.max(np.abs(a - b) / a) < 1e-10


def test_direct_against_naive_sum():
    box = LatticeBox(2, 2)
    m = KernelModel(d=2, alpha=1.5)
    x = (1, -2)
    naive = sum(eval_tau(m, y) * eval_tau(m, (x[0] - y[0], x[1] - y[1])) for y in map(tuple, box.points))
    assert convolve_lattice(m.tau, m.tau, box, at=[x])[0] == pytest.approx(naive, rel=1e-13)


def test_tau_tau_slope():
    slope, _, _ = decay_slope(M3.tau, M3.tau, LatticeBox(32, 3))
    assert abs(slope - (3 - 2 * 2.5)) <= 0.3


@pytest.mark.parametrize("a, b", [(4.0, 2.0), (3.5, 1.5), (2.5, 2.0), (2.8, 1.5)])
def test_decay_regimes(a, b):
    d = 3
    slope, _, _ = decay_slope(power_law(a), power_law(b), LatticeBox(32, d))
    want = -b if a > d else d - (a + b)
    assert abs(slope - want) <= 0.3


def test_dtau_nn_stable():
    rep = dtau_ratio_sup(StepKernel("nn", 3), M3, LatticeBox(20, 3))
    assert np.isfinite(rep.sup) and rep.sup >= 1.0
    assert rep.rel_change < 0.05
    assert abs(rep.at_half - 1.0) < 0.1


def test_dtau_spread_finite():
    rep = dtau_ratio_sup(StepKernel("spread", 3, 1), M3, LatticeBox(10, 3))
    assert np.isfinite(rep.sup) and rep.rel_change < 0.05


def test_triangle_constant_stable():
    d1, _ = triangle_sup(M3, LatticeBox(12, 3))
    d2, _ = triangle_sup(M3, LatticeBox(24, 3))
    assert np.isfinite(d1) and d2 >= d1
    assert (d2 - d1) / d1 < 0.1


# ---------------------------------------------------------------------------
# loop diagrams, checked against an independent tensor contraction


def _oracle_tensors(model, step, box, p):
    pts = box.points
    diff = pts[:, None, :] - pts[None, :, :]
    T = model.tau(diff)
    P = np.zeros_like(T)
    for e in step.offsets:
        P += p * step.weight * model.tau(diff + e)
    # K[u, v, x, y] = A1(u, v, x, y) + A2(u, v, x, y)
    A1 = np.einsum("us,sy,vt,st,tx->uvxy", T, T, T, T, P, optimize=True)
    A2 = np.einsum("uy,us,vs,vt,st,tx->uvxy", T, T, T, T, T, P, optimize=True)
    end = np.einsum("ux,uv,vx->uvx", T, T, T)
    return A1 + A2, end


def _oracle_series(model, step, box, p, N_max):
    K, end = _oracle_tensors(model, step, box, p)
    out = [end]
    cur = end
    for _ in range(N_max - 1):
        cur = np.einsum("uvab,abx->uvx", K, cur, optimize=True)
        out.append(cur)
    return out


def test_loop_transfer_matches_brute_force():
    model = KernelModel(d=2, alpha=1.5)
    step = StepKernel("nn", 2)
    box = LatticeBox(2, 2)
    p = 0.25
    ref = _oracle_series(model, step, box, p, 3)
    lt = LoopTransfer(model, step, box, p=p)
    triples = default_triples(2, scale=1) + [((1, -1), (0, 2), (-2, 0))]
    idx = [tuple(box.index(q) for q in t) for t in triples]
    for N in (1, 2, 3):
        got = lt.a_n_many(N, triples)
        want = np.array([ref[N - 1][i] for i in idx])
        assert np.allclose(got, want, rtol=1e-10, atol=0)
    series = lt.series(3, triples)
    for N in (1, 2, 3):
        assert np.allclose(series[N - 1], [ref[N - 1][i] for i in idx], rtol=1e-10, atol=0)


def test_n2_on_radius_3():
    model = KernelModel(d=2, alpha=1.5)
    step = StepKernel("nn", 2)
    box = LatticeBox(3, 2)
    lt = LoopTransfer(model, step, box)
    triples = default_triples(2)
    ref = _oracle_series(model, step, box, lt.p, 2)[1]
    want = [ref[tuple(box.index(q) for q in t)] for t in triples]
    assert np.allclose(lt.a_n_many(2, triples), want, rtol=1e-10, atol=0)


def test_a1_and_ratio_one():
    box = LatticeBox(3, 3)
    lt = LoopTransfer(M3, StepKernel("nn", 3), box)
    u, v, x = (0, 0, 0), (2, 0, 0), (0, 1, 1)
    want = eval_tau(M3, (-2, 0, 0)) * eval_tau(M3, (0, -1, -1)) * eval_tau(M3, (2, -1, -1))
    assert lt.a_n(1, u, v, x) == pytest.approx(want, rel=1e-15)
    r, ratios = lt.aass_ratio(1, default_triples(3))
    assert r == 1.0 and np.all(ratios == 1.0)


def test_aass_monotone_in_n_and_alpha():
    box = LatticeBox(2, 3)
    step = StepKernel("nn", 3)
    triples = default_triples(3, scale=1)
    by_alpha = []
    for alpha in (2.2, 2.5, 2.8):
        lt = LoopTransfer(KernelModel(d=3, alpha=alpha), step, box)
        s = lt.series(3, triples)
        assert np.all(s >= 0)
        partial = np.cumsum(s, axis=0) / s[0]
        assert np.all(np.diff(partial, axis=0) >= 0)
        by_alpha.append(partial[-1].max())
    assert by_alpha[0] > by_alpha[1] > by_alpha[2]


def test_budgets():
    lt = LoopTransfer(M3, StepKernel("nn", 3), LatticeBox(8, 3))
    with pytest.raises(Infeasible):
        lt.a_n(3, (0, 0, 0), (1, 0, 0), (0, 1, 0))
    small = LoopTransfer(M3, StepKernel("nn", 3), LatticeBox(2, 3), mem_budget=1e3)
    with pytest.raises(Infeasible):
        small.a_n(2, (0, 0, 0), (1, 0, 0), (0, 1, 0))
    with pytest.raises(LabelOutsideBox):
        small.a_n(1, (0, 0, 0), (5, 0, 0), (0, 1, 0))
