import math

import numpy as np
import pytest

from tentlab import corpus
from tentlab.atomic import TentAtom
from tentlab.calculus import HoloSymbol, OperatorL, q_operator
from tentlab.gamma import TentFunction
from tentlab.geometry import Ball, ball_points, graph, torus
from tentlab.halfspace import tent
from tentlab.hardy import (ClassicalAtom, canonical_radius, classical_atom_hardy_bound, default_order,
                           duality_ratio, hardy_atomic_decompose, hardy_norm, hcalc_experiment, l_atom_build,
                           l_atom_verify, lp_compare)
from tentlab.tent import tent_norm


@pytest.fixture(scope="module")
def L64():
    return OperatorL.laplacian(torus(64))


def eigvec(L, k):
    n = L.space.n_points
    return np.cos(2 * np.pi * k * np.arange(n) / n)


def test_default_order():
    assert default_order(torus(64)) == 1
    assert default_order(torus((16, 16))) == 2


def test_hardy_norm_examples(L64):
    assert hardy_norm(L64, 1, np.zeros(64)) == 0
    hg = L64.auto_grid()
    v = eigvec(L64, 2)
    lam = L64.lam[2]
    direct = tent_norm(TentFunction(hg, ((hg.t**2 * lam) * np.exp(-hg.t**2 * lam))[:, None] * v[None]), 1.0).value
    assert hardy_norm(L64, 1, v, 1.0, hg=hg) == pytest.approx(direct, rel=1e-12)


def test_hcalc_identity_exact(L64):
    fs = corpus.function_corpus(L64.space, "smooth-random", 3, seed=0)
    assert hcalc_experiment(L64, HoloSymbol.one(), fs).sup_ratio == 1.0


def test_hcalc_heat_profile(L64):
    # single eigenvector: heat multiplies Q_N f by e^{-t0 lam}, so the ratio is at most one
    fs = [eigvec(L64, k) for k in (1, 3, 7)]
    phi = HoloSymbol.heat(0.002)
    assert hcalc_experiment(L64, phi, fs).sup_ratio <= 1 + 1e-12


def test_l_atom_single_node(L64):
    hg = L64.auto_grid()
    sp = L64.space
    u = TentFunction.zeros(hg)
    ball = Ball(20, 4 * sp.cell)
    tm = tent(hg, ball_points(sp, ball))
    j = int(np.flatnonzero(tm[:, 20])[-1])
    u.values[j, 20, 0] = 1.0
    atom = TentAtom(ball, u, tm, float(sp.measure[ball_points(sp, ball)].sum()))
    la = l_atom_build(L64, atom, 1, 1)
    chk = l_atom_verify(L64, la, hg)
    assert chk["leakage"] < 1e-6
    assert chk["mean_defect"] <= 1e-12
    assert chk["valid"]
    zero = l_atom_build(L64, TentAtom(ball, TentFunction.zeros(hg), tm, 1.0), 1, 1)
    assert not np.any(zero.m)


def test_hardy_decomposition_end_to_end(L64):
    rng = np.random.default_rng(0)
    g = rng.standard_normal(64)
    for f in (corpus.smooth_function(L64.space, 1, 0), g - g.mean()):
        dec = hardy_atomic_decompose(L64, f)
        d = dec.diagnostics
        assert d["residual"] <= 5e-3
        assert d["all_valid"]
        assert d["max_mean_defect"] <= 1e-12
        hg = L64.auto_grid()
        for _, atom in dec.terms:
            assert l_atom_verify(L64, atom, hg)["valid"]
        assert d["sum_lambda"] >= 0.1 * d["h1_norm"]
    assert hardy_atomic_decompose(L64, np.zeros(64)).terms == []
    with pytest.raises(ValueError):
        hardy_atomic_decompose(L64, np.ones(64))


def test_hardy_decomposition_on_graph():
    sp = graph(8, [(i, (i + 1) % 8, 1.0) for i in range(8)] + [(0, 4, 1.5)])
    L = OperatorL.laplacian(sp)
    f = np.random.default_rng(3).standard_normal(8)
    f -= f.mean()
    dec = hardy_atomic_decompose(L, f)
    assert dec.diagnostics["residual"] <= 5e-3
    assert dec.diagnostics["propagation"] == "spectral"


def test_classical_atoms(L64):
    sp = L64.space
    two = ClassicalAtom.two_point(sp, 10, 11, Ball(10, 2.5 * sp.cell))
    assert two.valid
    sup, vals = classical_atom_hardy_bound(L64, [two])
    assert 0 < sup < math.inf
    zero = ClassicalAtom(sp, np.zeros(64), Ball(0, sp.cell))
    assert classical_atom_hardy_bound(L64, [zero])[0] == 0.0
    atoms = [ClassicalAtom.odd_step(sp, 32, (r + 0.5) * sp.cell) for r in (2, 4, 8)]
    assert all(a.valid for a in atoms)
    _, vals = classical_atom_hardy_bound(L64, atoms)
    assert max(vals) / min(vals) <= 2


def test_lp_compare(L64):
    with pytest.raises(ValueError):
        lp_compare(L64, np.zeros(64), 2.0)
    ratios = [lp_compare(L64, eigvec(L64, k), 2.0) for k in (2, 4, 8)]
    assert max(ratios) / min(ratios) < 1.2
    f = corpus.smooth_function(L64.space, 0, 0)
    assert 0 < lp_compare(L64, f, 1.0) < math.inf


def test_duality_ratio(L64):
    f = corpus.smooth_function(L64.space, 0, 0)
    assert 0 < duality_ratio(L64, f, f, 2.0) < 10
    with pytest.raises(ValueError):
        duality_ratio(L64, f, f, 1.0)


def test_canonical_radius(L64):
    h = L64.space.cell
    assert canonical_radius(L64.space, 2.5 * h) == pytest.approx(3 * h)
