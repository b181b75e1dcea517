import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tentlab import corpus
from tentlab.calculus import (HoloSymbol, OperatorL, calderon_constant, calderon_constant_closed, fit_offdiag,
                              functional_calculus, heat, is_mean_zero, kernel_operator, laplacian_matrix,
                              mixed_constant, mixed_symbol_sum, offdiag_measure, phi_family, phi_hat0,
                              phi_leakage, phi_symbol, pi_operator, pi_tilde, q_operator, q_tilde, bump_profile)
from tentlab.gamma import TentFunction
from tentlab.geometry import graph, torus
from tentlab.halfspace import HalfGrid


@pytest.fixture(scope="module")
def L64():
    return OperatorL.laplacian(torus(64))


def two_vertex():
    return OperatorL.laplacian(graph(2, [(0, 1, 1.0)]))


def eigvec(L, k=3):
    sp = L.space
    v = np.cos(2 * np.pi * k * np.arange(sp.n_points) / sp.n_points)
    lam = (2 - 2 * math.cos(2 * math.pi * k / sp.n_points)) / sp.cell**2
    return v, lam


def test_laplacian_matches_stencil(L64):
    A = laplacian_matrix(L64.space)
    f = np.random.default_rng(0).standard_normal(64)
    assert np.allclose(L64.dense() @ f, A @ f, atol=1e-9)
    L2 = two_vertex()
    assert np.allclose(L2.dense(), [[1, -1], [-1, 1]])


def test_heat_examples(L64):
    f = np.random.default_rng(1).standard_normal(64)
    assert np.array_equal(heat(L64, 0.0, f), f)
    L2 = two_vertex()
    for t in (0.1, 1.0, 3.0):
        e = math.exp(-2 * t)
        assert np.allclose(heat(L2, t, [1.0, 0.0]), [(1 + e) / 2, (1 - e) / 2], rtol=1e-14)
    v, lam = eigvec(L64)
    assert np.allclose(heat(L64, 1e-4, v), math.exp(-1e-4 * lam) * v, atol=1e-13)
    with pytest.raises(ValueError):
        heat(L64, -1.0, f)


def test_q_operator_examples(L64):
    with pytest.raises(ValueError):
        q_operator(L64, 1, np.ones(64))
    v, lam = eigvec(L64)
    q = q_operator(L64, 2, v)
    x = q.hg.t**2 * lam
    assert np.allclose(q.values[..., 0], (x**2 * np.exp(-x))[:, None] * v[None], atol=1e-13)
    f = corpus.smooth_function(L64.space, 0, 0)
    w, V = np.linalg.eigh(laplacian_matrix(L64.space))
    hg = q.hg
    dense = np.stack([V @ (((t**2 * w) * np.exp(-t**2 * w)) * (V.T @ f)) for t in hg.t])
    assert np.allclose(q_operator(L64, 1, f, hg).values[..., 0], dense, atol=1e-10)


def test_pi_operator_examples(L64):
    hg = L64.auto_grid()
    assert not pi_operator(L64, 1, TentFunction.zeros(hg)).any()
    v, lam = eigvec(L64)
    u = TentFunction.zeros(hg)
    j0 = hg.levels // 2
    u.values[j0, :, 0] = v
    x = hg.t[j0] ** 2 * lam
    assert np.allclose(pi_operator(L64, 1, u)[:, 0], math.log(hg.rho) * x * math.exp(-x) * v, atol=1e-14)


def test_calderon_constants():
    assert calderon_constant(1) == pytest.approx(8.0, rel=1e-13)
    assert calderon_constant(2) == pytest.approx(32 / 6, rel=1e-13)
    for N in range(1, 7):
        assert calderon_constant(N) == pytest.approx(calderon_constant_closed(N), rel=1e-12)


@pytest.mark.parametrize("sides", [(64,), (16, 16)])
@pytest.mark.parametrize("N", [1, 2])
def test_calderon_reproduces(sides, N):
    sp = torus(sides)
    L = OperatorL.laplacian(sp)
    hg = L.auto_grid()
    for f in corpus.function_corpus(sp, "smooth-random", 3, seed=2):
        g = calderon_constant(N) * pi_operator(L, N, q_operator(L, N, f, hg))[:, 0]
        assert np.linalg.norm(g - f) <= 1e-3 * np.linalg.norm(f)


def test_functional_calculus_examples(L64):
    f = corpus.smooth_function(L64.space, 1, 0)
    assert np.allclose(functional_calculus(L64, HoloSymbol.heat(0.01), f), heat(L64, 0.01, f), atol=1e-14)
    g = functional_calculus(L64, HoloSymbol.imaginary_power(1.5), f)
    assert np.linalg.norm(g) == pytest.approx(np.linalg.norm(f), rel=1e-12)
    w, V = np.linalg.eigh(laplacian_matrix(L64.space))
    pos = w > 1e-9
    sym = np.where(pos, np.exp(-0.05 * np.sqrt(np.abs(w))), 0.0)
    expect = V @ (sym * (V.T @ f))
    assert np.allclose(functional_calculus(L64, HoloSymbol.poisson(0.05), f), expect, atol=1e-10)
    assert np.array_equal(functional_calculus(L64, HoloSymbol.one(), f), f)


def test_phi_hat0_matches_quadrature():
    from scipy import integrate
    for xi in (0.0, 0.7, 3.0, 10.0):
        ref, _ = integrate.quad(lambda s: bump_profile(s) * math.cos(xi * s), -1, 1, epsabs=1e-15)
        assert float(phi_hat0(xi)) == pytest.approx(ref, abs=1e-13)


def test_phi_family_examples(L64):
    v, lam = eigvec(L64)
    g = phi_family(L64, 0.05, v, "spectral")
    assert np.allclose(g, float(phi_hat0(0.05 * math.sqrt(lam))) * v, atol=1e-13)
    sym = phi_symbol(L64, 1e-6, "spectral")
    assert np.allclose(sym[np.abs(L64.lam) < 10], float(phi_hat0(0.0)), rtol=1e-6)
    h = L64.space.cell
    assert phi_leakage(L64, 4 * h, 0, "lattice") < 1e-6
    assert phi_leakage(L64, 4 * h) < 1e-6
    lat = phi_symbol(L64, 4 * h, "lattice")
    assert lat[0] == pytest.approx(float(phi_hat0(0.0)), rel=1e-13)


def test_mixed_identity(L64):
    hg = L64.auto_grid()
    for N, N2 in [(1, 1), (1, 2)]:
        c = mixed_constant(N + N2)
        f = corpus.smooth_function(L64.space, 3, 0)
        g = c * pi_tilde(L64, N2, q_operator(L64, N, f, hg), "spectral")[:, 0]
        assert np.linalg.norm(g - f) <= 1e-3 * np.linalg.norm(f)
        s = mixed_symbol_sum(L64, hg, N, N2, "spectral")
        assert np.allclose(c * s[~L64.kernel_mask], 1.0, atol=1e-3)


def test_q_tilde_eigen(L64):
    hg = L64.auto_grid()
    v, lam = eigvec(L64)
    q = q_tilde(L64, 1, v, hg, "spectral")
    x = hg.t**2 * lam
    sym = x * phi_hat0(hg.t * math.sqrt(lam))
    assert np.allclose(q.values[..., 0], sym[:, None] * v[None], atol=1e-12)
    with pytest.raises(ValueError):
        q_tilde(L64, 1, np.ones(64))


def test_offdiag_examples(L64):
    L2 = two_vertex()
    for t in (0.3, 1.0, 2.0):
        val = offdiag_measure(L2, "heat_power", [True, False], [False, True], math.sqrt(t))
        assert val == pytest.approx((1 - math.exp(-2 * t)) / 2, abs=1e-12)
    E = np.zeros(64, bool)
    E[:8] = True
    assert offdiag_measure(L64, "heat_power", E, E, 0.1) <= 1 + 1e-12
    h = L64.space.cell
    d, ts, n = [], [], []
    for t in (h, 2 * h):
        for gap in range(2, 24, 2):
            E2 = np.roll(E, 8 + gap - 1)
            d.append(gap * h)
            ts.append(t)
            n.append(offdiag_measure(L64, "heat_power", E, E2, t, 2))
    assert fit_offdiag(d, ts, n, "polynomial").exponent >= 1.5


def test_kernel_examples(L64):
    hg = L64.auto_grid()
    u = corpus.smooth_tent(hg, 0, 0)
    assert np.allclose(kernel_operator(L64, u, "delta").S.values, u.values, rtol=1e-15)
    f = corpus.smooth_function(L64.space, 0, 1)
    q = q_operator(L64, 1, f, hg)
    once = kernel_operator(L64, q, "qpi").S
    twice = kernel_operator(L64, once, "qpi").S
    assert np.linalg.norm(twice.values - once.values) <= 1e-3 * np.linalg.norm(once.values)
    res = kernel_operator(L64, u, "phi", split=True)
    assert res.split_defect() <= 1e-12 * np.abs(res.S.values).max()


def test_from_matrix_checks():
    sp = graph(3, [(0, 1, 1.0), (1, 2, 1.0)])
    with pytest.raises(ValueError):
        OperatorL.from_matrix(sp, np.array([[1.0, 2.0, 0], [0, 1, 0], [0, 0, 1]]))
    L = OperatorL.from_matrix(sp, laplacian_matrix(sp))
    assert np.allclose(L.dense(), laplacian_matrix(sp))


def test_mean_zero_gate():
    sp = torus(16)
    assert is_mean_zero(sp, corpus.smooth_function(sp, 0, 0))
    assert not is_mean_zero(sp, np.ones(16))
