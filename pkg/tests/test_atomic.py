import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tentlab import corpus
from tentlab.atomic import (atomic_decompose, interpolation_function, interpolation_theta, level_structure,
                            verify_atom)
from tentlab.gamma import TentFunction
from tentlab.geometry import torus
from tentlab.halfspace import HalfGrid
from tentlab.tent import tent_norm


@pytest.fixture(scope="module")
def hg():
    return HalfGrid.geometric(torus(64))


def test_zero_function(hg):
    dec = atomic_decompose(TentFunction.zeros(hg))
    assert dec.terms == [] and dec.diagnostics["sum_lambda"] == 0


def test_single_atom_input(hg):
    a = corpus.atom_tent(hg, 0, 0)
    dec = atomic_decompose(a)
    assert np.array_equal(dec.reconstruct(a).values, a.values)
    assert all(verify_atom(at).passed for _, at in dec.terms)
    assert dec.diagnostics["sum_lambda"] <= 32


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_random_decomposition(index):
    hg = HalfGrid.geometric(torus(64))
    u = corpus.smooth_tent(hg, 7, index)
    dec = atomic_decompose(u)
    d = dec.diagnostics
    assert d["residual"] == 0.0
    assert np.array_equal(dec.reconstruct(u).values, u.values)
    assert d["sum_lambda"] >= d["t1_norm"] - 1e-9
    assert all(verify_atom(a).passed for _, a in dec.terms)


def test_scaled_atom_fails(hg):
    u = corpus.smooth_tent(hg, 1, 1)
    _, atom = atomic_decompose(u).terms[0]
    atom.a = atom.a * 2.0
    rep = verify_atom(atom)
    assert rep.support_ok and not rep.t2_ok and not rep.passed


def test_coefficients_are_powers_of_two(hg):
    dec = atomic_decompose(corpus.smooth_tent(hg, 2, 0))
    mant = [np.frexp(lam)[0] for lam, _ in dec.terms]
    assert all(m == 0.5 for m in mant)


def test_interpolation_exact_at_theta(hg):
    u = corpus.smooth_tent(hg, 4, 0)
    for p, r in [(1.5, 2.0), (1.2, 1.8), (1.0, 2.0)]:
        th = interpolation_theta(p, r)
        assert np.array_equal(interpolation_function(u, p, r, th).values, u.values)


def test_interpolation_single_level(hg):
    u = corpus.smooth_tent(hg, 4, 1)
    ls = level_structure(u)
    k0 = max(k for k in ls.ks if (ls.A[k] & u.support).any())
    v = u.restrict(ls.A[k0])
    lsv = level_structure(v)
    p, r, zeta = 1.5, 2.0, 0.3 + 0.7j
    up = 1 - zeta * (1 - 1 / r)
    got = interpolation_function(v, p, r, zeta, levels=lsv).values
    ks = [k for k in lsv.ks if (lsv.A[k] & v.support).any()]
    assert len(ks) == 1
    expect = 2.0 ** (ks[0] * (up * p - 1)) * v.values
    assert np.allclose(got, expect, rtol=1e-12, atol=0)


def test_interpolation_boundary_bounds(hg):
    p, r = 1.5, 2.0
    for u in corpus.tent_corpus(hg, "smooth-random", 3, seed=5):
        base = tent_norm(u, p).value ** p
        for s in (-1.0, 0.0, 2.0):
            left = tent_norm(interpolation_function(u, p, r, 1j * s), 1.0).value
            right = tent_norm(interpolation_function(u, p, r, 1 + 1j * s), r).value ** r
            assert left <= 4 * base and right <= 4 * base


def test_interpolation_rejects_outside_strip(hg):
    u = corpus.smooth_tent(hg, 4, 0)
    with pytest.raises(ValueError):
        interpolation_function(u, 1.5, 2.0, 1.5)
