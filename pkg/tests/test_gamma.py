import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tentlab.gamma import (BanachSpace, TentFunction, gamma_norm, moment_ratio, restriction_monotonicity_check,
                           type_constant_probe)
from tentlab.geometry import torus
from tentlab.halfspace import HalfGrid


@pytest.fixture(scope="module")
def hg():
    return HalfGrid.geometric(torus(16))


def test_single_node_exact(hg):
    u = TentFunction.zeros(hg)
    j, y = 2, 5
    u.values[j, y, 0] = 2.0
    region = hg.empty()
    region[j, y] = True
    w = hg.gamma_weight[j, y]
    assert gamma_norm(u, region).value == pytest.approx(math.sqrt(w * 4.0), rel=1e-15)
    # rescaled so that the node weight is 0.25
    v = u * (0.5 / math.sqrt(w) / 2.0) * 2.0
    assert gamma_norm(v, region).value == pytest.approx(1.0, rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31))
def test_tensor_identity(m, seed):
    rng = np.random.default_rng(seed)
    hg = HalfGrid.geometric(torus(8))
    u = rng.standard_normal(hg.shape)
    xi = rng.standard_normal(m)
    X = BanachSpace(m, 2.0, tuple(rng.uniform(0.5, 2.0, m)))
    region = rng.random(hg.shape) < 0.5
    lhs = gamma_norm(TentFunction(hg, u[..., None] * xi), region, X).value
    rhs = math.sqrt(float((hg.gamma_weight * u**2)[region].sum())) * float(X.norm(xi))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_mc_agrees_with_exact(hg):
    rng = np.random.default_rng(11)
    u = TentFunction(hg, rng.standard_normal(hg.shape + (4,)))
    region = rng.random(hg.shape) < 0.5
    exact = gamma_norm(u, region, BanachSpace(4)).value
    mc = gamma_norm(u, region, BanachSpace(4), seed=3, samples=4096, method="mc")
    assert abs(mc.value - exact) <= 3 * mc.stderr
    assert mc.stderr / mc.value <= 0.01


def test_mc_is_deterministic(hg):
    rng = np.random.default_rng(1)
    u = TentFunction(hg, rng.standard_normal(hg.shape + (3,)))
    X = BanachSpace(3, 4.0)
    a = gamma_norm(u, None, X, seed=9, samples=512)
    b = gamma_norm(u, None, X, seed=9, samples=512)
    assert a.value == b.value and a.stderr == b.stderr


def test_exact_path_needs_hilbert(hg):
    with pytest.raises(ValueError):
        gamma_norm(TentFunction.zeros(hg, 2), None, BanachSpace(2, 3.0), method="exact")


def test_moment_ratio(hg):
    u = TentFunction.zeros(hg)
    u.values[3, 2, 0] = 1.0
    assert moment_ratio(u, None, BanachSpace(1), 2, 2) == 1.0
    r = moment_ratio(u, None, BanachSpace(1), 1, 2, seed=0, samples=16384)
    assert r == pytest.approx(math.sqrt(2 / math.pi), abs=0.01)
    rng = np.random.default_rng(0)
    v = TentFunction(hg, rng.standard_normal(hg.shape + (4,)))
    r1 = moment_ratio(v, None, BanachSpace(4, math.inf), 4, 2, seed=1)
    r2 = moment_ratio(v, None, BanachSpace(4, math.inf), 4, 2, seed=2)
    assert 1 < r1 < 3 and 1 < r2 < 3
    assert abs(r1 - r2) < 0.05


def test_restriction_monotonicity(hg):
    rng = np.random.default_rng(5)
    X = BanachSpace(3, 4.0)
    u = TentFunction(hg, rng.standard_normal(hg.shape + (3,)))
    R = rng.random(hg.shape) < 0.5
    ok, margin = restriction_monotonicity_check(u, R, R, X, samples=256)
    assert ok and margin >= 0
    ok, _ = restriction_monotonicity_check(u, hg.empty(), R, X, samples=256)
    assert ok
    fails = 0
    for i in range(100):
        R2 = rng.random(hg.shape) < rng.uniform(0.3, 0.9)
        R1 = R2 & (rng.random(hg.shape) < 0.5)
        fails += not restriction_monotonicity_check(u, R1, R2, X, seed=i, samples=256)[0]
    assert fails == 0
    with pytest.raises(ValueError):
        restriction_monotonicity_check(u, hg.full(), hg.empty(), X)


def test_type_probe():
    scalar = type_constant_probe(BanachSpace(1), 2.0, seed=0)
    assert scalar.constant <= 1 + 1e-12
    hil = type_constant_probe(BanachSpace(4), 2.0, seed=0)
    assert hil.constant <= 1 + 1e-12
    single = type_constant_probe(BanachSpace(4, 4.0), 1.5, trials=8, max_terms=1, seed=1)
    assert single.constant <= 1 + 3 * single.stderr
    with pytest.raises(ValueError):
        type_constant_probe(BanachSpace(1), 2.5)
