import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tentlab.geometry import maximal_extension, torus
from tentlab.halfspace import (HalfGrid, cone, cone_cover_search, region_pairs, tent, tent_via_cones,
                               truncated_cone, verify_cover)


def unit_grid(n=8, levels=(1.0, 2.0, 4.0)):
    sp = torus(n, cell=1.0)
    return HalfGrid(sp, levels[0], levels[1] / levels[0], len(levels))


def test_ladder_and_weights():
    hg = HalfGrid.geometric(torus(16), rho=2.0)
    assert np.allclose(hg.t, hg.t_min * 2.0 ** np.arange(hg.levels))
    assert hg.t[-1] >= 4 * hg.space.diameter
    assert np.allclose(hg.gamma_weight * hg.volumes, hg.pair_weight)
    assert np.allclose(hg.pair_weight, hg.space.measure * np.log(2.0))


def test_cone_examples():
    hg = unit_grid()
    assert cone(hg, 3)[:, 3].all()
    c = cone(hg, 0)
    assert c[:, 1].tolist() == [False, True, True]
    assert cone(hg, 0, alpha=hg.space.diameter / hg.t_min + 1).all()
    with pytest.raises(ValueError):
        cone(hg, 0, alpha=0.5)


def test_truncated_cone_examples():
    hg = unit_grid()
    assert not truncated_cone(hg, 0, 1.0).any()
    assert np.array_equal(truncated_cone(hg, 0, 5.0), cone(hg, 0))
    tc = truncated_cone(hg, 0, 2.0)
    assert region_pairs(tc) == [[0, 0]]


def test_tent_examples():
    hg = unit_grid()
    assert tent(hg, np.ones(8, bool)).all()
    assert not tent(hg, np.zeros(8, bool)).any()
    E = np.zeros(8, bool)
    E[[7, 0, 1]] = True
    assert tent(hg, E)[:, 0].tolist() == [True, True, False]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.booleans(), min_size=10, max_size=10))
def test_tent_is_complement_of_outer_cones(bits):
    hg = HalfGrid.geometric(torus(10), rho=2 ** 0.5)
    E = np.array(bits)
    assert np.array_equal(tent(hg, E), tent_via_cones(hg, E))


def test_cover_trivial_cases():
    hg = HalfGrid.geometric(torus(16))
    E = np.ones(16, bool)
    E[0] = False
    cert = cone_cover_search(hg, E, 0.5, 8)
    assert cert.success and cert.size == 0


def test_cover_interval_two_points():
    sp = torus(32)
    hg = HalfGrid.geometric(sp)
    E = np.zeros(32, bool)
    E[10:18] = True
    for method in ("greedy", "exact"):
        cert = cone_cover_search(hg, E, 0.5, 13, method=method)
        assert cert.success and cert.size == 2
        assert verify_cover(hg, E, 0.5, 13, cert.points)
    # greedy prefers the points just outside the interval
    assert set(cone_cover_search(hg, E, 0.5, 13).points) == {9, 18}


def test_cover_exact_never_larger_than_greedy():
    rng = np.random.default_rng(4)
    sp = torus((16, 16))
    hg = HalfGrid.geometric(sp)
    for _ in range(5):
        E = rng.random(256) < 0.3
        x = int(np.flatnonzero(E)[0])
        g = cone_cover_search(hg, E, 0.5, x)
        e = cone_cover_search(hg, E, 0.5, x, method="exact")
        assert g.success and e.success
        assert verify_cover(hg, E, 0.5, x, e.points)
        assert e.size <= g.size


def test_verify_cover_rejects_points_in_E():
    sp = torus(16)
    hg = HalfGrid.geometric(sp)
    E = np.zeros(16, bool)
    E[4:8] = True
    assert not verify_cover(hg, E, 0.5, 5, [5])
    ext = maximal_extension(sp, E, 0.5)
    assert verify_cover(hg, E, 0.5, 5, [3, 8], E_ext=ext)
