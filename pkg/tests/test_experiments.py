"""Reduced-size runs of every experiment; the full-size runs live in the acceptance suite."""

import pytest

from tentlab.experiments import EXPERIMENTS, Gate, run_experiment

SMALL = {
    "aperture": {"corpus": {"count": 2}},
    "atomic": {"corpus": {"count": 3}, "grids": [32, 64]},
    "duality": {"corpus": {"count": 2}, "grids": [32, 64]},
    "interpolation": {"corpus": {"count": 2}, "grids": [32, 64]},
    "cover": {"params": {"sets": 4, "pairs": 4, "dims": [1]}, "grids": [32, 64]},
    "calderon": {"corpus": {"count": 4}},
    "offdiag": {},
    "hcalc": {"corpus": {"count": 2}, "grids": [32, 64]},
    "kernel": {"corpus": {"count": 2}, "grids": [32, 64]},
    "hardy-atoms": {"corpus": {"count": 2}},
    "classical-atoms": {"grids": [32, 64]},
    "lp-compare": {"corpus": {"count": 2}, "grids": [32, 64]},
    "gamma-selftest": {"params": {"triples": 10, "cases": 5}},
}


def test_registry_complete():
    assert set(SMALL) == set(EXPERIMENTS)


@pytest.mark.parametrize("name", sorted(SMALL))
def test_small_run(name):
    res = run_experiment({"experiment": name, **SMALL[name]})
    assert res.gates and res.rows
    assert res.passed, [g.to_json() for g in res.gates if not g.passed]


def test_unknown_experiment():
    with pytest.raises(KeyError):
        run_experiment({"experiment": "nope"})


def test_gate_ops():
    assert Gate("a", 1.0, 1.0, "<=").passed
    assert not Gate("a", 1.0, 1.0, "<").passed
    assert Gate("a", 0.0, 0.0, "==").passed
    assert not Gate("a", 0.5, 1.0, ">=").passed


def test_greedy_cover_option():
    res = run_experiment({"experiment": "cover", "params": {"sets": 2, "pairs": 0, "dims": [1], "method": "greedy"},
                          "grids": [32]})
    assert res.summary["method"] == "greedy"
