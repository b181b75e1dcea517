"""Random test corpora.

Generators draw their parameters from ``default_rng([seed, index])`` before
looking at the grid, so the same ``(seed, index)`` describes the same continuum
object at every resolution.  That is what refinement studies compare.
"""

from __future__ import annotations

import numpy as np

from .gamma import TentFunction
from .geometry import SpaceGrid, ball_points, Ball
from .halfspace import HalfGrid, tent

__all__ = [
    "continuum_coords",
    "periodic_distance",
    "smooth_function",
    "point_mass_function",
    "smooth_tent",
    "point_mass_tent",
    "atom_tent",
    "tent_corpus",
    "function_corpus",
    "GENERATORS",
]

GENERATORS = ("smooth-random", "point-mass", "atom")


def _rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def continuum_coords(space: SpaceGrid) -> np.ndarray:
    """Point positions ``coords * h`` in the continuum torus."""
    if not space.is_torus:
        raise ValueError("continuum coordinates need a torus")
    return space.coords * space.cell


def periodic_distance(space: SpaceGrid, x0) -> np.ndarray:
    """Wrap-around l^inf distance from a continuum point to every grid point."""
    xs = continuum_coords(space)
    period = np.asarray(space.sides) * space.cell
    diff = np.abs(xs - np.asarray(x0)[None, :]) % period
    return np.minimum(diff, period - diff).max(axis=1)


def smooth_function(space: SpaceGrid, seed: int = 0, index: int = 0, kmax: int = 4, m: int = 1) -> np.ndarray:
    """Mean-zero low-frequency trigonometric polynomial, shape ``(P,)`` or ``(P, m)``."""
    rng = _rng(seed, index)
    d = space.dim
    freqs = [k for k in np.ndindex(*(2 * kmax + 1,) * d) if any(c != kmax for c in k)]
    freqs = np.array(freqs) - kmax
    decay = 1.0 / (1.0 + (freqs**2).sum(axis=1))
    a = rng.standard_normal((len(freqs), m)) * decay[:, None]
    b = rng.standard_normal((len(freqs), m)) * decay[:, None]
    period = np.asarray(space.sides) * space.cell
    phase = 2 * np.pi * continuum_coords(space) / period @ freqs.T  # (P, F)
    f = np.cos(phase) @ a + np.sin(phase) @ b
    f -= (space.measure @ f) / space.total_measure
    return f[:, 0] if m == 1 else f


def point_mass_function(space: SpaceGrid, seed: int = 0, index: int = 0) -> np.ndarray:
    """delta_x / mu(x) - delta_y / mu(y) at two continuum-chosen points.

    The points are at least 1/8 apart along the first axis, so they stay
    distinct on every grid with 16 or more cells per axis.
    """
    rng = _rng(seed, index)
    x0 = rng.uniform(0, 1, space.dim)
    shift = rng.uniform(0, 1, space.dim)
    shift[0] = rng.uniform(1 / 8, 7 / 8)
    xs = [x0, (x0 + shift) % 1.0]
    f = np.zeros(space.n_points)
    for sign, x in zip((1.0, -1.0), xs):
        p = int(np.argmin(periodic_distance(space, x)))
        f[p] += sign / space.measure[p]
    if not f.any():
        raise ValueError("both point masses fell on the same grid point")
    return f


def smooth_tent(hg: HalfGrid, seed: int = 0, index: int = 0, bumps: int = 3, m: int = 1,
                t_range=(1 / 16, 1 / 4), width_range=(0.03, 0.1), scale_range=(0.3, 0.6),
                cutoff: float = 2.5) -> TentFunction:
    """Sum of truncated Gaussian bumps in ``(y, log t)``.

    Each bump is cut at ``cutoff`` widths in space and in log-scale, so the
    support is finite and follows the continuum shape under refinement.
    """
    rng = _rng(seed, index)
    sp = hg.space
    logt = np.log(hg.t)
    vals = np.zeros(hg.shape + (m,))
    for _ in range(bumps):
        x0 = rng.uniform(0, 1, sp.dim)
        t0 = np.exp(rng.uniform(*np.log(t_range)))
        w = rng.uniform(*width_range)
        s = rng.uniform(*scale_range)
        amp = rng.standard_normal(m)
        dy = periodic_distance(sp, x0) / w
        dt = (logt - np.log(t0)) / s
        shape = np.exp(-0.5 * dt[:, None] ** 2 - 0.5 * dy[None, :] ** 2)
        shape *= (np.abs(dt)[:, None] <= cutoff) & (dy[None, :] <= cutoff)
        vals += shape[..., None] * amp
    return TentFunction(hg, vals)


def point_mass_tent(hg: HalfGrid, seed: int = 0, index: int = 0, m: int = 1,
                    t_range=(1 / 16, 1 / 4)) -> TentFunction:
    """A single node carrying a random vector."""
    rng = _rng(seed, index)
    sp = hg.space
    x0 = rng.uniform(0, 1, sp.dim)
    t0 = np.exp(rng.uniform(*np.log(t_range)))
    amp = rng.standard_normal(m)
    u = TentFunction.zeros(hg, m)
    u.values[int(np.argmin(np.abs(np.log(hg.t / t0)))), int(np.argmin(periodic_distance(sp, x0)))] = amp
    return u


def atom_tent(hg: HalfGrid, seed: int = 0, index: int = 0, m: int = 1,
              radius_range=(1 / 16, 1 / 4)) -> TentFunction:
    """Random values on the tent of a ball, scaled to ||a||_{T^2} = mu(B)^{-1/2}."""
    from .tent import tent_norm

    rng = _rng(seed, index)
    sp = hg.space
    x0 = rng.uniform(0, 1, sp.dim)
    r = rng.uniform(*radius_range)
    center = int(np.argmin(periodic_distance(sp, x0)))
    pts = ball_points(sp, Ball(center, r))
    region = tent(hg, pts)
    vals = rng.standard_normal(hg.shape + (m,)) * region[..., None]
    u = TentFunction(hg, vals)
    size = tent_norm(u, 2.0).value
    if size == 0:
        raise ValueError("ball too small for the grid")
    return u * (float(sp.measure[pts].sum()) ** -0.5 / size)


def tent_corpus(hg: HalfGrid, generator: str = "smooth-random", count: int = 10, seed: int = 0,
                m: int = 1, **kwargs) -> list:
    makers = {"smooth-random": smooth_tent, "point-mass": point_mass_tent, "atom": atom_tent}
    if generator not in makers:
        raise ValueError(f"unknown generator {generator!r}")
    return [makers[generator](hg, seed, i, m=m, **kwargs) for i in range(count)]


def function_corpus(space: SpaceGrid, generator: str = "smooth-random", count: int = 10,
                    seed: int = 0) -> list:
    """Mean-zero functions on the space."""
    if generator == "smooth-random":
        return [smooth_function(space, seed, i) for i in range(count)]
    if generator == "point-mass":
        return [point_mass_function(space, seed, i) for i in range(count)]
    if generator == "atom":
        from .hardy import ClassicalAtom

        out = []
        for i in range(count):
            rng = _rng(seed, i)
            x0 = rng.uniform(0, 1, space.dim)
            r = rng.uniform(1 / 16, 1 / 4)
            c = int(np.argmin(periodic_distance(space, x0)))
            out.append(ClassicalAtom.odd_step(space, c, r).m)
        return out
    raise ValueError(f"unknown generator {generator!r}")
