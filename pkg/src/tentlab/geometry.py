"""Finite doubling metric measure spaces.

Two kinds of spaces are supported:

* ``torus``: a d-dimensional periodic lattice with cell size ``h`` and the
  wrap-around l^inf metric, so balls are cubes and V(x, r) does not depend on x.
* ``graph``: a finite weighted graph with shortest-path metric and arbitrary
  positive vertex measures.

Points are always addressed by a flat integer index ``0..P-1``.  Sets of points
are boolean masks of length ``P``.  All balls are open: ``B(x, r) = {y : d(x, y) < r}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

__all__ = [
    "SpaceGrid",
    "Ball",
    "torus",
    "graph",
    "ball_points",
    "volume",
    "doubling_exponent_estimate",
    "maximal_extension",
    "whitney_decomposition",
    "dyadic_cubes",
    "WhitneyCover",
]

DENSE_LIMIT = 4096


def _half_width(r: float, h: float) -> int:
    """Largest k >= -1 with k*h < r (computed exactly as the metric does)."""
    k = int(math.floor(r / h))
    while k >= 0 and k * h >= r:
        k -= 1
    while (k + 1) * h < r:
        k += 1
    return k


def _window_sum(a: np.ndarray, width: int, axis: int) -> np.ndarray:
    """Forward periodic window sums ``S[i] = sum_{j<width} a[i+j]`` by binary doubling.

    Only terms inside each window are ever added, so small outputs keep full
    relative precision even when the array holds much larger values elsewhere.
    """
    out = None
    offset = 0
    block = a
    size = 1
    w = width
    while w:
        if w & 1:
            shifted = np.roll(block, -offset, axis=axis)
            out = shifted if out is None else out + shifted
            offset += size
        w >>= 1
        if w:
            block = block + np.roll(block, -size, axis=axis)
            size *= 2
    return out


def _box_sum_axis(a: np.ndarray, k: int, axis: int) -> np.ndarray:
    n = a.shape[axis]
    if k < 0:
        return np.zeros_like(a)
    if 2 * k + 1 >= n:
        return np.broadcast_to(a.sum(axis=axis, keepdims=True), a.shape).copy()
    if k == 0:
        return a.copy()
    return np.roll(_window_sum(a, 2 * k + 1, axis), k, axis=axis)


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    def dilate(self, factor: float) -> "Ball":
        return Ball(self.center, self.radius * factor)

    def to_json(self) -> dict:
        return {"center": int(self.center), "radius": float(self.radius)}


@dataclass(eq=False)
class SpaceGrid:
    """A finite metric measure space.

    Use :func:`torus` or :func:`graph` to construct instances.
    """

    kind: str
    measure: np.ndarray
    sides: tuple = ()
    cell: float = 1.0
    edges: list = field(default_factory=list)
    _dist: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.measure = np.asarray(self.measure, dtype=float)
        self.measure.setflags(write=False)
        if np.any(self.measure <= 0):
            raise ValueError("measures must be strictly positive")

    # ------------------------------------------------------------------ basics
    @property
    def n_points(self) -> int:
        return self.measure.size

    @property
    def dim(self) -> int:
        return len(self.sides)

    @property
    def is_torus(self) -> bool:
        return self.kind == "torus"

    @property
    def total_measure(self) -> float:
        return float(self.measure.sum())

    @cached_property
    def coords(self) -> np.ndarray:
        if not self.is_torus:
            raise TypeError("coordinates exist only on tori")
        return np.stack(np.unravel_index(np.arange(self.n_points), self.sides), axis=1)

    def point(self, *index) -> int:
        """Flat index of a torus lattice point (coordinates taken modulo the sides)."""
        idx = tuple(int(i) % s for i, s in zip(index, self.sides))
        return int(np.ravel_multi_index(idx, self.sides))

    def distances_from(self, x: int) -> np.ndarray:
        if self.is_torus:
            diff = np.abs(self.coords - self.coords[x])
            sides = np.asarray(self.sides)
            steps = np.minimum(diff, sides - diff).max(axis=1)
            return steps * self.cell
        return self.distance_matrix()[x]

    def distance_matrix(self) -> np.ndarray:
        if self._dist is None:
            if self.n_points > DENSE_LIMIT:
                raise MemoryError(f"dense distance matrix refused for {self.n_points} points")
            if self.is_torus:
                c = self.coords
                diff = np.abs(c[:, None, :] - c[None, :, :])
                sides = np.asarray(self.sides)
                self._dist = np.minimum(diff, sides - diff).max(axis=2) * self.cell
            else:
                self._dist = _graph_distances(self.n_points, self.edges)
            self._dist.setflags(write=False)
        return self._dist

    @cached_property
    def diameter(self) -> float:
        if self.is_torus:
            return max(s // 2 for s in self.sides) * self.cell
        return float(self.distance_matrix().max())

    @cached_property
    def min_spacing(self) -> float:
        if self.is_torus:
            return self.cell
        d = self.distance_matrix()
        pos = d[d > 0]
        return float(pos.min()) if pos.size else 1.0

    @cached_property
    def distinct_distances(self) -> np.ndarray:
        if self.is_torus:
            return np.arange(max(s // 2 for s in self.sides) + 1) * self.cell
        return np.unique(self.distance_matrix())

    def radius_ladder(self) -> np.ndarray:
        """One radius per distinct open ball: the midpoints between realized
        distances, plus one radius beyond the diameter."""
        d = self.distinct_distances
        mids = 0.5 * (d[:-1] + d[1:])
        return np.append(mids, d[-1] + self.min_spacing)

    def sup_radius_ladder(self) -> np.ndarray:
        """Right endpoints of the radius intervals giving the same open ball.

        A ball ``B(c, r)`` with ``d_k < r <= d_{k+1}`` equals ``{d <= d_k}``;
        the last entry is ``inf`` (the whole space, every scale).
        """
        d = self.distinct_distances
        return np.append(d[1:], np.inf)

    # --------------------------------------------------------------- ball sums
    def ball_sum(self, values: np.ndarray, r: float) -> np.ndarray:
        """``out[x] = sum_{y in B(x, r)} values[y]`` (points on axis 0)."""
        values = np.asarray(values)
        if self.is_torus:
            k = _half_width(r, self.cell)
            rest = values.shape[1:]
            a = values.reshape(tuple(self.sides) + rest)
            for ax in range(self.dim):
                a = _box_sum_axis(a, k, ax)
            return a.reshape(values.shape)
        ind = (self.distance_matrix() < r).astype(float)
        flat = values.reshape(self.n_points, -1)
        return (ind @ flat).reshape(values.shape)

    def ball_mask(self, x: int, r: float) -> np.ndarray:
        return self.distances_from(x) < r

    def dist_to_set(self, mask: np.ndarray) -> np.ndarray:
        """Distance from every point to the set ``mask`` (``inf`` if empty)."""
        mask = np.asarray(mask, bool)
        if not mask.any():
            return np.full(self.n_points, np.inf)
        if self.is_torus:
            out = np.full(self.n_points, np.inf)
            ind = mask.astype(float)
            for k in range(max(s // 2 for s in self.sides) + 1):
                hit = self.ball_sum(ind, (k + 0.5) * self.cell) > 0
                new = hit & np.isinf(out)
                out[new] = k * self.cell
                if not np.isinf(out).any():
                    break
            return out
        return self.distance_matrix()[:, mask].min(axis=1)

    # ------------------------------------------------------------ exponents
    @cached_property
    def n(self) -> float:
        """Measured doubling exponent over the default radius ladder."""
        return doubling_exponent_estimate(self, self.default_doubling_ladder())

    @cached_property
    def n0(self) -> float:
        if self.is_torus:
            return 0.0
        d = self.distance_matrix()
        best = 0.0
        for r in self.radius_ladder():
            vol = (d < r).astype(float) @ self.measure
            ratio = np.log(vol[:, None] / vol[None, :])
            growth = np.log1p(d / r)
            ok = growth > 0
            if ok.any():
                best = max(best, float((ratio[ok] / growth[ok]).max()))
        return best

    def default_doubling_ladder(self) -> np.ndarray:
        if self.is_torus:
            limit = min(self.sides) * self.cell / 4
            radii = 1.5 * self.cell * 2.0 ** np.arange(32)
            radii = radii[2 * radii <= limit]
            return radii if radii.size >= 2 else np.array([1.5 * self.cell, 3 * self.cell])
        return self.radius_ladder()

    # ---------------------------------------------------------------- JSON
    def to_json(self) -> dict:
        if self.is_torus:
            return {
                "kind": "torus",
                "dims": self.dim,
                "sides": list(self.sides),
                "cell": self.cell,
                "n": self.n,
                "n0": self.n0,
            }
        return {
            "kind": "graph",
            "vertices": self.n_points,
            "edges": [{"u": int(u), "v": int(v), "len": float(w)} for u, v, w in self.edges],
            "measures": self.measure.tolist(),
        }

    @classmethod
    def from_json(cls, config: dict | str) -> "SpaceGrid":
        if isinstance(config, str):
            config = json.loads(config)
        if config["kind"] == "torus":
            return torus(config["sides"], cell=config.get("cell"))
        if config["kind"] == "graph":
            edges = [(e["u"], e["v"], e.get("len", 1.0)) for e in config["edges"]]
            return graph(config["vertices"], edges, config.get("measures"))
        raise ValueError(f"unknown space kind {config['kind']!r}")


def _graph_distances(n: int, edges) -> np.ndarray:
    if n == 1:
        return np.zeros((1, 1))
    rows, cols, lens = [], [], []
    for u, v, w in edges:
        if w <= 0:
            raise ValueError("edge lengths must be positive")
        rows += [u, v]
        cols += [v, u]
        lens += [w, w]
    adj = csr_matrix((lens, (rows, cols)), shape=(n, n))
    d = shortest_path(adj, directed=False)
    if np.isinf(d).any():
        raise ValueError("graph must be connected")
    return d


def torus(sides, cell: float | None = None) -> SpaceGrid:
    """Periodic lattice with ``sides`` cells per axis.

    ``cell`` defaults to ``1/sides[0]`` so that the first axis has unit length.
    """
    sides = tuple(int(s) for s in np.atleast_1d(sides))
    if cell is None:
        cell = 1.0 / sides[0]
    npts = int(np.prod(sides))
    return SpaceGrid("torus", np.full(npts, float(cell) ** len(sides)), sides=sides, cell=float(cell))


def graph(n_vertices: int, edges, measures=None) -> SpaceGrid:
    """Weighted graph; ``edges`` is a list of ``(u, v, length)`` triples."""
    edges = [(int(u), int(v), float(w)) for u, v, w in edges]
    m = np.ones(n_vertices) if measures is None else np.asarray(measures, float)
    return SpaceGrid("graph", m, edges=edges)


# ---------------------------------------------------------------------------
# operations


def ball_points(space: SpaceGrid, ball: Ball) -> np.ndarray:
    return space.ball_mask(ball.center, ball.radius)


def volume(space: SpaceGrid, x: int, r: float) -> float:
    if not r > 0:
        raise ValueError("radius must be positive")
    return float(space.measure[space.ball_mask(x, r)].sum())


def doubling_exponent_estimate(space: SpaceGrid, radius_ladder) -> float:
    """max over x and r in the ladder of log2(V(x, 2r) / V(x, r))."""
    radii = np.asarray(radius_ladder, float)
    if radii.size < 2:
        raise ValueError("radius ladder needs at least two radii")
    best = 0.0
    for r in radii:
        ratio = space.ball_sum(space.measure, 2 * r) / space.ball_sum(space.measure, r)
        best = max(best, float(np.log2(ratio.max())))
    return best


def maximal_extension(space: SpaceGrid, E: np.ndarray, sigma: float) -> np.ndarray:
    """E^sigma: points lying in some ball B with mu(B & E)/mu(B) > sigma.

    The search runs over every center and every distinct open ball, so the
    result is exact for the discrete space.
    """
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    E = np.asarray(E, bool)
    out = E.copy()
    if not E.any():
        return out
    weighted = space.measure * E
    for r in space.radius_ladder():
        frac = space.ball_sum(weighted, r) / space.ball_sum(space.measure, r)
        good = frac > sigma
        if good.any():
            out |= space.ball_sum(good.astype(float), r) > 0
        if out.all():
            break
    return out


@dataclass
class WhitneyCover:
    balls: list
    overlap: int

    def __iter__(self):
        return iter(self.balls)

    def __len__(self):
        return len(self.balls)


def whitney_decomposition(space: SpaceGrid, E: np.ndarray) -> WhitneyCover:
    """Greedy Whitney-type cover of ``E``.

    Points of ``E`` are visited by decreasing distance to the complement; every
    point not yet covered becomes the center of a ball of radius half that
    distance.  Consequently each point of ``E`` sits in a ball whose center is at
    least as far from the complement as the point itself.

    ``E = M`` returns a single ball containing the whole space.
    """
    E = np.asarray(E, bool)
    if not E.any():
        return WhitneyCover([], 0)
    if E.all():
        ball = Ball(0, space.diameter + space.min_spacing)
        return WhitneyCover([ball], 1)
    dist = space.dist_to_set(~E)
    pts = np.flatnonzero(E)
    order = pts[np.argsort(-dist[pts], kind="stable")]
    covered = np.zeros(space.n_points, bool)
    balls = []
    for y in order:
        if covered[y]:
            continue
        ball = Ball(int(y), 0.5 * float(dist[y]))
        balls.append(ball)
        covered |= ball_points(space, ball)
    count = np.zeros(space.n_points, int)
    for b in balls:
        count += ball_points(space, b.dilate(3))
    return WhitneyCover(balls, int(count.max()))


def dyadic_cubes(space: SpaceGrid, level: int) -> np.ndarray:
    """Label of the level-``level`` dyadic cube containing each point."""
    if not space.is_torus:
        raise ValueError("dyadic cubes need a torus")
    ks = []
    for s in space.sides:
        k = int(round(math.log2(s)))
        if 2**k != s:
            raise ValueError("torus sides must be powers of two")
        ks.append(k)
    if not 0 <= level <= min(ks):
        raise ValueError("level out of range")
    cube = [space.coords[:, a] >> (ks[a] - level) for a in range(space.dim)]
    return np.ravel_multi_index(tuple(cube), tuple(2**level for _ in ks))
