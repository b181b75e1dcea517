"""The discretized upper half-space M x (0, inf).

Nodes are pairs ``(j, y)`` of a time level ``t_j = t_min * rho**j`` and a point
``y``.  Regions are boolean masks of shape ``(J, P)``; numpy's ``&``, ``|`` and
``& ~`` give the set algebra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix

from .geometry import SpaceGrid, _half_width, maximal_extension

__all__ = [
    "HalfGrid",
    "cone",
    "truncated_cone",
    "tent",
    "tent_via_cones",
    "cone_cover_search",
    "CoverCertificate",
    "verify_cover",
    "region_pairs",
]


@dataclass(eq=False)
class HalfGrid:
    space: SpaceGrid
    t_min: float
    rho: float
    levels: int

    def __post_init__(self):
        if not (self.t_min > 0 and self.rho > 1 and self.levels >= 1):
            raise ValueError("need t_min > 0, rho > 1 and at least one level")

    @classmethod
    def geometric(cls, space: SpaceGrid, rho: float = 2 ** 0.25, t_min=None, t_max=None):
        """Default ladder from ``h/2`` up to at least four diameters."""
        t_min = 0.5 * space.min_spacing if t_min is None else t_min
        t_max = 4 * space.diameter if t_max is None else t_max
        levels = int(math.ceil(math.log(t_max / t_min) / math.log(rho))) + 1
        return cls(space, float(t_min), float(rho), max(levels, 1))

    @classmethod
    def spectral(cls, space: SpaceGrid, lam_min: float, lam_max: float, rho: float = 2 ** 0.125,
                 lo: float = 0.1, hi: float = 3.0):
        """Ladder covering ``[lo/sqrt(lam_max), hi/sqrt(lam_min)]``."""
        t_min = lo / math.sqrt(lam_max)
        t_max = hi / math.sqrt(lam_min)
        return cls.geometric(space, rho=rho, t_min=t_min, t_max=t_max)

    @property
    def shape(self) -> tuple:
        return (self.levels, self.space.n_points)

    @cached_property
    def t(self) -> np.ndarray:
        return self.t_min * self.rho ** np.arange(self.levels)

    @property
    def log_step(self) -> float:
        return math.log(self.rho)

    @cached_property
    def volumes(self) -> np.ndarray:
        """V(y, t_j), shape (J, P)."""
        sp = self.space
        return np.stack([sp.ball_sum(sp.measure, tj) for tj in self.t])

    @cached_property
    def gamma_weight(self) -> np.ndarray:
        """Quadrature weight of d mu dt / (t V): mu(y) log(rho) / V(y, t_j)."""
        return self.pair_weight / self.volumes

    @cached_property
    def pair_weight(self) -> np.ndarray:
        """Quadrature weight of d mu dt / t: mu(y) log(rho)."""
        return np.broadcast_to(self.space.measure * self.log_step, self.shape).copy()

    def empty(self) -> np.ndarray:
        return np.zeros(self.shape, bool)

    def full(self) -> np.ndarray:
        return np.ones(self.shape, bool)

    def same_as(self, other: "HalfGrid") -> bool:
        return (self.space is other.space and self.levels == other.levels
                and self.t_min == other.t_min and self.rho == other.rho)

    def region_measure(self, region: np.ndarray, pairing: bool = False) -> float:
        w = self.pair_weight if pairing else self.gamma_weight
        return float(w[region].sum())


def cone(hg: HalfGrid, x: int, alpha: float = 1.0) -> np.ndarray:
    if alpha < 1:
        raise ValueError("aperture must be >= 1")
    d = hg.space.distances_from(x)
    return d[None, :] < alpha * hg.t[:, None]


def truncated_cone(hg: HalfGrid, x: int, r: float) -> np.ndarray:
    return cone(hg, x) & (hg.t < r)[:, None]


def tent(hg: HalfGrid, E: np.ndarray) -> np.ndarray:
    """T(E) = {(y, t) : B(y, t) inside E}."""
    E = np.asarray(E, bool)
    if E.all():
        return hg.full()
    if not E.any():
        return hg.empty()
    outside = (~E).astype(float)
    return np.stack([hg.space.ball_sum(outside, tj) == 0 for tj in hg.t])


def tent_via_cones(hg: HalfGrid, E: np.ndarray) -> np.ndarray:
    """M+ minus the union of the cones with vertex outside E (brute force)."""
    out = hg.full()
    for x in np.flatnonzero(~np.asarray(E, bool)):
        out &= ~cone(hg, int(x))
    return out


def region_pairs(region: np.ndarray) -> list:
    """Sorted ``[point, level]`` pairs of a region, for JSON export."""
    lv, pt = np.nonzero(region)
    order = np.lexsort((lv, pt))
    return [[int(pt[i]), int(lv[i])] for i in order]


@dataclass
class CoverCertificate:
    x: int
    points: list
    success: bool
    residual: int

    @property
    def size(self) -> int:
        return len(self.points)


def _cone_union(hg: HalfGrid, points) -> np.ndarray:
    out = hg.empty()
    for z in points:
        out |= cone(hg, int(z))
    return out


def verify_cover(hg: HalfGrid, E: np.ndarray, sigma: float, x: int, points,
                 E_ext: np.ndarray | None = None) -> bool:
    """Node-by-node check of Gamma(x) minus T(E^sigma) inside the union of cones."""
    E = np.asarray(E, bool)
    if any(E[int(z)] for z in points):
        return False
    E_ext = maximal_extension(hg.space, E, sigma) if E_ext is None else E_ext
    residual = cone(hg, x) & ~tent(hg, E_ext)
    return not (residual & ~_cone_union(hg, points)).any()


def cone_cover_search(hg: HalfGrid, E: np.ndarray, sigma: float, x: int, n_max: int = 64,
                      E_ext: np.ndarray | None = None, method: str = "greedy") -> CoverCertificate:
    """Set cover of Gamma(x) minus T(E^sigma) by cones with vertex outside E.

    ``method="greedy"`` takes, at each step, the candidate whose cone contains
    the most uncovered nodes, ties going to the one nearest to ``x``.
    ``method="exact"`` solves the minimum cover as a 0/1 integer program, so the
    certificate size is the covering number itself.  Failure (no cover within
    ``n_max`` cones) is reported in the certificate, never hidden.
    """
    E = np.asarray(E, bool)
    if not E[x]:
        raise ValueError("x must belong to E")
    if E.all():
        raise ValueError("E must be a proper subset of M")
    if method not in ("greedy", "exact"):
        raise ValueError(f"unknown method {method!r}")
    sp = hg.space
    E_ext = maximal_extension(sp, E, sigma) if E_ext is None else E_ext
    residual = cone(hg, x) & ~tent(hg, E_ext)
    if method == "exact":
        chosen = _exact_cover(hg, residual, ~E)
        if chosen is None or len(chosen) > n_max:
            return CoverCertificate(x, [], False, int(residual.sum()))
        return CoverCertificate(x, chosen, True, 0)
    candidates = ~E
    dist_x = sp.distances_from(x)
    order_key = np.lexsort((np.arange(sp.n_points), dist_x))
    rank = np.empty(sp.n_points, int)
    rank[order_key] = np.arange(sp.n_points)
    chosen = []
    while residual.any() and len(chosen) < n_max:
        counts = np.zeros(sp.n_points)
        for j, tj in enumerate(hg.t):
            if residual[j].any():
                counts += sp.ball_sum(residual[j].astype(float), tj)
        counts[~candidates] = -1
        best = counts.max()
        if best <= 0:
            break
        ties = np.flatnonzero(counts == best)
        z = int(ties[np.argmin(rank[ties])])
        chosen.append(z)
        residual &= ~cone(hg, z)
    left = int(residual.sum())
    return CoverCertificate(x, chosen, left == 0, left)


def _exact_cover(hg: HalfGrid, residual: np.ndarray, candidates: np.ndarray):
    """Minimum set of candidate vertices whose cones cover ``residual``, or None."""
    sp = hg.space
    if not residual.any():
        return []
    # (y, t) lies in the cone of z iff d(z, y) < t, so the lowest residual level
    # at each y is the binding constraint
    has = residual.any(axis=0)
    ys = np.flatnonzero(has)
    lv = residual.argmax(axis=0)[ys]
    if sp.is_torus:
        # drop constraints implied by a smaller ball nested inside them
        hw = np.array([_half_width(t, sp.cell) for t in hg.t])[lv]
        keep = np.ones(ys.size, bool)
        for k in np.unique(hw):
            ind = np.zeros(sp.n_points)
            ind[ys[hw == k]] = 1.0
            for k2 in np.unique(hw[hw > k]):
                inside = sp.ball_sum(ind, (k2 - k + 0.5) * sp.cell) > 0
                keep &= ~((hw == k2) & inside[ys])
        ys, lv = ys[keep], lv[keep]
    rows, cols = [], []
    for i, (y, j) in enumerate(zip(ys, lv)):
        z = np.flatnonzero((sp.distances_from(int(y)) < hg.t[j]) & candidates)
        if z.size == 0:
            return None
        rows.append(np.full(z.size, i))
        cols.append(z)
    rows = np.concatenate(rows)
    used, col = np.unique(np.concatenate(cols), return_inverse=True)
    A = csr_matrix((np.ones(rows.size), (rows, col)), shape=(ys.size, used.size))
    res = milp(np.ones(used.size), constraints=LinearConstraint(A, 1, np.inf),
               integrality=np.ones(used.size), bounds=Bounds(0, 1), options={"mip_rel_gap": 0.0})
    if not res.success:
        return None
    return [int(z) for z in used[res.x > 0.5]]
