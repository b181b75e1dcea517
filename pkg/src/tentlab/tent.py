"""Tent-space functionals and norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gamma import DEFAULT_SAMPLES, BanachSpace, TentFunction, cone_moments, gamma_norm
from .geometry import _half_width, maximal_extension
from .halfspace import HalfGrid, cone, cone_cover_search, tent

__all__ = [
    "TentNormReport",
    "a_functional",
    "conical_functional",
    "tent_norm",
    "tent_norm_inf",
    "scalar_tent_inf_form",
    "duality_pairing",
    "aperture_exponent_fit",
    "pointwise_truncation_bound",
    "averaging_projection_check",
    "shadow",
    "lp_norm",
]


def lp_norm(space, f, p: float) -> float:
    """Discrete L^p(mu) norm of a nonnegative array over the points."""
    f = np.abs(np.asarray(f))
    if math.isinf(p):
        return float(f.max())
    return float((space.measure * f**p).sum() ** (1.0 / p))


@dataclass
class TentNormReport:
    p: float
    alpha: float
    value: float
    functional: np.ndarray = field(repr=False)
    stderr: np.ndarray = field(repr=False)
    method: str = "exact"
    samples: int = 0
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "p": self.p if math.isfinite(self.p) else "inf",
            "alpha": self.alpha,
            "value": self.value,
            "functional": self.functional.tolist(),
            "stderr": self.stderr.tolist(),
            "gamma": {"method": self.method, "samples": self.samples, "seed": self.seed},
        }


def conical_functional(u: TentFunction, alpha: float = 1.0, X: BanachSpace | None = None,
                       seed: int = 0, samples: int = DEFAULT_SAMPLES, method: str | None = None):
    """The square function x -> A_alpha u(x) and its pointwise standard error."""
    mean, se = cone_moments(u, X, alpha, seed=seed, samples=samples, method=method)
    a = np.sqrt(mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        err = np.where(a > 0, se / (2 * a), 0.0)
    return a, err


def a_functional(u: TentFunction, x: int, alpha: float = 1.0, X: BanachSpace | None = None,
                 seed: int = 0, samples: int = DEFAULT_SAMPLES) -> float:
    """A_alpha u(x): the gamma norm of u restricted to the cone at x."""
    return gamma_norm(u, cone(u.hg, x, alpha), X, seed, samples).value


def tent_norm(u: TentFunction, p: float = 1.0, alpha: float = 1.0, X: BanachSpace | None = None,
              seed: int = 0, samples: int = DEFAULT_SAMPLES, method: str | None = None) -> TentNormReport:
    if p < 1:
        raise ValueError("p must be >= 1")
    X = X or BanachSpace(u.m)
    a, err = conical_functional(u, alpha, X, seed, samples, method)
    mc = (method or ("exact" if X.is_hilbert else "mc")) == "mc"
    return TentNormReport(p, alpha, lp_norm(u.hg.space, a, p), a, err,
                          "mc" if mc else "exact", samples if mc else 0, seed if mc else None)


def tent_norm_inf(v: TentFunction, X: BanachSpace | None = None, seed: int = 0,
                  samples: int = DEFAULT_SAMPLES, method: str | None = None) -> float:
    """sup over balls B of (average over B of A^{r_B} v(x)^2)^{1/2}.

    For each distinct open ball the largest admissible radius is used, since
    it admits the most levels into the truncated cones.
    """
    hg = v.hg
    sp = hg.space
    prefix, _ = cone_moments(v, X, 1.0, prefix=True, seed=seed, samples=samples, method=method)
    best = 0.0
    for r in sp.sup_radius_ladder():
        nlev = int(np.searchsorted(hg.t, r, side="left")) if math.isfinite(r) else hg.levels
        if nlev == 0:
            continue
        a2 = prefix[nlev - 1]
        if math.isfinite(r):
            avg = sp.ball_sum(sp.measure * a2, r) / sp.ball_sum(sp.measure, r)
        else:
            avg = np.array([(sp.measure * a2).sum() / sp.total_measure])
        best = max(best, float(avg.max()))
    return math.sqrt(best)


def _tent_of_balls_mass(hg: HalfGrid, dens: np.ndarray, r: float) -> np.ndarray:
    """For every center c: sum of ``dens`` over the tent of B(c, r)."""
    sp = hg.space
    if sp.is_torus and len(set(sp.sides)) == 1:
        kb = _half_width(r, sp.cell)
        if 2 * kb + 1 >= sp.sides[0]:
            return np.full(sp.n_points, dens.sum())
        out = np.zeros(sp.n_points)
        for j, tj in enumerate(hg.t):
            room = kb - _half_width(tj, sp.cell)
            if room >= 0:
                out += sp.ball_sum(dens[j], (room + 0.5) * sp.cell)
        return out
    out = np.zeros(sp.n_points)
    for c in range(sp.n_points):
        out[c] = dens[tent(hg, sp.ball_mask(c, r))].sum()
    return out


def scalar_tent_inf_form(v: TentFunction, X: BanachSpace | None = None) -> float:
    """sup_B ( mu(B)^{-1} sum over T(B) of |v|^2 dmu dt/t )^{1/2} for functions."""
    X = X or BanachSpace(v.m)
    hg = v.hg
    sp = hg.space
    dens = hg.pair_weight * X.sq_norm_hilbert(v.values)
    best = 0.0
    for r in sp.radius_ladder():
        mass = _tent_of_balls_mass(hg, dens, r)
        best = max(best, float((mass / sp.ball_sum(sp.measure, r)).max()))
    return math.sqrt(best)


def duality_pairing(u: TentFunction, v: TentFunction):
    """sum over nodes of <u, v> times the d mu dt / t weight."""
    if not u.hg.same_as(v.hg) or u.m != v.m:
        raise ValueError("pairing needs the same half-grid and dimension")
    s = (u.hg.pair_weight[..., None] * u.values * v.values).sum()
    return complex(s) if np.iscomplexobj(s) else float(s)


@dataclass
class ApertureFit:
    exponent: float
    slopes: list
    ratios: list
    apertures: list


def aperture_exponent_fit(corpus, apertures=(1, 2, 4, 8), p: float = 1.0,
                          X: BanachSpace | None = None, seed: int = 0,
                          samples: int = DEFAULT_SAMPLES) -> ApertureFit:
    """Log-log slope of ||A_alpha u||_p / ||A u||_p against alpha, maximized over the corpus.

    Apertures for which the widest cone at the top level of the support
    already reaches the diameter are dropped (saturation).
    """
    if not corpus:
        raise ValueError("empty corpus")
    slopes, ratios = [], []
    used = None
    for u in corpus:
        sp = u.hg.space
        levels = np.flatnonzero(u.support.any(axis=1))
        if levels.size == 0:
            raise ValueError("corpus member has zero norm")
        t_top = u.hg.t[levels.max()]
        alphas = [a for a in apertures if a == 1 or a * t_top < sp.diameter]
        if len(alphas) < 2:
            raise ValueError("fewer than two unsaturated apertures")
        base = tent_norm(u, p, 1.0, X, seed, samples).value
        if base == 0:
            raise ValueError("corpus member has zero norm")
        r = [tent_norm(u, p, a, X, seed, samples).value / base for a in alphas]
        slope = np.polyfit(np.log(alphas), np.log(r), 1)[0]
        slopes.append(float(slope))
        ratios.append(r)
        used = alphas if used is None or len(alphas) < len(used) else used
    return ApertureFit(max(slopes), slopes, ratios, used)


@dataclass
class TruncationBound:
    ratio: float
    lam: float
    n_cover: int
    cover_sizes: dict
    covers_ok: bool
    max_functional: float


def pointwise_truncation_bound(u: TentFunction, lam: float, sigma: float = 0.5,
                               X: BanachSpace | None = None, seed: int = 0,
                               samples: int = DEFAULT_SAMPLES, n_max: int = 64) -> TruncationBound:
    """max_x A(u 1_{M+ minus T(E*)})(x) / lam with E = {A u > lam}."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    hg = u.hg
    a, _ = conical_functional(u, 1.0, X, seed, samples)
    E = a > lam
    if not E.any():
        return TruncationBound(float(a.max() / lam), lam, 0, {}, True, float(a.max()))
    E_ext = maximal_extension(hg.space, E, sigma)
    truncated = u.restrict(~tent(hg, E_ext))
    at, _ = conical_functional(truncated, 1.0, X, seed, samples)
    sizes = {}
    ok = True
    if not E.all():
        for x in np.flatnonzero(E):
            cert = cone_cover_search(hg, E, sigma, int(x), n_max, E_ext=E_ext)
            sizes[int(x)] = cert.size
            ok &= cert.success
    n_cover = max(sizes.values(), default=0)
    return TruncationBound(float(at.max() / lam), lam, n_cover, sizes, ok, float(a.max()))


def shadow(hg: HalfGrid, region: np.ndarray) -> np.ndarray:
    """S(K) = {x : Gamma(x) meets K}."""
    sp = hg.space
    out = np.zeros(sp.n_points, bool)
    for j, tj in enumerate(hg.t):
        if region[j].any():
            out |= sp.ball_sum(region[j].astype(float), tj) > 0
    return out


def averaging_projection_check(u: TentFunction, alpha: float = 2.0, max_entries: int = 4_000_000) -> float:
    """Max deviation between J_alpha u and N_alpha (J u), evaluated by brute force.

    ``J u(x) = u 1_{Gamma(x)}`` is materialized as a field over x and the
    averaging projection ``N_alpha F(x; y, t) = 1[d(x, y) < alpha t] * avg_{z in B(y, t)} F(z; y, t)``
    is applied directly.
    """
    hg = u.hg
    sp = hg.space
    P, J = sp.n_points, hg.levels
    if P * J * P * u.m > max_entries:
        raise MemoryError("grid too large for the averaging projection check")
    D = sp.distance_matrix()
    inside = D[None, :, :] < hg.t[:, None, None]          # (J, z, y): d(z, y) < t_j
    JF = inside.transpose(1, 0, 2)[..., None] * u.values[None]  # (x, J, y, m)
    mu = sp.measure
    avg = np.einsum("jzy,z,zjym->jym", inside, mu, JF) / hg.volumes[..., None]
    wide = (D[None, :, :] < alpha * hg.t[:, None, None]).transpose(1, 0, 2)  # (x, J, y)
    lhs = wide[..., None] * u.values[None]
    rhs = wide[..., None] * avg[None]
    return float(np.abs(lhs - rhs).max()) if lhs.size else 0.0
