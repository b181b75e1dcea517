"""Constructive atomic decomposition of T^1 and the interpolating family.

Both constructions start from the same level structure of a tent function:

    E_k  = {A u > 2^k},   E_k* = maximal_extension(E_k),   A_k = T(E_k*) minus T(E_{k+1}*).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .gamma import DEFAULT_SAMPLES, BanachSpace, TentFunction
from .geometry import Ball, ball_points, maximal_extension, whitney_decomposition
from .halfspace import tent
from .tent import conical_functional, tent_norm

__all__ = [
    "LevelStructure",
    "level_structure",
    "TentAtom",
    "Decomposition",
    "atomic_decompose",
    "verify_atom",
    "AtomCheck",
    "interpolation_function",
    "interpolation_theta",
    "WHITNEY_DILATION",
]

WHITNEY_DILATION = 3.0


@dataclass
class LevelStructure:
    functional: np.ndarray
    ks: list
    E: dict
    E_ext: dict
    A: dict

    def level_mass(self, space, p: float) -> float:
        """sum_k 2^{kp} mu(E_k*)."""
        return float(sum(2.0 ** (k * p) * space.measure[self.E_ext[k]].sum() for k in self.ks))


def level_structure(u: TentFunction, sigma: float = 0.5, X: BanachSpace | None = None,
                    seed: int = 0, samples: int = DEFAULT_SAMPLES) -> LevelStructure:
    hg = u.hg
    sp = hg.space
    a, _ = conical_functional(u, 1.0, X, seed, samples)
    pos = a[a > 0]
    if pos.size == 0:
        return LevelStructure(a, [], {}, {}, {})
    k_lo = math.floor(math.log2(pos.min())) - 1
    k_hi = math.ceil(math.log2(pos.max()))
    ks = list(range(k_lo, k_hi + 1))
    E, E_ext, tents = {}, {}, {}
    for k in ks + [k_hi + 1]:
        E[k] = a > 2.0**k
        E_ext[k] = maximal_extension(sp, E[k], sigma) if E[k].any() else E[k].copy()
        tents[k] = tent(hg, E_ext[k])
    A = {k: tents[k] & ~tents[k + 1] for k in ks}
    del E[k_hi + 1], E_ext[k_hi + 1]
    return LevelStructure(a, ks, E, E_ext, A)


@dataclass
class TentAtom:
    ball: Ball
    a: TentFunction
    tent_mask: np.ndarray = field(repr=False)
    ball_measure: float
    level: int | None = None

    def to_json(self) -> dict:
        lv, pt = np.nonzero(self.a.support)
        vals = self.a.values[lv, pt]
        return {
            "ball": self.ball.to_json(),
            "level": self.level,
            "nodes": [[int(p), int(j)] for p, j in zip(pt, lv)],
            "values": np.real(vals).tolist(),
        }


@dataclass
class Decomposition:
    terms: list
    diagnostics: dict

    @property
    def coefficients(self) -> np.ndarray:
        return np.array([lam for lam, _ in self.terms])

    def reconstruct(self, like: TentFunction) -> TentFunction:
        out = np.zeros_like(like.values)
        for lam, atom in self.terms:
            out = out + lam * atom.a.values
        return TentFunction(like.hg, out)

    def to_json(self) -> dict:
        return {"atoms": [{"lambda": lam, **atom.to_json()} for lam, atom in self.terms],
                "diagnostics": self.diagnostics}


def _pow2_ceil(x: float) -> float:
    m, e = math.frexp(x)
    return math.ldexp(1.0, e - 1) if m == 0.5 else math.ldexp(1.0, e)


def atomic_decompose(u: TentFunction, sigma: float = 0.5, X: BanachSpace | None = None,
                     seed: int = 0, samples: int = DEFAULT_SAMPLES,
                     levels: LevelStructure | None = None) -> Decomposition:
    """Split ``u`` into tent atoms along level sets and Whitney balls.

    Each level piece ``A_k`` is partitioned by assigning every node to the
    first dilated Whitney ball ``3B`` whose tent contains it.  Coefficients are
    ``mu(3B)^{1/2} ||u 1_piece||_{T^2}`` rounded up to a power of two, so the
    atoms ``u 1_piece / lambda`` reproduce ``u`` without rounding error.
    """
    hg = u.hg
    sp = hg.space
    X = X or BanachSpace(u.m)
    supp = u.support
    norm1 = tent_norm(u, 1.0, 1.0, X, seed, samples).value
    if not supp.any():
        return Decomposition([], {"sum_lambda": 0.0, "t1_norm": norm1, "residual": 0.0,
                                  "levels": 0, "atoms": 0, "max_overlap": 0})
    ls = levels or level_structure(u, sigma, X, seed, samples)
    covered = np.zeros(hg.shape, bool)
    for k in ls.ks:
        covered |= ls.A[k]
    if (supp & ~covered).any():
        raise RuntimeError("level pieces do not cover the support")
    terms = []
    overlap = 0
    for k in ls.ks:
        piece_k = ls.A[k] & supp
        if not piece_k.any():
            continue
        cover = whitney_decomposition(sp, ls.E_ext[k])
        overlap = max(overlap, cover.overlap)
        owner = np.full(hg.shape, -1)
        dilated = []
        for j, b in enumerate(cover.balls):
            bb = b.dilate(WHITNEY_DILATION)
            pts = ball_points(sp, bb)
            tb = tent(hg, pts)
            owner[(owner < 0) & piece_k & tb] = j
            dilated.append((bb, pts, tb))
        if (piece_k & (owner < 0)).any():
            raise RuntimeError(f"level {k}: nodes outside every dilated Whitney tent")
        for j, (bb, pts, tb) in enumerate(dilated):
            piece = owner == j
            if not piece.any():
                continue
            part = u.restrict(piece)
            mu_b = float(sp.measure[pts].sum())
            size = tent_norm(part, 2.0, 1.0, X, seed, samples).value
            if size == 0:
                continue
            lam = _pow2_ceil(math.sqrt(mu_b) * size)
            atom = TentAtom(bb, part / lam, tb, mu_b, k)
            terms.append((lam, atom))
    dec = Decomposition(terms, {})
    residual = float(np.abs(dec.reconstruct(u).values - u.values).max())
    dec.diagnostics = {
        "sum_lambda": float(sum(lam for lam, _ in terms)),
        "t1_norm": norm1,
        "residual": residual,
        "levels": len(ls.ks),
        "atoms": len(terms),
        "max_overlap": overlap,
    }
    return dec


@dataclass
class AtomCheck:
    passed: bool
    support_ok: bool
    t2_ok: bool
    tp_ok: dict
    t2_value: float
    bound: float


def verify_atom(atom: TentAtom, X: BanachSpace | None = None, seed: int = 0,
                samples: int = DEFAULT_SAMPLES, rtol: float = 1e-12) -> AtomCheck:
    """Support in T(B), ||a||_{T^2} <= mu(B)^{-1/2} and ||a||_{T^p} <= mu(B)^{-(1-1/p)}."""
    a = atom.a
    support_ok = not (a.support & ~atom.tent_mask).any()
    mu_b = atom.ball_measure
    rep2 = tent_norm(a, 2.0, 1.0, X, seed, samples)
    slack2 = _mc_slack(rep2)
    bound = mu_b ** -0.5
    t2_ok = rep2.value <= bound * (1 + rtol) + slack2
    tp_ok = {}
    for p in (1.0, 1.5, 2.0):
        rep = tent_norm(a, p, 1.0, X, seed, samples)
        tp_ok[p] = rep.value <= mu_b ** -(1 - 1 / p) * (1 + rtol) + _mc_slack(rep)
    passed = support_ok and t2_ok and all(tp_ok.values())
    return AtomCheck(passed, support_ok, t2_ok, tp_ok, rep2.value, bound)


def _mc_slack(rep) -> float:
    if rep.method != "mc" or rep.value == 0:
        return 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(rep.functional > 0, rep.stderr / rep.functional, 0.0)
    return 3.0 * float(rel.max()) * rep.value


def interpolation_theta(p: float, r: float) -> float:
    """theta with 1/p = 1 - theta (1 - 1/r)."""
    return (1 - 1 / p) / (1 - 1 / r)


def interpolation_function(u: TentFunction, p: float, r: float, zeta: complex, sigma: float = 0.5,
                           X: BanachSpace | None = None, seed: int = 0,
                           samples: int = DEFAULT_SAMPLES,
                           levels: LevelStructure | None = None) -> TentFunction:
    """Upsilon(zeta) = sum_k 2^{k (v(zeta) p - 1)} u 1_{A_k}, v(zeta) = 1 - zeta (1 - 1/r).

    The exponent is evaluated as ``(p - 1)(1 - zeta/theta)``, which is the same
    quantity but vanishes exactly at ``zeta = theta``.
    """
    zeta = complex(zeta)
    if not 0 <= zeta.real <= 1:
        raise ValueError("zeta must lie in the closed strip 0 <= Re zeta <= 1")
    if not 1 < r <= 2:
        raise ValueError("r must lie in (1, 2]")
    if not 1 <= p <= r:
        raise ValueError("p must lie in [1, r]")
    ls = levels or level_structure(u, sigma, X, seed, samples)
    if p == 1:
        expo = -zeta * (1 - 1 / r)
    else:
        expo = (p - 1) * (1 - zeta / interpolation_theta(p, r))
    real = expo.imag == 0
    out = np.zeros(u.values.shape, dtype=float if (real and not u.is_complex) else complex)
    for k in ls.ks:
        e = k * (expo.real if real else expo)
        mult = 1.0 if e == 0 else (2.0 ** e if real else np.exp(e * math.log(2.0)))
        mask = ls.A[k][..., None]
        out = np.where(mask, u.values * mult, out)
    return TentFunction(u.hg, out)
