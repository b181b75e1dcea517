"""Hardy spaces of an operator L, L-atoms and the classical-atom comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .atomic import TentAtom, atomic_decompose
from .calculus import (
    HoloSymbol,
    OperatorL,
    _as_points,
    _propagation,
    functional_calculus,
    is_mean_zero,
    mixed_constant,
    mixed_symbol_sum,
    phi_symbol,
    pi_tilde,
    q_operator,
)
from .gamma import DEFAULT_SAMPLES, BanachSpace
from .geometry import Ball, SpaceGrid, _half_width, ball_points
from .halfspace import HalfGrid
from .tent import lp_norm, tent_norm

__all__ = [
    "default_order",
    "hardy_norm",
    "HcalcResult",
    "hcalc_experiment",
    "LAtom",
    "l_atom_build",
    "HardyDecomposition",
    "hardy_atomic_decompose",
    "ClassicalAtom",
    "classical_atom_hardy_bound",
    "lp_compare",
    "duality_ratio",
    "canonical_radius",
]


def default_order(space: SpaceGrid) -> int:
    """floor(n/2) + 1 for the measured doubling exponent n."""
    return int(math.floor(space.n / 2)) + 1


def canonical_radius(space: SpaceGrid, r: float) -> float:
    """Largest radius giving the same open ball as ``r`` (tori); ``r`` otherwise."""
    if space.is_torus:
        return (_half_width(r, space.cell) + 1) * space.cell
    return float(r)


def _mu_l2(space: SpaceGrid, f) -> float:
    arr, _ = _as_points(space, f)
    return float(math.sqrt((space.measure[:, None] * np.abs(arr) ** 2).sum()))


def hardy_norm(L: OperatorL, N: int, f, p: float = 1.0, X: BanachSpace | None = None,
               hg: HalfGrid | None = None, seed: int = 0, samples: int = DEFAULT_SAMPLES) -> float:
    """||Q_N f||_{T^p(X)}."""
    return tent_norm(q_operator(L, N, f, hg or L.auto_grid()), p, 1.0, X, seed, samples).value


@dataclass
class HcalcResult:
    sup_ratio: float
    rows: list
    sup_norm: float


def hcalc_experiment(L: OperatorL, phi: HoloSymbol, corpus, p: float = 1.0, N: int | None = None,
                     X: BanachSpace | None = None, hg: HalfGrid | None = None, seed: int = 0,
                     samples: int = DEFAULT_SAMPLES) -> HcalcResult:
    """sup over the corpus of ||phi(L) f||_{H^p} / (||phi||_inf ||f||_{H^p})."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    N = N or default_order(L.space)
    hg = hg or L.auto_grid()
    bound = 1.0 if phi.name == "one" else phi.sup_norm(L)
    rows = []
    for f in corpus:
        base = hardy_norm(L, N, f, p, X, hg, seed, samples)
        top = hardy_norm(L, N, functional_calculus(L, phi, f), p, X, hg, seed, samples)
        rows.append({"hp_f": base, "hp_phi_f": top, "ratio": top / (bound * base)})
    return HcalcResult(max(r["ratio"] for r in rows), rows, bound)


# --------------------------------------------------------------------------- L-atoms


@dataclass
class LAtom:
    """m = L^K m~ supported (up to leakage) in ``ball``; ``scale`` normalizes the size conditions.

    ``m`` and ``witness`` are stored normalized, i.e. divided by ``scale``.
    """

    m: np.ndarray
    witness: np.ndarray
    K: int
    N: int
    ball: Ball
    scale: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"ball": self.ball.to_json(), "K": self.K, "N": self.N, "scale": self.scale,
                "m": np.real(self.m).tolist(), "diagnostics": self.diagnostics}


def _l_atom_checks(L: OperatorL, m, witness, K: int, N: int, ball: Ball, hg: HalfGrid,
                   leak_tol: float, X, seed, samples) -> dict:
    sp = L.space
    pts = ball_points(sp, ball)
    mu_b = float(sp.measure[pts].sum())
    r = canonical_radius(sp, ball.radius)
    mass = sp.measure[:, None] * np.abs(m)
    total = float(mass.sum())
    leak = float(mass[~pts].sum() / total) if total > 0 else 0.0
    LK = L.apply_symbol(L.lam**K, witness)
    scale = max(float(np.abs(m).max()), 1e-300)
    power_defect = float(np.abs(LK - m).max() / scale)
    mean_defect = float(np.abs((sp.measure[:, None] * m).sum(axis=0)).max() / max(total, 1e-300))
    bound = r ** (2 * K) * mu_b**-0.5
    sizes = []
    for k in range(K + 1):
        vk = L.apply_symbol((r**2 * L.lam) ** k, witness)
        sizes.append(tent_norm(q_operator(L, N, vk, hg), 2.0, 1.0, X, seed, samples).value)
    return {"leakage": leak, "power_defect": power_defect, "mean_defect": mean_defect,
            "sizes": sizes, "size_bound": bound, "ball_measure": mu_b, "radius": r}


def l_atom_verify(L: OperatorL, atom: LAtom, hg: HalfGrid, leak_tol: float = 1e-6, tol: float = 1e-9,
                  X=None, seed: int = 0, samples: int = DEFAULT_SAMPLES) -> dict:
    """Recompute the L-atom conditions for a stored (normalized) atom."""
    d = _l_atom_checks(L, atom.m, atom.witness, atom.K, atom.N, atom.ball, hg, leak_tol, X, seed, samples)
    d["support_ok"] = d["leakage"] <= leak_tol
    d["power_ok"] = d["power_defect"] <= 1e-10
    d["mean_ok"] = d["mean_defect"] <= 1e-12
    d["size_ok"] = all(s <= d["size_bound"] * (1 + tol) for s in d["sizes"])
    d["valid"] = d["support_ok"] and d["power_ok"] and d["mean_ok"] and d["size_ok"]
    return d


def _atom_ball(L: OperatorL, ball: Ball, N: int, K: int) -> Ball:
    """The 2B of the construction, widened on lattices by the stencil reach of L^{N+K}."""
    sp = L.space
    r = canonical_radius(sp, ball.radius)
    if sp.is_torus:
        reach = (_half_width(ball.radius, sp.cell) + N + K + 1) * sp.cell
        return Ball(ball.center, max(2 * r, reach))
    return Ball(ball.center, 2 * r)


def l_atom_build(L: OperatorL, a: TentAtom, N: int, K: int = 1, propagation: str = "auto",
                 leak_tol: float = 1e-6, X: BanachSpace | None = None, seed: int = 0,
                 samples: int = DEFAULT_SAMPLES) -> LAtom:
    """Map a tent atom to pi~_{N+K} a and its witness m~ = sum_j log(rho) t_j^{2(N+K)} L^N Phi_{t_j} a_j.

    Only levels below the canonical radius of the atom's ball are integrated
    (the atom vanishes above it anyway).  The size conditions are evaluated for
    ``k = 0..K`` and their largest ratio to ``r^{2K} mu(B)^{-1/2}`` becomes the
    normalizing scale.
    """
    hg = a.a.hg
    u = a.a
    big = _atom_ball(L, a.ball, N, K)
    r_in = canonical_radius(L.space, a.ball.radius)
    levels = hg.t <= r_in
    m = pi_tilde(L, N + K, u, propagation, levels)
    phi = phi_symbol(L, hg.t, propagation)
    sym = hg.log_step * (hg.t[:, None] ** (2 * (N + K))) * L.lam[None, :] ** N * phi * levels[:, None]
    c = L.forward(u.values)
    witness = L.inverse((sym[..., None] * c).sum(axis=0), not (u.is_complex or np.iscomplexobj(sym)))
    if not np.any(m):
        return LAtom(m, witness, K, N, big, 1.0, {"zero": True})
    d = _l_atom_checks(L, m, witness, K, N, big, hg, leak_tol, X, seed, samples)
    scale = max(d["sizes"]) / d["size_bound"]
    atom = LAtom(m / scale, witness / scale, K, N, big, float(scale))
    atom.diagnostics = l_atom_verify(L, atom, hg, leak_tol, X=X, seed=seed, samples=samples)
    return atom


@dataclass
class HardyDecomposition:
    terms: list
    diagnostics: dict

    def reconstruct(self, P: int, m: int) -> np.ndarray:
        out = np.zeros((P, m))
        for lam, atom in self.terms:
            out = out + lam * atom.m
        return out


def hardy_atomic_decompose(L: OperatorL, f, N: int | None = None, K: int = 1,
                           X: BanachSpace | None = None, hg: HalfGrid | None = None,
                           propagation: str = "auto", corrected: bool = True, sigma: float = 0.5,
                           leak_tol: float = 1e-6, seed: int = 0,
                           samples: int = DEFAULT_SAMPLES) -> HardyDecomposition:
    """Decompose a mean-zero ``f`` into L-atoms through the tent space.

    ``f = c pi~_{N+K} Q_N f`` is discretized on the ladder.  With ``corrected``
    the scalar ``c`` is replaced by the exact inverse of the discrete symbol
    ``sum_j log(rho) (t_j^2 lam)^{2N+K} Phi_{t_j}(lam) e^{-t_j^2 lam}``, applied to
    ``f`` before ``Q_N``; otherwise the continuum constant is used.
    """
    sp = L.space
    arr, _ = _as_points(sp, f)
    if not is_mean_zero(sp, arr):
        raise ValueError("function must have zero mean")
    N = N or default_order(sp)
    hg = hg or L.auto_grid()
    prop = _propagation(L, propagation)
    if not np.any(arr):
        return HardyDecomposition([], {"atoms": 0, "residual": 0.0, "sum_lambda": 0.0})
    if corrected:
        disc = mixed_symbol_sum(L, hg, N, N + K, prop)
        inv = np.where(L.kernel_mask, 0.0, 1.0 / np.where(L.kernel_mask, 1.0, disc))
        g = L.apply_symbol(inv, arr)
        const = 1.0
    else:
        g = arr
        const = mixed_constant(2 * N + K)
    u = q_operator(L, N, g, hg)
    dec = atomic_decompose(u, sigma, X, seed, samples)
    terms = []
    for lam, a in dec.terms:
        atom = l_atom_build(L, a, N, K, prop, leak_tol, X, seed, samples)
        terms.append((const * lam * atom.scale, atom))
    out = HardyDecomposition(terms, {})
    rec = out.reconstruct(sp.n_points, arr.shape[-1])
    h1 = hardy_norm(L, N, arr, 1.0, X, hg, seed, samples)
    sum_lam = float(sum(abs(lam) for lam, _ in terms))
    out.diagnostics = {
        "atoms": len(terms),
        "residual": _mu_l2(sp, rec - arr) / _mu_l2(sp, arr),
        "sum_lambda": sum_lam,
        "h1_norm": h1,
        "lambda_over_h1": sum_lam / h1 if h1 > 0 else math.inf,
        "all_valid": all(atom.diagnostics.get("valid", True) for _, atom in terms),
        "max_leakage": max((atom.diagnostics.get("leakage", 0.0) for _, atom in terms), default=0.0),
        "max_mean_defect": max((atom.diagnostics.get("mean_defect", 0.0) for _, atom in terms), default=0.0),
        "N": N,
        "K": K,
        "propagation": prop,
        "corrected": corrected,
        "tent_residual": dec.diagnostics["residual"],
    }
    return out


# --------------------------------------------------------------------------- classical atoms


@dataclass
class ClassicalAtom:
    """Mean-zero function supported in a ball with ||m||_{l^2(mu)} <= mu(B)^{-1/2}."""

    space: SpaceGrid
    m: np.ndarray
    ball: Ball

    def check(self, tol: float = 1e-12) -> dict:
        sp = self.space
        pts = ball_points(sp, self.ball)
        mu_b = float(sp.measure[pts].sum())
        mass = float((sp.measure * np.abs(self.m)).sum())
        return {
            "support_ok": not np.any(self.m[~pts]),
            "mean_ok": abs(float((sp.measure * self.m).sum())) <= tol * max(mass, 1e-300),
            "size_ok": _mu_l2(sp, self.m) <= mu_b**-0.5 * (1 + tol),
        }

    @property
    def valid(self) -> bool:
        return all(self.check().values())

    @classmethod
    def two_point(cls, space: SpaceGrid, x0: int, x1: int, ball: Ball) -> "ClassicalAtom":
        mu_b = float(space.measure[ball_points(space, ball)].sum())
        m = np.zeros(space.n_points)
        m[x0] = 1.0 / space.measure[x0]
        m[x1] = -1.0 / space.measure[x1]
        m *= mu_b**-0.5 / _mu_l2(space, m)
        return cls(space, m, ball)

    @classmethod
    def odd_step(cls, space: SpaceGrid, center: int, radius: float) -> "ClassicalAtom":
        """Sign of the first-axis offset from the center inside the ball, normalized."""
        ball = Ball(center, radius)
        pts = ball_points(space, ball)
        if space.is_torus:
            s = space.sides[0]
            off = (space.coords[:, 0] - space.coords[center, 0] + s // 2) % s - s // 2
        else:
            off = space.distances_from(center) * np.where(np.arange(space.n_points) < center, -1, 1)
        m = np.where(pts, np.sign(off), 0.0).astype(float)
        m -= pts * (space.measure * m).sum() / space.measure[pts].sum()
        m *= float(space.measure[pts].sum()) ** -0.5 / _mu_l2(space, m)
        return cls(space, m, ball)


def classical_atom_hardy_bound(L: OperatorL, atoms, N: int | None = None, hg: HalfGrid | None = None,
                               seed: int = 0, samples: int = DEFAULT_SAMPLES):
    """sup of ||m||_{H^1} over verified classical atoms; returns ``(sup, values)``."""
    N = N or default_order(L.space)
    values = []
    for atom in atoms:
        if not atom.valid:
            raise ValueError("invalid classical atom in corpus")
        values.append(0.0 if not np.any(atom.m) else hardy_norm(L, N, atom.m, 1.0, None, hg, seed, samples))
    return max(values, default=0.0), values


def lp_compare(L: OperatorL, f, p: float, N: int | None = None, X: BanachSpace | None = None,
               hg: HalfGrid | None = None, seed: int = 0, samples: int = DEFAULT_SAMPLES) -> float:
    """||f||_{H^p} / ||f||_{l^p(mu; X)}."""
    arr, _ = _as_points(L.space, f)
    if not np.any(arr):
        raise ValueError("f must be non-zero")
    X = X or BanachSpace(arr.shape[-1])
    N = N or default_order(L.space)
    denom = lp_norm(L.space, X.norm(arr), p)
    return hardy_norm(L, N, arr, p, X, hg, seed, samples) / denom


def duality_ratio(L: OperatorL, f, g, p: float, N: int | None = None,
                  hg: HalfGrid | None = None) -> float:
    """|sum mu <f, g>| / (||f||_{H^p} ||g||_{H^p'}) for scalar functions."""
    if not 1 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    N = N or default_order(L.space)
    hg = hg or L.auto_grid()
    q = p / (p - 1)
    pair = abs(complex((L.space.measure * np.asarray(f) * np.conj(np.asarray(g))).sum()))
    return pair / (hardy_norm(L, N, f, p, None, hg) * hardy_norm(L, N, g, q, None, hg))
