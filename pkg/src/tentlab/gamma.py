"""Gaussian model of vector-valued stochastic integrals on the half-space grid.

A tent function ``u`` takes values in a finite-dimensional space ``X = l^q_m``.
Its gamma-radonifying norm restricted to a region ``R`` is

    ||u 1_R||_gamma = ( E || sum_{p in R} sqrt(w_p) g_p u_p ||_X^2 )^{1/2}

with i.i.d. standard Gaussians ``g_p`` and the quadrature weights ``w_p`` of
``d mu dt / (t V)``.  For ``q = 2`` this is the weighted l^2 sum (Ito isometry)
and is evaluated exactly; otherwise it is estimated by Monte Carlo.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .halfspace import HalfGrid

__all__ = [
    "BanachSpace",
    "TentFunction",
    "GammaEstimate",
    "gamma_norm",
    "cone_moments",
    "moment_ratio",
    "restriction_monotonicity_check",
    "type_constant_probe",
    "gaussian_batches",
    "DEFAULT_SAMPLES",
]

DEFAULT_SAMPLES = 4096
BATCH = 256


@dataclass(frozen=True)
class BanachSpace:
    """``l^q`` on ``R^m`` with optional coordinate scales: ||x|| = ||scales * x||_q."""

    m: int = 1
    q: float = 2.0
    scales: tuple | None = None

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("dimension must be >= 1")
        if not (self.q >= 1):
            raise ValueError("q must lie in [1, inf]")
        if self.scales is not None:
            if len(self.scales) != self.m or min(self.scales) <= 0:
                raise ValueError("scales must be m positive numbers")

    @property
    def is_hilbert(self) -> bool:
        return self.q == 2

    @property
    def dual_exponent(self) -> float:
        if self.q == 1:
            return math.inf
        if math.isinf(self.q):
            return 1.0
        return self.q / (self.q - 1)

    def dual(self) -> "BanachSpace":
        scales = None if self.scales is None else tuple(1.0 / s for s in self.scales)
        return BanachSpace(self.m, self.dual_exponent, scales)

    def _scaled(self, x):
        x = np.abs(np.asarray(x))
        if self.scales is not None:
            x = x * np.asarray(self.scales)
        return x

    def norm(self, x) -> np.ndarray:
        """Norm along the last axis."""
        a = self._scaled(x)
        if math.isinf(self.q):
            return a.max(axis=-1)
        if self.q == 2:
            return np.sqrt((a * a).sum(axis=-1))
        return (a**self.q).sum(axis=-1) ** (1.0 / self.q)

    def sq_norm_hilbert(self, x) -> np.ndarray:
        a = self._scaled(x)
        return (a * a).sum(axis=-1)

    def to_json(self) -> dict:
        return {"m": self.m, "q": self.q if math.isfinite(self.q) else "inf",
                "scales": None if self.scales is None else list(self.scales)}


@dataclass(eq=False)
class TentFunction:
    """Values on the half-space nodes, shape ``(J, P, m)``; real or complex."""

    hg: HalfGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim == 2:
            v = v[..., None]
        if v.shape[:2] != self.hg.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.hg.shape}")
        if not np.issubdtype(v.dtype, np.complexfloating):
            v = v.astype(float)
        self.values = v

    @classmethod
    def zeros(cls, hg: HalfGrid, m: int = 1, dtype=float) -> "TentFunction":
        return cls(hg, np.zeros(hg.shape + (m,), dtype=dtype))

    @property
    def m(self) -> int:
        return self.values.shape[-1]

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.values)

    @property
    def support(self) -> np.ndarray:
        return np.any(self.values != 0, axis=-1)

    def restrict(self, region: np.ndarray) -> "TentFunction":
        return TentFunction(self.hg, self.values * np.asarray(region, bool)[..., None])

    def copy(self) -> "TentFunction":
        return TentFunction(self.hg, self.values.copy())

    def __add__(self, other: "TentFunction") -> "TentFunction":
        return TentFunction(self.hg, self.values + other.values)

    def __sub__(self, other: "TentFunction") -> "TentFunction":
        return TentFunction(self.hg, self.values - other.values)

    def __mul__(self, c) -> "TentFunction":
        return TentFunction(self.hg, self.values * c)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "TentFunction":
        return TentFunction(self.hg, self.values / c)


@dataclass
class GammaEstimate:
    value: float
    stderr: float = 0.0
    method: str = "exact"
    samples: int = 0
    seed: int | None = None

    def to_json(self) -> dict:
        return {"value": self.value, "stderr": self.stderr, "method": self.method,
                "samples": self.samples, "seed": self.seed}


def gaussian_batches(seed: int, samples: int, shape: tuple, batch: int = BATCH):
    """Yield standard Gaussian blocks ``(b, *shape)``.

    Block ``i`` is drawn from a generator keyed by ``(seed, i)``, so the stream
    is reproducible regardless of how blocks are scheduled.
    """
    done = 0
    i = 0
    while done < samples:
        b = min(batch, samples - done)
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), i])))
        yield rng.standard_normal((b,) + tuple(shape))
        done += b
        i += 1


def _check_finite(u: TentFunction):
    if not np.all(np.isfinite(u.values)):
        raise ValueError("tent function has non-finite values")


def _draw_norms(u: TentFunction, region, X: BanachSpace, seed, samples):
    """Monte-Carlo samples of ||sum_{p in R} sqrt(w_p) g_p u_p||_X."""
    region = u.support if region is None else np.asarray(region, bool)
    coeff = (np.sqrt(u.hg.gamma_weight)[..., None] * u.values)[region]  # (n, m)
    out = []
    for g in gaussian_batches(seed, samples, u.hg.shape):
        z = g[:, region] @ coeff
        out.append(X.norm(z))
    return np.concatenate(out)


def gamma_norm(u: TentFunction, region=None, X: BanachSpace | None = None, seed: int = 0,
               samples: int = DEFAULT_SAMPLES, method: str | None = None) -> GammaEstimate:
    """gamma-radonifying norm of ``u 1_R`` (``R`` defaults to the support)."""
    _check_finite(u)
    X = X or BanachSpace(u.m)
    region = u.hg.full() if region is None else np.asarray(region, bool)
    method = method or ("exact" if X.is_hilbert else "mc")
    if method == "exact":
        if not X.is_hilbert:
            raise ValueError("exact path needs a Hilbert space (q = 2)")
        s = (u.hg.gamma_weight * X.sq_norm_hilbert(u.values))[region].sum()
        return GammaEstimate(float(math.sqrt(s)), 0.0, "exact", 0, None)
    if samples < 2:
        raise ValueError("Monte Carlo needs at least two samples")
    y = _draw_norms(u, region, X, seed, samples) ** 2
    mean = float(y.mean())
    if mean == 0:
        return GammaEstimate(0.0, 0.0, "mc", samples, seed)
    se_mean = float(y.std(ddof=1) / math.sqrt(samples))
    value = math.sqrt(mean)
    return GammaEstimate(value, se_mean / (2 * value), "mc", samples, seed)


def cone_moments(u: TentFunction, X: BanachSpace | None = None, alpha: float = 1.0,
                 prefix: bool = False, seed: int = 0, samples: int = DEFAULT_SAMPLES,
                 method: str | None = None):
    """Second moments ``E||int_{Gamma_alpha(x)} u dW||^2`` for every x.

    Returns ``(mean, stderr)`` arrays of shape ``(P,)``, or ``(J, P)`` when
    ``prefix`` is set, in which case row ``j`` only integrates levels ``<= j``
    (the truncated cones used by the T^inf norm).
    """
    _check_finite(u)
    X = X or BanachSpace(u.m)
    hg = u.hg
    sp = hg.space
    method = method or ("exact" if X.is_hilbert else "mc")
    if alpha < 1:
        raise ValueError("aperture must be >= 1")
    if method == "exact":
        dens = hg.gamma_weight * X.sq_norm_hilbert(u.values)
        per_level = np.stack([sp.ball_sum(dens[j], alpha * tj) if dens[j].any()
                              else np.zeros(sp.n_points) for j, tj in enumerate(hg.t)])
        mean = np.cumsum(per_level, axis=0) if prefix else per_level.sum(axis=0)
        return mean, np.zeros_like(mean)
    if samples < 2:
        raise ValueError("Monte Carlo needs at least two samples")
    shape = hg.shape if prefix else (sp.n_points,)
    s1 = np.zeros(shape)
    s2 = np.zeros(shape)
    sw = np.sqrt(hg.gamma_weight)
    active = [j for j in range(hg.levels) if u.values[j].any()]
    for g in gaussian_batches(seed, samples, hg.shape):
        b = g.shape[0]
        z = np.zeros((sp.n_points, b, u.m), dtype=u.values.dtype)
        ys = np.zeros((hg.levels, sp.n_points, b)) if prefix else None
        last = -1
        for j in active:
            field = (sw[j] * g[:, j, :]).T[:, :, None] * u.values[j][:, None, :]
            z = z + sp.ball_sum(field, alpha * hg.t[j])
            if prefix:
                y = X.norm(z) ** 2
                ys[j:] = y
                last = j
        if prefix:
            if last < 0:
                ys[:] = 0
            s1 += ys.sum(axis=-1)
            s2 += (ys * ys).sum(axis=-1)
        else:
            y = X.norm(z) ** 2
            s1 += y.sum(axis=-1)
            s2 += (y * y).sum(axis=-1)
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean**2, 0.0) * samples / (samples - 1)
    return mean, np.sqrt(var / samples)


def moment_ratio(u: TentFunction, region, X: BanachSpace, p: float, q: float, seed: int = 0,
                 samples: int = DEFAULT_SAMPLES) -> float:
    """(E||Z||^p)^{1/p} / (E||Z||^q)^{1/q} for Z the stochastic integral of u 1_R."""
    if p < 1 or q < 1 or math.isinf(p) or math.isinf(q):
        raise ValueError("moment exponents must lie in [1, inf)")
    if p == q:
        return 1.0
    nz = _draw_norms(u, region, X, seed, samples)
    if not nz.any():
        return 1.0
    return float(np.mean(nz**p) ** (1 / p) / np.mean(nz**q) ** (1 / q))


def restriction_monotonicity_check(u: TentFunction, R1, R2, X: BanachSpace, seed: int = 0,
                                   samples: int = DEFAULT_SAMPLES):
    """Check ||u 1_R1|| <= ||u 1_R2|| + 3 (stderr1 + stderr2) for R1 inside R2.

    Returns ``(passed, margin)`` where a non-negative margin means success.
    """
    R1 = np.asarray(R1, bool)
    R2 = np.asarray(R2, bool)
    if (R1 & ~R2).any():
        raise ValueError("R1 is not contained in R2")
    a = gamma_norm(u, R1, X, seed, samples)
    b = gamma_norm(u, R2, X, seed, samples)
    margin = b.value + 3 * (a.stderr + b.stderr) - a.value
    return margin >= 0, margin


@dataclass
class TypeProbe:
    constant: float
    stderr: float
    ratios: list = field(default_factory=list)


def type_constant_probe(X: BanachSpace, r: float, trials: int = 32, seed: int = 0,
                        max_terms: int = 8, samples: int = 1024) -> TypeProbe:
    """Largest observed (E||sum_k g_k xi_k||^2)^{1/2} / (sum_k ||xi_k||^r)^{1/r}.

    Gaussian weights stand in for Rademacher signs.  Each trial draws a random
    family ``xi_1..xi_K`` (these play the role of integrals of disjointly
    supported integrands, which are independent Gaussian vectors).
    """
    if not 1 < r <= 2:
        raise ValueError("type exponent must lie in (1, 2]")
    rng = np.random.default_rng(seed)
    ratios, errs = [], []
    for i in range(trials):
        k = int(rng.integers(1, max_terms + 1))
        xi = rng.standard_normal((k, X.m)) * rng.exponential(1.0, (k, 1))
        denom = float((X.norm(xi) ** r).sum() ** (1 / r))
        if X.is_hilbert:
            ratios.append(math.sqrt(float(X.sq_norm_hilbert(xi).sum())) / denom)
            errs.append(0.0)
            continue
        y = np.concatenate([X.norm(g @ xi) ** 2 for g in gaussian_batches(seed + 7919 * (i + 1), samples, (k,))])
        mean = float(y.mean())
        ratios.append(math.sqrt(mean) / denom)
        errs.append(float(y.std(ddof=1) / math.sqrt(samples)) / (2 * math.sqrt(mean) * denom))
    best = int(np.argmax(ratios))
    return TypeProbe(ratios[best], errs[best], ratios)
