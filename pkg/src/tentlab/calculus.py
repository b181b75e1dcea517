"""Spectral model of a non-negative self-adjoint operator L and its functional calculus.

Every operator used here is a function of ``L``, so each is applied as a
symbol multiplication in the eigenbasis: the discrete Fourier transform on
tori and a cached eigendecomposition on graphs.  Functions on the space are
arrays whose leading point axis has length ``P``; an optional trailing axis
holds the ``m`` coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .gamma import TentFunction
from .geometry import SpaceGrid
from .halfspace import HalfGrid

__all__ = [
    "OperatorL",
    "SpaceFunction",
    "HoloSymbol",
    "laplacian_matrix",
    "is_mean_zero",
    "heat",
    "q_operator",
    "pi_operator",
    "calderon_constant",
    "calderon_constant_closed",
    "functional_calculus",
    "bump_profile",
    "phi_hat0",
    "phi_symbol",
    "phi_family",
    "phi_leakage",
    "q_tilde",
    "pi_tilde",
    "mixed_constant",
    "mixed_symbol_sum",
    "offdiag_measure",
    "OffDiagFit",
    "fit_offdiag",
    "kernel_operator",
    "KernelResult",
]

MATERIALIZE_LIMIT = 16_000_000


# --------------------------------------------------------------------------- operator


def laplacian_matrix(space: SpaceGrid) -> np.ndarray:
    """Dense matrix of the standard Laplacian, assembled from its stencil.

    Torus: nearest-neighbour second differences along each axis.  Graph:
    ``(Lf)(x) = mu(x)^{-1} sum_y w_xy (f(x) - f(y))`` with ``w = 1/len^2``.
    """
    P = space.n_points
    if P > 4096:
        raise MemoryError("dense Laplacian capped at 4096 points")
    A = np.zeros((P, P))
    if space.is_torus:
        idx = np.arange(P).reshape(space.sides)
        h2 = space.cell**2
        for ax in range(space.dim):
            for shift in (1, -1):
                nb = np.roll(idx, shift, axis=ax).ravel()
                np.add.at(A, (idx.ravel(), nb), -1.0 / h2)
            A[idx.ravel(), idx.ravel()] += 2.0 / h2
        return A
    for u, v, w in space.edges:
        c = 1.0 / w**2
        A[u, u] += c
        A[v, v] += c
        A[u, v] -= c
        A[v, u] -= c
    return A / space.measure[:, None]


class OperatorL:
    """Non-negative self-adjoint operator on l^2(mu), stored in diagonal form.

    Use :meth:`laplacian` for the standard operator on a space or
    :meth:`from_matrix` for an arbitrary mu-self-adjoint matrix on a graph.
    """

    def __init__(self, space: SpaceGrid, lam: np.ndarray, basis: np.ndarray | None = None,
                 matrix: np.ndarray | None = None):
        self.space = space
        self.lam = np.asarray(lam, float)
        self.basis = basis
        self._matrix = matrix
        self._sqrt_mu = np.sqrt(space.measure)

    @classmethod
    def laplacian(cls, space: SpaceGrid) -> "OperatorL":
        if space.is_torus:
            h2 = space.cell**2
            lam = np.zeros(space.sides)
            for ax, s in enumerate(space.sides):
                xi = np.arange(s)
                shape = [1] * space.dim
                shape[ax] = s
                lam = lam + ((2 - 2 * np.cos(2 * np.pi * xi / s)) / h2).reshape(shape)
            return cls(space, lam.ravel())
        return cls.from_matrix(space, laplacian_matrix(space))

    @classmethod
    def from_matrix(cls, space: SpaceGrid, A) -> "OperatorL":
        A = np.asarray(A, float)
        P = space.n_points
        if A.shape != (P, P):
            raise ValueError("matrix shape does not match the space")
        if P > 4096:
            raise MemoryError("dense eigendecomposition capped at 4096 points")
        s = np.sqrt(space.measure)
        S = s[:, None] * A / s[None, :]
        scale = max(float(np.abs(S).max()), 1e-300)
        if np.abs(S - S.T).max() > 1e-12 * scale:
            raise ValueError("operator is not self-adjoint on l^2(mu)")
        lam, U = np.linalg.eigh(0.5 * (S + S.T))
        if lam.min() < -1e-10 * scale:
            raise ValueError("operator is not non-negative")
        lam[np.abs(lam) <= 1e-10 * scale] = 0.0
        return cls(space, lam, U, A)

    # ------------------------------------------------------------- spectrum
    @property
    def is_fourier(self) -> bool:
        return self.basis is None

    @property
    def kernel_mask(self) -> np.ndarray:
        return self.lam == 0

    @property
    def lam_max(self) -> float:
        return float(self.lam.max())

    @property
    def lam_min_pos(self) -> float:
        pos = self.lam[self.lam > 0]
        if pos.size == 0:
            raise ValueError("operator has no positive spectrum")
        return float(pos.min())

    def auto_grid(self, rho: float = 2 ** 0.125, lo: float = 0.1, hi: float = 3.0) -> HalfGrid:
        """Half-grid covering ``[lo/sqrt(lam_max), hi/sqrt(lam_min+)]``."""
        return HalfGrid.spectral(self.space, self.lam_min_pos, self.lam_max, rho, lo, hi)

    def dense(self) -> np.ndarray:
        """Dense matrix of L (the stencil oracle on tori)."""
        return laplacian_matrix(self.space) if self._matrix is None else self._matrix

    def to_json(self) -> dict:
        if self.is_fourier:
            return {"kind": "laplacian", "h": self.space.cell, "sides": list(self.space.sides)}
        return {"kind": "graph", "vertices": self.space.n_points}

    # ------------------------------------------------------------ transforms
    def forward(self, f: np.ndarray) -> np.ndarray:
        """Spectral coefficients of ``f`` with shape ``(..., P, m)``."""
        sp = self.space
        if self.is_fourier:
            lead = f.shape[:-2]
            g = f.reshape(lead + tuple(sp.sides) + (f.shape[-1],))
            axes = tuple(range(len(lead), len(lead) + sp.dim))
            return np.fft.fftn(g, axes=axes).reshape(f.shape)
        return np.einsum("pk,...pm->...km", self.basis, self._sqrt_mu[:, None] * f)

    def inverse(self, c: np.ndarray, real: bool) -> np.ndarray:
        sp = self.space
        if self.is_fourier:
            lead = c.shape[:-2]
            g = c.reshape(lead + tuple(sp.sides) + (c.shape[-1],))
            axes = tuple(range(len(lead), len(lead) + sp.dim))
            out = np.fft.ifftn(g, axes=axes).reshape(c.shape)
            return out.real if real else out
        out = np.einsum("pk,...km->...pm", self.basis, c) / self._sqrt_mu[:, None]
        return out.real if real else out

    def apply_symbol(self, symbol, f) -> np.ndarray:
        """Multiply ``f`` by ``symbol(L)``; ``symbol`` has shape ``(P,)`` or ``(J, P)``."""
        arr, squeeze = _as_points(self.space, f)
        symbol = np.asarray(symbol)
        real = not (np.iscomplexobj(arr) or np.iscomplexobj(symbol))
        out = self.inverse(symbol[..., None] * self.forward(arr), real)
        return out[..., 0] if squeeze else out


@dataclass
class SpaceFunction:
    """Values on the points of a space, shape ``(P,)`` or ``(P, m)``."""

    space: SpaceGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape[0] != self.space.n_points:
            raise ValueError("values do not match the number of points")

    @property
    def mean(self) -> np.ndarray:
        return np.tensordot(self.space.measure, self.values, axes=(0, 0)) / self.space.total_measure

    @property
    def mean_zero(self) -> bool:
        return is_mean_zero(self.space, self.values)


def _as_points(space: SpaceGrid, f):
    if isinstance(f, SpaceFunction):
        f = f.values
    arr = np.asarray(f)
    if not (np.iscomplexobj(arr)):
        arr = arr.astype(float)
    if arr.ndim == 1:
        if arr.shape[0] != space.n_points:
            raise ValueError("function does not match the number of points")
        return arr[:, None], True
    if arr.shape[-2] != space.n_points:
        raise ValueError("function does not match the number of points")
    return arr, False


def is_mean_zero(space: SpaceGrid, f, tol: float = 1e-10) -> bool:
    arr, _ = _as_points(space, f)
    s = np.abs(np.tensordot(space.measure, arr, axes=(0, -2)))
    scale = np.tensordot(space.measure, np.abs(arr), axes=(0, -2))
    return bool(np.all(s <= tol * np.maximum(scale, 1e-300)))


def _require_mean_zero(space: SpaceGrid, f):
    if not is_mean_zero(space, f):
        raise ValueError("function must have zero mean (lie in the closed range of L)")


# --------------------------------------------------------------------------- symbols


@dataclass
class HoloSymbol:
    """Bounded holomorphic function on a sector, evaluated on the positive spectrum."""

    name: str
    fn: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    params: dict = field(default_factory=dict)
    bound: float = 1.0

    def __call__(self, lam):
        return self.fn(np.asarray(lam, float))

    def sup_norm(self, L: OperatorL) -> float:
        """max |phi| over the positive spectrum of L."""
        return float(np.abs(self(L.lam[L.lam > 0])).max())

    @classmethod
    def one(cls) -> "HoloSymbol":
        return cls("one", lambda z: np.ones_like(z))

    @classmethod
    def heat(cls, t: float) -> "HoloSymbol":
        return cls("heat", lambda z: np.exp(-t * z), {"t": t})

    @classmethod
    def poisson(cls, s: float) -> "HoloSymbol":
        return cls("poisson", lambda z: np.exp(-s * np.sqrt(z)), {"s": s})

    @classmethod
    def imaginary_power(cls, s: float) -> "HoloSymbol":
        return cls("imaginary_power", lambda z: np.exp(1j * s * np.log(z)), {"s": s})

    @classmethod
    def mexican(cls, N: int) -> "HoloSymbol":
        return cls("mexican", lambda z: z**N * np.exp(-z), {"N": N}, float(N**N * math.exp(-N)))

    @classmethod
    def preset(cls, name: str, **params) -> "HoloSymbol":
        makers = {"one": cls.one, "heat": cls.heat, "poisson": cls.poisson,
                  "imaginary_power": cls.imaginary_power, "mexican": cls.mexican}
        if name not in makers:
            raise ValueError(f"unknown symbol {name!r}")
        return makers[name](**params)

    def to_json(self) -> dict:
        return {"name": self.name, **self.params}


def _range_symbol(L: OperatorL, values: np.ndarray) -> np.ndarray:
    """Zero a symbol on the kernel of L (it acts on the closed range only)."""
    out = np.array(values, dtype=np.result_type(values, float))
    out[..., L.kernel_mask] = 0
    return out


# --------------------------------------------------------------------------- heat, Q, pi


def heat(L: OperatorL, t: float, f) -> np.ndarray:
    """e^{-tL} f."""
    if t < 0:
        raise ValueError("heat time must be non-negative")
    if t == 0:
        arr, squeeze = _as_points(L.space, f)
        return (arr[..., 0] if squeeze else arr).copy()
    return L.apply_symbol(np.exp(-t * L.lam), f)


def _profile_symbols(L: OperatorL, hg: HalfGrid, N: int) -> np.ndarray:
    """(t_j^2 lam)^N e^{-t_j^2 lam}, shape (J, P)."""
    x = hg.t[:, None] ** 2 * L.lam[None, :]
    return x**N * np.exp(-x)


def _level_map(L: OperatorL, symbols: np.ndarray, f) -> np.ndarray:
    arr, _ = _as_points(L.space, f)
    c = L.forward(arr)
    real = not (np.iscomplexobj(arr) or np.iscomplexobj(symbols))
    return L.inverse(symbols[..., None] * c[None], real)


def _level_sum(L: OperatorL, symbols: np.ndarray, u: TentFunction) -> np.ndarray:
    c = L.forward(u.values)
    real = not (u.is_complex or np.iscomplexobj(symbols))
    total = (u.hg.log_step * symbols[..., None] * c).sum(axis=0)
    return L.inverse(total, real)


def q_operator(L: OperatorL, N: int, f, hg: HalfGrid | None = None) -> TentFunction:
    """Q_N f(y, t_j) = (t_j^2 L)^N e^{-t_j^2 L} f(y)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    _require_mean_zero(L.space, f)
    hg = hg or L.auto_grid()
    return TentFunction(hg, _level_map(L, _profile_symbols(L, hg, N), f))


def pi_operator(L: OperatorL, N: int, u: TentFunction) -> np.ndarray:
    """pi_N u = sum_j log(rho) (t_j^2 L)^N e^{-t_j^2 L} u(., t_j); returns shape (P, m)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    return _level_sum(L, _profile_symbols(L, u.hg, N), u)


def calderon_constant(N: int) -> float:
    """1 / int_0^inf (t^2)^{2N} e^{-2 t^2} dt/t by adaptive quadrature.

    With ``v = t^2`` the measure ``dt/t`` becomes ``dv/(2v)``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    val, _ = integrate.quad(lambda v: 0.5 * v ** (2 * N - 1) * math.exp(-2 * v), 0, math.inf,
                            epsabs=0, epsrel=1e-13, limit=200)
    return 1.0 / val


def calderon_constant_closed(N: int) -> float:
    return 2.0 ** (2 * N + 1) / special.gamma(2 * N)


def functional_calculus(L: OperatorL, phi: HoloSymbol, f) -> np.ndarray:
    """phi(L) f on mean-zero f."""
    _require_mean_zero(L.space, f)
    if phi.name == "one":
        arr, squeeze = _as_points(L.space, f)
        return (arr[..., 0] if squeeze else arr).copy()
    sym = np.zeros(L.lam.shape, dtype=complex if phi.name == "imaginary_power" else float)
    pos = ~L.kernel_mask
    sym[pos] = phi(L.lam[pos])
    return L.apply_symbol(sym, f)


# --------------------------------------------------------------------------- finite propagation


def bump_profile(s) -> np.ndarray:
    """Smooth even bump exp(-1/(1 - s^2)) supported in [-1, 1]."""
    s = np.asarray(s, float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(512)


def phi_hat0(xi) -> np.ndarray:
    """Cosine transform int phi_0(s) cos(s xi) ds of the bump, by Gauss-Legendre.

    Repeated arguments are evaluated once.
    """
    xi = np.asarray(xi, float)
    uniq, inv = np.unique(xi, return_inverse=True)
    prof = _GL_WEIGHTS * bump_profile(_GL_NODES)
    vals = np.empty(uniq.size)
    for i in range(0, uniq.size, 2048):
        chunk = uniq[i:i + 2048]
        vals[i:i + 2048] = np.cos(np.outer(chunk, _GL_NODES)) @ prof
    return vals[inv].reshape(xi.shape)


def _lattice_coefficients(t: float, h: float) -> np.ndarray:
    """Chebyshev weights c_0..c_K (c_k for |k| h < t), summing over k in Z to phi_hat0(0)."""
    K = 0
    while (K + 1) * h < t:
        K += 1
    k = np.arange(K + 1)
    w = bump_profile(k * h / t)
    w[0] = bump_profile(0.0) if K == 0 else w[0]
    total = w[0] + 2 * w[1:].sum()
    return w * float(phi_hat0(0.0)) / total


def phi_symbol(L: OperatorL, t, propagation: str = "auto") -> np.ndarray:
    """Symbol of Phi_t on the spectrum, shape ``(P,)`` or ``(J, P)`` for an array of t.

    ``spectral``: phi_hat0(t sqrt(lam)).  ``lattice`` (tori): the Chebyshev sum
    ``sum_{|k| h < t} c_k T_|k|(I - h^2 L / (2d))``, whose kernel is supported
    in the open ball of radius t because each Chebyshev term moves mass by
    exactly ``|k|`` cells.
    """
    prop = _propagation(L, propagation)
    ts = np.atleast_1d(np.asarray(t, float))
    if np.any(ts <= 0):
        raise ValueError("t must be positive")
    if prop == "spectral":
        out = phi_hat0(ts[:, None] * np.sqrt(L.lam)[None, :])
    else:
        sp = L.space
        h = sp.cell
        theta = np.arccos(np.clip(1 - h**2 * L.lam / (2 * sp.dim), -1.0, 1.0))
        out = np.empty((ts.size, L.lam.size))
        for j, tj in enumerate(ts):
            c = _lattice_coefficients(tj, h)
            k = np.arange(c.size)
            out[j] = c[0] + 2 * (c[1:, None] * np.cos(k[1:, None] * theta[None, :])).sum(axis=0)
    return out[0] if np.ndim(t) == 0 else out


def _propagation(L: OperatorL, propagation: str) -> str:
    if propagation == "auto":
        return "lattice" if L.is_fourier else "spectral"
    if propagation not in ("spectral", "lattice"):
        raise ValueError("propagation must be 'spectral', 'lattice' or 'auto'")
    if propagation == "lattice" and not L.is_fourier:
        raise ValueError("lattice propagation needs a torus")
    return propagation


def phi_family(L: OperatorL, t: float, f, propagation: str = "auto") -> np.ndarray:
    """Phi_t f."""
    return L.apply_symbol(phi_symbol(L, t, propagation), f)


def phi_leakage(L: OperatorL, t: float, x: int = 0, propagation: str = "auto") -> float:
    """Mass of |Phi_t delta_x| outside B(x, t) relative to its total mass."""
    delta = np.zeros(L.space.n_points)
    delta[x] = 1.0
    g = np.abs(phi_family(L, t, delta, propagation)) * L.space.measure
    inside = L.space.ball_mask(x, t)
    return float(g[~inside].sum() / g.sum())


def q_tilde(L: OperatorL, N: int, f, hg: HalfGrid | None = None,
            propagation: str = "auto") -> TentFunction:
    """(t_j^2 L)^N Phi_{t_j} f."""
    if N < 1:
        raise ValueError("N must be >= 1")
    _require_mean_zero(L.space, f)
    hg = hg or L.auto_grid()
    sym = (hg.t[:, None] ** 2 * L.lam[None, :]) ** N * phi_symbol(L, hg.t, propagation)
    return TentFunction(hg, _level_map(L, sym, f))


def pi_tilde(L: OperatorL, N: int, u: TentFunction, propagation: str = "auto",
             levels: np.ndarray | None = None) -> np.ndarray:
    """sum_j log(rho) (t_j^2 L)^N Phi_{t_j} u(., t_j), optionally over a subset of levels."""
    if N < 1:
        raise ValueError("N must be >= 1")
    hg = u.hg
    sym = (hg.t[:, None] ** 2 * L.lam[None, :]) ** N * phi_symbol(L, hg.t, propagation)
    if levels is not None:
        sym = sym * np.asarray(levels, bool)[:, None]
    return _level_sum(L, sym, u)


def mixed_constant(power: int) -> float:
    """1 / int_0^inf v^power phi_hat0(sqrt v) e^{-v} dv/(2v).

    For ``f = c pi~_{N'} Q_N f`` use ``power = N + N'``.
    """
    if power < 1:
        raise ValueError("power must be >= 1")
    val, _ = integrate.quad(lambda v: 0.5 * v ** (power - 1) * float(phi_hat0(math.sqrt(v))) * math.exp(-v),
                            0, math.inf, epsabs=0, epsrel=1e-12, limit=400)
    return 1.0 / val


def mixed_symbol_sum(L: OperatorL, hg: HalfGrid, N: int, N2: int,
                     propagation: str = "auto") -> np.ndarray:
    """Discrete symbol of pi~_{N2} Q_N: sum_j log(rho) (t_j^2 lam)^{N+N2} Phi_{t_j}(lam) e^{-t_j^2 lam}."""
    x = hg.t[:, None] ** 2 * L.lam[None, :]
    terms = x ** (N + N2) * phi_symbol(L, hg.t, propagation) * np.exp(-x)
    return hg.log_step * terms.sum(axis=0)


# --------------------------------------------------------------------------- off-diagonal


def _family_symbol(L: OperatorL, family: str, t: float, k: int, phi: HoloSymbol | None,
                   propagation: str) -> np.ndarray:
    x = t**2 * L.lam
    if family == "heat_power":
        return x**k * np.exp(-x)
    if family == "phi_calculus":
        phi = phi or HoloSymbol.imaginary_power(1.0)
        vals = np.zeros(L.lam.shape, dtype=complex if phi.name == "imaginary_power" else float)
        pos = ~L.kernel_mask
        vals[pos] = phi(L.lam[pos]) * x[pos] ** k * np.exp(-x[pos])
        return vals
    if family == "phi_family":
        return phi_symbol(L, t, propagation)
    raise ValueError(f"unknown family {family!r}")


def offdiag_measure(L: OperatorL, family: str, E, E2, t: float, k: int = 0,
                    phi: HoloSymbol | None = None, propagation: str = "auto") -> float:
    """||1_{E'} T_t 1_E|| on l^2(mu), by materializing the columns of 1_E."""
    sp = L.space
    E = np.asarray(E, bool)
    E2 = np.asarray(E2, bool)
    if not E.any() or not E2.any():
        raise ValueError("E and E' must be non-empty")
    cols = np.flatnonzero(E)
    if sp.n_points * cols.size > MATERIALIZE_LIMIT:
        raise MemoryError("grid too large to materialize the compressed operator")
    basis = np.zeros((sp.n_points, cols.size))
    basis[cols, np.arange(cols.size)] = 1.0
    A = L.apply_symbol(_family_symbol(L, family, t, k, phi, propagation), basis)[E2]
    mu = sp.measure
    W = np.sqrt(mu[E2])[:, None] * A / np.sqrt(mu[cols])[None, :]
    return float(np.linalg.norm(W, 2))


@dataclass
class OffDiagFit:
    kind: str
    slope: float
    intercept: float
    r2: float
    points: int

    @property
    def exponent(self) -> float:
        """Decay exponent k in (1 + d^2/t^2)^{-k} (polynomial fits)."""
        return -self.slope


def fit_offdiag(d, t, norms, kind: str = "exponential", floor: float = 1e-12) -> OffDiagFit:
    """Regress log ||.|| on d^2/t^2 (exponential) or log(1 + d^2/t^2) (polynomial).

    Norms below ``floor`` times the largest are dropped as round-off.
    """
    d = np.asarray(d, float)
    t = np.asarray(t, float)
    y = np.asarray(norms, float)
    keep = np.isfinite(y) & (y > floor * y.max())
    ratio = (d / t) ** 2
    if kind == "exponential":
        x = ratio
    elif kind == "polynomial":
        x = np.log1p(ratio)
    else:
        raise ValueError("kind must be 'exponential' or 'polynomial'")
    x, y = x[keep], np.log(y[keep])
    if x.size < 3 or np.ptp(x) == 0:
        raise ValueError("not enough distinct points to fit")
    res = stats.linregress(x, y)
    return OffDiagFit(kind, float(res.slope), float(res.intercept), float(res.rvalue**2), int(x.size))


# --------------------------------------------------------------------------- kernel operators


@dataclass
class KernelResult:
    S: TentFunction
    S0: TentFunction | None = None
    S_inf: TentFunction | None = None

    def split_defect(self) -> float:
        """max |S0 + S_inf - S|."""
        if self.S0 is None:
            return 0.0
        return float(np.abs(self.S0.values + self.S_inf.values - self.S.values).max())


def kernel_operator(L: OperatorL, u: TentFunction, preset: str = "qpi", N: int = 1,
                    N2: int | None = None, phi: HoloSymbol | None = None,
                    split: bool = False) -> KernelResult:
    """Su(., t_j) = sum_i log(rho) K(t_j, s_i) u(., s_i) on the ladder of ``u``.

    Presets:

    ``delta``
        K(t_j, s_i) = Id / log(rho) when i = j, so S is the identity.
    ``qpi``
        c(N) (t^2 L)^N e^{-t^2 L} (s^2 L)^N e^{-s^2 L}, the kernel of c Q_N pi_N.
    ``phi``
        c(N2) (t^2 L)^N e^{-t^2 L} phi(L) (s^2 L)^{N2} e^{-s^2 L}.

    With ``split`` the parts over ``s_i < t_j`` and ``s_i >= t_j`` are returned too.
    """
    hg = u.hg
    if preset == "delta":
        S = TentFunction(hg, hg.log_step * (1.0 / hg.log_step) * u.values)
        if not split:
            return KernelResult(S)
        return KernelResult(S, TentFunction(hg, np.zeros_like(S.values)), S.copy())
    if preset not in ("qpi", "phi"):
        raise ValueError(f"unknown kernel preset {preset!r}")
    N2 = N if N2 is None else N2
    if preset == "qpi":
        N2 = N
    a = _profile_symbols(L, hg, N)
    b = hg.log_step * _profile_symbols(L, hg, N2)
    outer = calderon_constant(N2) * np.ones(L.lam.shape)
    if preset == "phi":
        phi = phi or HoloSymbol.imaginary_power(1.0)
        outer = outer * _range_symbol(L, phi(np.where(L.kernel_mask, 1.0, L.lam)))
    c = L.forward(u.values)
    weighted = b[..., None] * c
    real = not (u.is_complex or np.iscomplexobj(outer))
    total = weighted.sum(axis=0)
    S = TentFunction(hg, L.inverse(a[..., None] * (outer[:, None] * total)[None], real))
    if not split:
        return KernelResult(S)
    before = np.concatenate([np.zeros_like(weighted[:1]), np.cumsum(weighted[:-1], axis=0)])  # i < j
    after = np.cumsum(weighted[::-1], axis=0)[::-1]  # sum over i >= j
    S0 = TentFunction(hg, L.inverse(a[..., None] * outer[None, :, None] * before, real))
    Si = TentFunction(hg, L.inverse(a[..., None] * outer[None, :, None] * after, real))
    return KernelResult(S, S0, Si)
