"""The stationary contour functional F = (F1, F2) and its Gateaux derivative.

With outer boundary U = 1 + R and inner boundary u = b + r (radial graphs over
the circle), the functional is

    F1 = T1(U) + T2(u, U),        F2 = -T2(U, u) - T1(u),

where T1 is the singular self-interaction of a curve and T2 the smooth
interaction between the two curves.  Everything is evaluated on truncated
m-fold cosine series; values at shifted points x - y are obtained from the
series itself, never by interpolation.

Quadrature
----------
For T1 the integrand is rewritten with divided differences
dd(v)(x, y) = (v(x) - v(x-y)) / (2 sin(y/2)), which are computed exactly from
the Fourier series.  The kernel then factors as (2 sin(y/2))^(1-alpha) times a
function that is analytic on [0, 2pi], so Gauss-Jacobi nodes with weight
(1 - t^2)^(1-alpha) integrate it spectrally for every alpha in (0, 2).
T2 has a smooth periodic integrand and uses the trapezoid rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, roots_legendre

from .errors import DomainError, PreconditionError
from .specfun import c_alpha

__all__ = [
    "FourierCosine",
    "PatchState",
    "SineResult",
    "QuadratureGrid",
    "eval_T1",
    "eval_T2",
    "eval_F",
    "eval_DF",
    "eval_dF_db",
    "dF_db_direct",
    "normal_velocity",
    "default_grid",
    "refine_grid",
    "adaptive_grid",
    "kernel_cosine_moment_quadrature",
    "kernel_sine_moment_quadrature",
]

# Relative to the squared radius scale, so tiny patches near b = 0 stay admissible.
DEGENERACY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FourierCosine:
    """f(x) = mean + sum_{j=1..J} coeffs[j-1] cos(j m x).

    ``mean`` is zero for boundary perturbations; it is used internally to
    represent full radii such as 1 + R.
    """

    m_fold: int
    coeffs: np.ndarray
    mean: float = 0.0

    def __post_init__(self) -> None:
        if self.m_fold < 1:
            raise PreconditionError("m_fold must be a positive integer")
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float).reshape(-1))

    @classmethod
    def zeros(cls, m_fold: int, J: int) -> "FourierCosine":
        return cls(m_fold, np.zeros(J))

    @classmethod
    def mode(cls, m_fold: int, J: int, j: int, amplitude: float = 1.0) -> "FourierCosine":
        c = np.zeros(J)
        c[j - 1] = amplitude
        return cls(m_fold, c)

    @property
    def J(self) -> int:
        return len(self.coeffs)

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.m_fold * np.arange(1, self.J + 1, dtype=float)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.mean + np.cos(np.multiply.outer(x, self.wavenumbers)) @ self.coeffs

    def derivative(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        k = self.wavenumbers
        return -np.sin(np.multiply.outer(x, k)) @ (self.coeffs * k)

    def sup_bound(self) -> float:
        """Upper bound for sup |f - mean|."""
        return float(np.sum(np.abs(self.coeffs)))

    def tail(self) -> float:
        return abs(float(self.coeffs[-1])) if self.J else 0.0

    def shifted(self, mean: float) -> "FourierCosine":
        return FourierCosine(self.m_fold, self.coeffs, mean)

    def __add__(self, other: "FourierCosine") -> "FourierCosine":
        if other.m_fold != self.m_fold or other.J != self.J:
            raise PreconditionError("cannot add series from different classes")
        return FourierCosine(self.m_fold, self.coeffs + other.coeffs, self.mean + other.mean)

    def scaled(self, s: float) -> "FourierCosine":
        return FourierCosine(self.m_fold, s * self.coeffs, s * self.mean)


@dataclass(frozen=True)
class PatchState:
    """Annular patch candidate: outer radius 1 + R(x), inner radius b + r(x)."""

    b: float
    R_pert: FourierCosine
    r_pert: FourierCosine
    alpha: float

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 2.0):
            raise PreconditionError("alpha must lie in (0, 2)")
        if not (0.0 < self.b < 1.0):
            raise DomainError(f"inner radius b={self.b} outside (0, 1)")

    @classmethod
    def annulus(cls, b: float, alpha: float, m_fold: int = 1, J: int = 1) -> "PatchState":
        z = FourierCosine.zeros(m_fold, J)
        return cls(b, z, z, alpha)

    @property
    def m_fold(self) -> int:
        return self.R_pert.m_fold

    @property
    def outer(self) -> FourierCosine:
        return self.R_pert.shifted(1.0)

    @property
    def inner(self) -> FourierCosine:
        return self.r_pert.shifted(self.b)

    def check_admissible(self, n_probe: int = 512) -> None:
        x = np.linspace(0.0, 2 * np.pi, n_probe, endpoint=False)
        outer_min = float(np.min(self.outer(x)))
        inner = self.inner(x)
        if not (outer_min > float(np.max(inner)) and float(np.min(inner)) > 0.0):
            raise DomainError("inadmissible geometry: curves touch or the inner curve leaves the disk")

    def is_small(self) -> bool:
        return self.R_pert.sup_bound() + self.r_pert.sup_bound() < 0.5 * (1.0 - self.b)

    def with_b(self, b: float) -> "PatchState":
        return replace(self, b=b)


@dataclass(frozen=True)
class SineResult:
    """Odd m-fold output sum_j coeffs[j-1] sin(j m x), with diagnostics of the projection."""

    m_fold: int
    coeffs: np.ndarray
    sup_residual: float
    cos_content: float
    leakage: float = float("nan")
    values: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class QuadratureGrid:
    """Collocation and quadrature resolution.

    n_t: collocation points per period 2pi/m (N_x = n_t * m on the full circle);
    n_sing: Gauss-Jacobi nodes for the self-interaction integrals;
    n_smooth: trapezoid nodes for the two-curve integrals;
    full_circle: collocate on [0, 2pi) instead of one period (needed for
    leakage diagnostics outside the m-fold class).
    """

    n_t: int
    n_sing: int
    n_smooth: int
    full_circle: bool = False

    def x_nodes(self, m: int) -> np.ndarray:
        if self.full_circle:
            n = self.n_t * m
            return 2 * np.pi * np.arange(n) / n
        return 2 * np.pi * np.arange(self.n_t) / (self.n_t * m)


def default_grid(J: int, m: int, b: float, full_circle: bool = False) -> QuadratureGrid:
    """Production resolution for J modes of class m around inner radius b."""
    kmax = J * m
    n_t = 8 * J
    n_sing = int(2 ** math.ceil(math.log2(max(96, 2 * kmax + 64))))
    n_smooth = int(2 * kmax + 48 + math.ceil(40.0 / -math.log(max(b, 1e-3))))
    return QuadratureGrid(n_t, n_sing, n_smooth, full_circle)


def refine_grid(grid: QuadratureGrid, factor: int = 2) -> QuadratureGrid:
    return QuadratureGrid(grid.n_t * factor, grid.n_sing * factor, grid.n_smooth * factor, grid.full_circle)


def adaptive_grid(
    evaluate: Callable[[QuadratureGrid], np.ndarray],
    start: QuadratureGrid,
    quad_tol: float,
    depth: int,
) -> Tuple[QuadratureGrid, float]:
    """Double the quadrature nodes until two successive evaluations agree to quad_tol.

    Returns the accepted grid and the last observed change.  ``evaluate`` maps
    a grid to a vector of quantities (for example sine coefficients); the
    collocation size n_t is kept fixed.
    """
    grid = start
    prev = evaluate(grid)
    change = math.inf
    for _ in range(depth):
        nxt = QuadratureGrid(grid.n_t, grid.n_sing * 2, grid.n_smooth * 2, grid.full_circle)
        cur = evaluate(nxt)
        change = float(np.max(np.abs(cur - prev)) / max(1.0, float(np.max(np.abs(cur)))))
        grid, prev = nxt, cur
        if change <= quad_tol:
            break
    return grid, change


# ---------------------------------------------------------------------------
# Quadrature rules
# ---------------------------------------------------------------------------

_SINGLE_PANEL_MAX = 128


def _gauss_jacobi(n: int, a: float, b: float) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi rule for (1 - t)^a (1 + t)^b on [-1, 1] by Golub-Welsch.

    The library Gauss-Jacobi routine loses up to 1e-8 relative accuracy in its
    weights for exponents near -1; the eigenvector route keeps every moment at
    rounding level.
    """
    k = np.arange(n, dtype=float)
    s = 2.0 * k + a + b
    with np.errstate(divide="ignore", invalid="ignore"):
        diag = (b * b - a * a) / (s * (s + 2.0))
    diag[0] = (b - a) / (a + b + 2.0)
    kk, ss = k[1:], s[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        off2 = 4.0 * kk * (kk + a) * (kk + b) * (kk + a + b) / (ss ** 2 * (ss + 1.0) * (ss - 1.0))
    if n > 1:
        # first entry with the removable factor (1 + a + b) cancelled
        off2[0] = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b) ** 2 * (3.0 + a + b))
    t, V = eigh_tridiagonal(diag, np.sqrt(off2))
    mu0 = math.exp((a + b + 1.0) * math.log(2.0) + gammaln(a + 1.0) + gammaln(b + 1.0) - gammaln(a + b + 2.0))
    return t, mu0 * V[0] ** 2


@lru_cache(maxsize=64)
def _singular_rule(n: int, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes y in (0, 2pi) and weights W with sum W g(y) ~ int (2 sin(y/2))^(1-alpha) g(y) dy.

    Up to 128 nodes a single Gauss-Jacobi rule on t = y/pi - 1 is used.  Larger
    rules are composite, which keeps the eigenvalue problems small.
    """
    e = 1.0 - alpha
    if n <= _SINGLE_PANEL_MAX:
        t, w = _gauss_jacobi(n, e, e)
        # enforce the exact reflection symmetry t -> -t of the rule
        t = 0.5 * (t - t[::-1])
        w = 0.5 * (w + w[::-1])
        # cos(pi t / 2) / (1 - t^2) written through u = 1 - |t| to avoid cancellation at the ends
        u = 1.0 - np.abs(t)
        smooth = (2.0 * np.sin(np.pi * u / 2) / (u * (2.0 - u))) ** e
        return np.pi * (1.0 + t), np.pi * w * smooth
    return _composite_singular_rule(n, e)


def _composite_singular_rule(n: int, e: float) -> Tuple[np.ndarray, np.ndarray]:
    """Equal panels on [0, pi]: Gauss-Jacobi on the panel touching y = 0, Gauss-Legendre elsewhere; mirrored."""
    panels = -(-n // (_SINGLE_PANEL_MAX // 2))
    per = max(1, n // (2 * panels))
    width = np.pi / panels
    s, wj = _gauss_jacobi(per, 0.0, e)
    y0 = 0.5 * width * (1.0 + s)
    w0 = (0.5 * width) ** (1.0 + e) * wj * (2.0 * np.sin(y0 / 2) / y0) ** e
    sl, wl = roots_legendre(per)
    ys, ws = [y0], [w0]
    for k in range(1, panels):
        yk = width * (k + 0.5 * (1.0 + sl))
        ys.append(yk)
        ws.append(0.5 * width * wl * (2.0 * np.sin(yk / 2)) ** e)
    y = np.concatenate(ys)
    w = np.concatenate(ws)
    return np.concatenate([y, 2 * np.pi - y[::-1]]), np.concatenate([w, w[::-1]])


def _smooth_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    y = 2 * np.pi * np.arange(n) / n
    return y, np.full(n, 2 * np.pi / n)


# ---------------------------------------------------------------------------
# Curve samples
# ---------------------------------------------------------------------------

@dataclass
class _Samples:
    """A curve (or direction) sampled at x, at x - y and through divided differences."""

    vx: np.ndarray
    dvx: np.ndarray
    vy: np.ndarray
    dvy: np.ndarray
    dd: Optional[np.ndarray] = None
    ddd: Optional[np.ndarray] = None


class _Basis:
    """Trigonometric matrices of a wavenumber set at the x and y nodes."""

    def __init__(self, k: np.ndarray, x: np.ndarray, y: np.ndarray, singular: bool):
        self.k = k
        kx = np.multiply.outer(x, k)
        ky = np.multiply.outer(y, k)
        self.Cx, self.Sx = np.cos(kx), np.sin(kx)
        self.Cy, self.Sy = np.cos(ky), np.sin(ky)
        if singular:
            s = np.sin(y / 2)[:, None]
            self.P = np.sin(ky / 2) ** 2 / s
            self.Q = self.Sy / (2.0 * s)
        else:
            self.P = self.Q = None

    def sample(self, f: FourierCosine) -> _Samples:
        a = f.coeffs
        ak = a * self.k
        Ca, Sa = self.Cx * a, self.Sx * a
        Cak, Sak = self.Cx * ak, self.Sx * ak
        vx = f.mean + Ca.sum(axis=1)
        dvx = -Sak.sum(axis=1)
        vy = f.mean + Ca @ self.Cy.T + Sa @ self.Sy.T
        dvy = -(Sak @ self.Cy.T - Cak @ self.Sy.T)
        dd = ddd = None
        if self.P is not None:
            dd = Ca @ self.P.T - Sa @ self.Q.T
            ddd = -(Sak @ self.P.T + Cak @ self.Q.T)
        return _Samples(vx, dvx, vy, dvy, dd, ddd)


class _Context:
    """Nodes and cached bases shared by all evaluations on one grid."""

    def __init__(self, m: int, alpha: float, grid: QuadratureGrid, x: Optional[np.ndarray] = None):
        self.m = m
        self.alpha = alpha
        self.grid = grid
        self.x = grid.x_nodes(m) if x is None else np.asarray(x, dtype=float)
        self.ys, self.ws = _singular_rule(grid.n_sing, alpha)
        self.yt, self.wt = _smooth_rule(grid.n_smooth)
        self.cos_ys = np.cos(self.ys)
        self.cos_half_ys = np.cos(self.ys / 2)
        self.cos_yt = np.cos(self.yt)
        self.sin_yt = np.sin(self.yt)
        self.c = c_alpha(alpha)
        self._bases: Dict[Tuple[int, int, bool], _Basis] = {}

    def basis(self, f: FourierCosine, singular: bool) -> _Basis:
        key = (f.m_fold, f.J, singular)
        if key not in self._bases:
            y = self.ys if singular else self.yt
            self._bases[key] = _Basis(f.wavenumbers, self.x, y, singular)
        return self._bases[key]

    def sing(self, f: FourierCosine) -> _Samples:
        return self.basis(f, True).sample(f)

    def smooth(self, f: FourierCosine) -> _Samples:
        return self.basis(f, False).sample(f)


# ---------------------------------------------------------------------------
# Integral operators
# ---------------------------------------------------------------------------

@dataclass
class _SelfTerm:
    """State-dependent pieces of T1(v) on the singular rule."""

    s: _Samples
    E: np.ndarray
    N: np.ndarray
    Epow: np.ndarray


def _self_term(ctx: _Context, v: _Samples) -> _SelfTerm:
    ux = v.vx[:, None]
    dux = v.dvx[:, None]
    E = v.dd ** 2 + ux * v.vy
    if float(np.min(E)) < DEGENERACY_TOL * float(np.max(np.abs(v.vx))) ** 2:
        raise DomainError("self-interaction denominator degenerates (curve not a graph or crosses the origin)")
    N = ctx.cos_ys * (dux * v.dd - ux * v.ddd) + ctx.cos_half_ys * (ux * v.vy + dux * v.dvy)
    return _SelfTerm(v, E, N, E ** (-ctx.alpha / 2))


def _t1_value(ctx: _Context, st: _SelfTerm) -> np.ndarray:
    return ctx.c * (st.Epow * st.N) @ ctx.ws


def _t1_derivative(ctx: _Context, st: _SelfTerm, h: _Samples) -> np.ndarray:
    v = st.s
    ux, dux = v.vx[:, None], v.dvx[:, None]
    hx, dhx = h.vx[:, None], h.dvx[:, None]
    dN = ctx.cos_ys * (dhx * v.dd + dux * h.dd - hx * v.ddd - ux * h.ddd) + ctx.cos_half_ys * (
        hx * v.vy + ux * h.vy + dhx * v.dvy + dux * h.dvy
    )
    dE = 2.0 * v.dd * h.dd + hx * v.vy + ux * h.vy
    integrand = st.Epow * (dN - (ctx.alpha / 2) * dE * st.N / st.E)
    return ctx.c * integrand @ ctx.ws


@dataclass
class _PairTerm:
    """State-dependent pieces of T2(p, q) on the trapezoid rule (p sampled at x-y, q at x)."""

    p: _Samples
    q: _Samples
    D: np.ndarray
    N: np.ndarray
    Dpow: np.ndarray


def _pair_term(ctx: _Context, p: _Samples, q: _Samples) -> _PairTerm:
    qx, dqx = q.vx[:, None], q.dvx[:, None]
    D = qx * qx + p.vy * p.vy - 2.0 * qx * p.vy * ctx.cos_yt
    if float(np.min(D)) < DEGENERACY_TOL * float(np.max(np.abs(q.vx))) ** 2:
        raise DomainError("the two boundary curves collide")
    N = ctx.cos_yt * (p.vy * dqx - p.dvy * qx) - ctx.sin_yt * (p.vy * qx + p.dvy * dqx)
    return _PairTerm(p, q, D, N, D ** (-ctx.alpha / 2))


def _t2_value(ctx: _Context, pt: _PairTerm) -> np.ndarray:
    return ctx.c * (pt.Dpow * pt.N) @ ctx.wt


def _t2_dq(ctx: _Context, pt: _PairTerm, H: _Samples) -> np.ndarray:
    """Derivative of T2(p, q) in the q slot along H."""
    p = pt.p
    qx = pt.q.vx[:, None]
    Hx, dHx = H.vx[:, None], H.dvx[:, None]
    dN = ctx.cos_yt * (p.vy * dHx - p.dvy * Hx) - ctx.sin_yt * (p.vy * Hx + p.dvy * dHx)
    dD = 2.0 * qx * Hx - 2.0 * Hx * p.vy * ctx.cos_yt
    return ctx.c * (pt.Dpow * (dN - (ctx.alpha / 2) * dD * pt.N / pt.D)) @ ctx.wt


def _t2_dp(ctx: _Context, pt: _PairTerm, h: _Samples) -> np.ndarray:
    """Derivative of T2(p, q) in the p slot along h."""
    p = pt.p
    qx, dqx = pt.q.vx[:, None], pt.q.dvx[:, None]
    dN = ctx.cos_yt * (h.vy * dqx - h.dvy * qx) - ctx.sin_yt * (h.vy * qx + h.dvy * dqx)
    dD = 2.0 * p.vy * h.vy - 2.0 * qx * h.vy * ctx.cos_yt
    return ctx.c * (pt.Dpow * (dN - (ctx.alpha / 2) * dD * pt.N / pt.D)) @ ctx.wt


# ---------------------------------------------------------------------------
# Projection onto sine series
# ---------------------------------------------------------------------------

def _project(values: np.ndarray, m: int, J: int, grid: QuadratureGrid, keep_values: bool) -> SineResult:
    n = len(values)
    G = np.fft.rfft(values) / n
    step = m if grid.full_circle else 1
    idx = step * np.arange(1, J + 1)
    sine = -2.0 * G.imag[idx]
    cos_all = np.abs(2.0 * G.real)
    cos_all[0] /= 2.0
    cos_content = float(np.max(cos_all)) if len(cos_all) else 0.0
    leakage = float("nan")
    if grid.full_circle:
        off = np.ones(len(G), dtype=bool)
        off[::m] = False
        leakage = float(np.max(np.abs(2.0 * G[off]))) if off.any() else 0.0
    return SineResult(
        m_fold=m,
        coeffs=sine,
        sup_residual=float(np.max(np.abs(values))),
        cos_content=cos_content,
        leakage=leakage,
        values=values.copy() if keep_values else None,
    )


# ---------------------------------------------------------------------------
# Public evaluators
# ---------------------------------------------------------------------------

def _check_positive(v: FourierCosine) -> None:
    if v.mean - v.sup_bound() <= 0.0:
        x = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
        if float(np.min(v(x))) <= 0.0:
            raise DomainError("radius function must be positive")


def eval_T1(u: FourierCosine, alpha: float, grid: QuadratureGrid, x: Optional[np.ndarray] = None) -> np.ndarray:
    """T1(u) at the collocation nodes of ``grid`` (or at explicit points ``x``)."""
    _check_positive(u)
    ctx = _Context(u.m_fold, alpha, grid, x)
    return _t1_value(ctx, _self_term(ctx, ctx.sing(u)))


def eval_T2(
    p: FourierCosine, q: FourierCosine, alpha: float, grid: QuadratureGrid, x: Optional[np.ndarray] = None
) -> np.ndarray:
    """T2(p, q) at the collocation nodes (p enters at x - y, q at x)."""
    ctx = _Context(q.m_fold, alpha, grid, x)
    return _t2_value(ctx, _pair_term(ctx, ctx.smooth(p), ctx.smooth(q)))


class Workspace:
    """All state-dependent arrays of F at one state; derivatives reuse them."""

    def __init__(self, state: PatchState, grid: QuadratureGrid):
        state.check_admissible()
        self.state = state
        self.grid = grid
        self.ctx = ctx = _Context(state.m_fold, state.alpha, grid)
        U, u = state.outer, state.inner
        self.outer_self = _self_term(ctx, ctx.sing(U))
        self.inner_self = _self_term(ctx, ctx.sing(u))
        Us, us = ctx.smooth(U), ctx.smooth(u)
        self.inner_on_outer = _pair_term(ctx, us, Us)  # T2(u, U)
        self.outer_on_inner = _pair_term(ctx, Us, us)  # T2(U, u)

    def values(self) -> Tuple[np.ndarray, np.ndarray]:
        ctx = self.ctx
        F1 = _t1_value(ctx, self.outer_self) + _t2_value(ctx, self.inner_on_outer)
        F2 = -_t2_value(ctx, self.outer_on_inner) - _t1_value(ctx, self.inner_self)
        return F1, F2

    def derivative_values(self, H: FourierCosine, h: FourierCosine) -> Tuple[np.ndarray, np.ndarray]:
        ctx = self.ctx
        Hs, hs = ctx.sing(H), ctx.sing(h)
        Ht, ht = ctx.smooth(H), ctx.smooth(h)
        D1 = (
            _t1_derivative(ctx, self.outer_self, Hs)
            + _t2_dq(ctx, self.inner_on_outer, Ht)
            + _t2_dp(ctx, self.inner_on_outer, ht)
        )
        D2 = (
            -_t2_dp(ctx, self.outer_on_inner, Ht)
            - _t2_dq(ctx, self.outer_on_inner, ht)
            - _t1_derivative(ctx, self.inner_self, hs)
        )
        return D1, D2

    def project(self, values: np.ndarray, J: Optional[int] = None, keep_values: bool = False) -> SineResult:
        J = self.state.R_pert.J if J is None else J
        return _project(values, self.state.m_fold, J, self.grid, keep_values)


def eval_F(
    state: PatchState, grid: QuadratureGrid, J: Optional[int] = None, keep_values: bool = False
) -> Tuple[SineResult, SineResult]:
    """Both components of F projected onto sin(j m x), j = 1..J."""
    ws = Workspace(state, grid)
    F1, F2 = ws.values()
    return ws.project(F1, J, keep_values), ws.project(F2, J, keep_values)


def eval_DF(
    state: PatchState,
    direction: Tuple[FourierCosine, FourierCosine],
    grid: QuadratureGrid,
    J: Optional[int] = None,
    keep_values: bool = False,
) -> Tuple[SineResult, SineResult]:
    """Gateaux derivative of F at ``state`` along (H, h)."""
    H, h = direction
    if not state.is_small():
        raise PreconditionError("state outside the smallness gate for the derivative formulas")
    if H.m_fold % state.m_fold or h.m_fold % state.m_fold:
        raise PreconditionError("direction must lie in the m-fold class of the state")
    ws = Workspace(state, grid)
    D1, D2 = ws.derivative_values(H, h)
    return ws.project(D1, J, keep_values), ws.project(D2, J, keep_values)


def eval_dF_db(state: PatchState, grid: QuadratureGrid, step: float = 1e-6, J: Optional[int] = None) -> Tuple[SineResult, SineResult]:
    """b-derivative of F by a Richardson-extrapolated centred difference.

    Near the ends of (0, 1) the difference becomes one-sided (second order).
    """
    b = state.b

    def F_at(bb: float) -> Tuple[np.ndarray, np.ndarray]:
        F1, F2 = eval_F(state.with_b(bb), grid, J, keep_values=True)
        return F1.values, F2.values

    if 2 * step < b < 1.0 - 2 * step:
        def central(hh: float) -> Tuple[np.ndarray, np.ndarray]:
            p1, p2 = F_at(b + hh)
            m1, m2 = F_at(b - hh)
            return (p1 - m1) / (2 * hh), (p2 - m2) / (2 * hh)

        c1, c2 = central(step)
        h1, h2 = central(step / 2)
        d1, d2 = (4 * h1 - c1) / 3, (4 * h2 - c2) / 3
    else:
        sgn = 1.0 if b <= 2 * step else -1.0
        f0 = F_at(b)
        f1 = F_at(b + sgn * step)
        f2 = F_at(b + 2 * sgn * step)
        d1 = sgn * (-3 * f0[0] + 4 * f1[0] - f2[0]) / (2 * step)
        d2 = sgn * (-3 * f0[1] + 4 * f1[1] - f2[1]) / (2 * step)
    Jout = state.R_pert.J if J is None else J
    return (
        _project(d1, state.m_fold, Jout, grid, False),
        _project(d2, state.m_fold, Jout, grid, False),
    )


def dF_db_direct(state: PatchState, grid: QuadratureGrid, J: Optional[int] = None) -> Tuple[SineResult, SineResult]:
    """b-derivative of F as the Gateaux derivative along the constant inner direction h = 1.

    F depends on b only through u = b + r, so this is exact; it serves as an
    independent check of :func:`eval_dF_db`.
    """
    zero = FourierCosine.zeros(state.m_fold, state.R_pert.J)
    one = zero.shifted(1.0)
    ws = Workspace(state, grid)
    D1, D2 = ws.derivative_values(zero, one)
    return ws.project(D1, J), ws.project(D2, J)


# ---------------------------------------------------------------------------
# Independent route: normal velocity from the vector kernel S
# ---------------------------------------------------------------------------

def _complex_modes(f: FourierCosine) -> Tuple[np.ndarray, np.ndarray]:
    """Frequencies and coefficients of f(x) e^{ix} as a sum of exponentials."""
    k = f.wavenumbers
    freqs = np.concatenate(([1.0], k + 1.0, 1.0 - k))
    coefs = np.concatenate(([f.mean], f.coeffs / 2, f.coeffs / 2)).astype(complex)
    return freqs, coefs


def normal_velocity(state: PatchState, grid: QuadratureGrid, x: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Normal velocities of both boundaries computed from the vector kernel form.

    With Z = (1+R) e^{ix}, z = (b+r) e^{ix} and
    S(p, q)(x) = c_alpha int (p'(x-y) - q'(x)) / |p(x-y) - q(x)|^alpha dy,
    returns ((-S(Z,Z) + S(z,Z)) . dZ^perp, (-S(Z,z) + S(z,z)) . dz^perp).  This
    uses complex arithmetic and no factored radial form, so it is independent
    of the evaluators above.
    """
    al = state.alpha
    c = c_alpha(al)
    xs = grid.x_nodes(state.m_fold) if x is None else np.asarray(x, dtype=float)
    ys, ws = _singular_rule(grid.n_sing, al)
    yt, wt = _smooth_rule(grid.n_smooth)

    curves = []
    for f in (state.outer, state.inner):
        fr, co = _complex_modes(f)
        Ex = np.exp(1j * np.multiply.outer(xs, fr))
        pos = Ex @ co
        vel = Ex @ (1j * fr * co)
        curves.append((fr, co, Ex, pos, vel))

    def self_S(curve) -> np.ndarray:
        fr, co, Ex, pos, vel = curve
        half = np.sin(ys / 2)[:, None]
        kern = np.exp(-1j * np.multiply.outer(ys, fr) / 2) * np.sin(np.multiply.outer(ys, fr) / 2) / half
        dd = 1j * (Ex * co) @ kern.T
        ddv = 1j * (Ex * (1j * fr * co)) @ kern.T
        return c * (-ddv / np.abs(dd) ** al) @ ws

    def cross_S(src, dst) -> np.ndarray:
        fr, co, Ex, _, _ = src
        back = np.exp(-1j * np.multiply.outer(yt, fr)).T
        p_y = (Ex * co) @ back
        dp_y = (Ex * (1j * fr * co)) @ back
        q_x, dq_x = dst[3][:, None], dst[4][:, None]
        return c * ((dp_y - dq_x) / np.abs(p_y - q_x) ** al) @ wt

    outer, inner = curves

    def dot_perp(v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.imag(np.conj(w) * v)

    n1 = dot_perp(-self_S(outer) + cross_S(inner, outer), outer[4])
    n2 = dot_perp(-cross_S(outer, inner) + self_S(inner), inner[4])
    return n1, n2


# ---------------------------------------------------------------------------
# Basic integrals by direct quadrature
# ---------------------------------------------------------------------------

def _periodic_nodes(m: int, b: float) -> int:
    return int(2 * m + 64 + math.ceil(40.0 / -math.log(b)))


def kernel_cosine_moment_quadrature(m: int, b: float, alpha: float) -> float:
    """(1/2pi) int_0^2pi cos(m y) (1 + b^2 - 2 b cos y)^(-alpha/2) dy by the trapezoid rule."""
    y, w = _smooth_rule(_periodic_nodes(m, b))
    return float(np.sum(w * np.cos(m * y) * (1 + b * b - 2 * b * np.cos(y)) ** (-alpha / 2))) / (2 * np.pi)


def kernel_sine_moment_quadrature(m: int, b: float, alpha: float) -> float:
    """(alpha/2m) int_0^2pi 2 sin y sin(m y) (1 + b^2 - 2 b cos y)^(-alpha/2-1) dy by the trapezoid rule."""
    y, w = _smooth_rule(_periodic_nodes(m, b))
    f = 2 * np.sin(y) * np.sin(m * y) * (1 + b * b - 2 * b * np.cos(y)) ** (-alpha / 2 - 1)
    return (alpha / (2 * m)) * float(np.sum(w * f))
