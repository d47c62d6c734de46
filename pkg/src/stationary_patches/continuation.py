"""Newton continuation of the m-fold stationary branch leaving the annulus at b*_m.

The branch is parametrised by the amplitude s of the cos(m x) coefficient of
the outer perturbation R.  With s pinned, the unknowns are the remaining
coefficients of R, all coefficients of r and the inner radius b; the
equations are the J sine coefficients of each component of F.  The system is
square (2J x 2J).
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .bifurcation import BifurcationPoint, find_b_star
from .errors import DomainError, NonConvergence, PreconditionError
from .functional import (
    FourierCosine,
    PatchState,
    QuadratureGrid,
    Workspace,
    default_grid,
    eval_dF_db,
    eval_F,
    normal_velocity,
    refine_grid,
)

__all__ = [
    "ContinuationConfig",
    "BranchPoint",
    "Branch",
    "initial_guess",
    "assemble_jacobian",
    "newton_solve",
    "trace_branch",
    "stationarity_check",
    "kernel_angle",
    "class_leakage",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContinuationConfig:
    J: int = 32
    newton_tol: float = 1e-10
    max_iters: int = 12
    halvings: int = 4
    tail_gate: float = 1e-10

    def __post_init__(self) -> None:
        if self.J < 8:
            raise PreconditionError("truncation J must be at least 8")
        if self.newton_tol <= 0:
            raise PreconditionError("newton_tol must be positive")

    def grid(self, m: int, b: float) -> QuadratureGrid:
        return default_grid(self.J, m, b)


@dataclass(frozen=True)
class BranchPoint:
    amplitude: float
    state: PatchState
    residual: float
    newton_iters: int
    tail: float
    history: tuple = ()

    @property
    def b(self) -> float:
        return self.state.b


@dataclass
class Branch:
    m: int
    alpha: float
    origin: BifurcationPoint
    points: List[BranchPoint] = field(default_factory=list)
    complete: bool = True


# ---------------------------------------------------------------------------
# Unknown vector <-> state
# ---------------------------------------------------------------------------

def _pack(state: PatchState) -> np.ndarray:
    return np.concatenate([state.R_pert.coeffs[1:], state.r_pert.coeffs, [state.b]])


def _unpack(x: np.ndarray, pin: float, m: int, J: int, alpha: float) -> PatchState:
    R = np.concatenate([[pin], x[: J - 1]])
    r = x[J - 1 : 2 * J - 1]
    return PatchState(float(x[-1]), FourierCosine(m, R), FourierCosine(m, r), alpha)


def _residual(state: PatchState, grid: QuadratureGrid) -> tuple:
    F1, F2 = eval_F(state, grid)
    vec = np.concatenate([F1.coeffs, F2.coeffs])
    sup = max(F1.sup_residual, F2.sup_residual)
    return vec, sup


def initial_guess(bp: BifurcationPoint, s: float, J: int = 32) -> PatchState:
    """Tangent predictor: (R, r) = s (1, v0_2 / v0_1) cos(m x) at b = b*_m."""
    if abs(s) > 0.05 * (1.0 - bp.b_star):
        raise PreconditionError(f"|s|={abs(s)} exceeds the admissible gate 0.05(1-b*)")
    v0 = bp.kernel
    if v0[0] == 0.0:
        raise DomainError("kernel vector has vanishing first component")
    R = FourierCosine.mode(bp.m, J, 1, s)
    r = FourierCosine.mode(bp.m, J, 1, s * v0[1] / v0[0])
    return PatchState(bp.b_star, R, r, bp.alpha)


def assemble_jacobian(state: PatchState, grid: QuadratureGrid) -> np.ndarray:
    """Columns: d/dR_j (j >= 2), d/dr_j (j >= 1), d/db; rows: sine coefficients of F1 then F2."""
    m, J = state.m_fold, state.R_pert.J
    ws = Workspace(state, grid)
    zero = FourierCosine.zeros(m, J)
    cols = []
    for j in range(2, J + 1):
        D1, D2 = ws.derivative_values(FourierCosine.mode(m, J, j), zero)
        cols.append(np.concatenate([ws.project(D1).coeffs, ws.project(D2).coeffs]))
    for j in range(1, J + 1):
        D1, D2 = ws.derivative_values(zero, FourierCosine.mode(m, J, j))
        cols.append(np.concatenate([ws.project(D1).coeffs, ws.project(D2).coeffs]))
    B1, B2 = eval_dF_db(state, grid)
    cols.append(np.concatenate([B1.coeffs, B2.coeffs]))
    return np.column_stack(cols)


def newton_solve(
    guess: PatchState,
    m: int,
    pin: float,
    tol: float = 1e-10,
    max_iters: int = 12,
    grid: Optional[QuadratureGrid] = None,
    halvings: int = 4,
) -> BranchPoint:
    """Damped Newton iteration on the pinned 2J x 2J system."""
    J = guess.R_pert.J
    alpha = guess.alpha
    if guess.R_pert.coeffs[0] != pin:
        guess = PatchState(guess.b, FourierCosine(m, np.concatenate([[pin], guess.R_pert.coeffs[1:]])), guess.r_pert, alpha)
    if grid is None:
        grid = default_grid(J, m, guess.b)
    state = guess
    if not state.is_small():
        raise DomainError("initial guess outside the smallness gate")
    vec, sup = _residual(state, grid)
    history = [sup]
    it = 0
    while sup > tol:
        if it >= max_iters:
            raise NonConvergence(f"Newton did not converge in {max_iters} iterations", residual=sup, iterations=it)
        Jm = assemble_jacobian(state, grid)
        step = np.linalg.solve(Jm, -vec)
        x0 = _pack(state)
        t = 1.0
        for attempt in range(halvings + 1):
            try:
                trial = _unpack(x0 + t * step, pin, m, J, alpha)
                if not trial.is_small():
                    raise DomainError("Newton step left the smallness gate")
                tvec, tsup = _residual(trial, grid)
            except DomainError:
                if attempt == halvings:
                    raise
                t *= 0.5
                continue
            if tsup < sup or attempt == halvings:
                break
            t *= 0.5
        state, vec, sup = trial, tvec, tsup
        it += 1
        history.append(sup)
        log.debug("newton iter %d residual %.3e step %.2f", it, sup, t)
    tail = max(state.R_pert.tail(), state.r_pert.tail())
    return BranchPoint(pin, state, sup, it, tail, tuple(history))


def _tangent_ok(point: BranchPoint, cfg: ContinuationConfig) -> bool:
    c = np.concatenate([point.state.R_pert.coeffs, point.state.r_pert.coeffs])
    return point.tail <= cfg.tail_gate * max(float(np.max(np.abs(c))), 1e-300)


def trace_branch(
    m: int,
    alpha: float,
    s_values: Sequence[float],
    cfg: Optional[ContinuationConfig] = None,
    origin: Optional[BifurcationPoint] = None,
) -> Branch:
    """Follow the branch through the amplitudes ``s_values`` (increasing, starting at <= 1e-4)."""
    cfg = cfg or ContinuationConfig()
    s_values = [float(s) for s in s_values]
    if not s_values or s_values[0] > 1e-4 or any(b <= a for a, b in zip(s_values, s_values[1:])):
        raise PreconditionError("s_values must increase and start at or below 1e-4")
    bp = origin or find_b_star(m, alpha)
    grid = cfg.grid(m, bp.b_star)
    branch = Branch(m, alpha, bp)
    prev: List[np.ndarray] = []
    for i, s in enumerate(s_values):
        if i == 0:
            guess = initial_guess(bp, s, cfg.J)
        elif len(prev) == 1:
            x = prev[-1].copy()
            scale = s / s_values[i - 1]
            x[:-1] *= scale
            guess = _unpack(x, s, m, cfg.J, alpha)
        else:
            ds = (s - s_values[i - 1]) / (s_values[i - 1] - s_values[i - 2])
            guess = _unpack(prev[-1] + ds * (prev[-1] - prev[-2]), s, m, cfg.J, alpha)
        try:
            pt = newton_solve(guess, m, s, cfg.newton_tol, cfg.max_iters, grid, cfg.halvings)
        except (NonConvergence, DomainError) as exc:
            if i == 0:
                raise
            warnings.warn(f"branch stopped at s={s}: {exc}", RuntimeWarning)
            branch.complete = False
            break
        if not _tangent_ok(pt, cfg):
            warnings.warn(f"tail gate failed at s={s}: tail={pt.tail:.2e}", RuntimeWarning)
        branch.points.append(pt)
        prev.append(_pack(pt.state))
    return branch


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def stationarity_check(point: BranchPoint, grid_hi: Optional[QuadratureGrid] = None) -> float:
    """Sup of both normal velocities on a refined full-circle grid (vector-kernel route)."""
    st = point.state
    if grid_hi is None:
        base = default_grid(st.R_pert.J, st.m_fold, st.b, full_circle=True)
        grid_hi = refine_grid(base)
    n1, n2 = normal_velocity(st, grid_hi)
    return float(max(np.max(np.abs(n1)), np.max(np.abs(n2))))


def kernel_angle(point: BranchPoint, v0: np.ndarray) -> float:
    """Angle between (R_m, r_m) and the kernel direction v0, in radians (sign-insensitive)."""
    u = np.array([point.state.R_pert.coeffs[0], point.state.r_pert.coeffs[0]])
    c = abs(float(u @ v0)) / (np.linalg.norm(u) * np.linalg.norm(v0))
    return float(math.acos(min(1.0, c)))


def class_leakage(point: BranchPoint) -> float:
    """Largest Fourier coefficient of F outside the m-fold class on the full circle."""
    st = point.state
    g = default_grid(st.R_pert.J, st.m_fold, st.b, full_circle=True)
    F1, F2 = eval_F(st, g)
    return max(F1.leakage, F2.leakage)
