"""Bifurcation radii b*_m: the unique zero of Delta_m(b) on (0, 1).

The root is sought on the objective g(b) = Theta_m - Q_+(b, m), which has a
single sign change; the determinant itself is only used as an independent
residual certificate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import brentq

from .errors import InvariantFailure, PreconditionError
from .linops import delta, q_branches
from .specfun import Params, lambda_n, theta_n

__all__ = [
    "BifurcationPoint",
    "BifurcationScan",
    "root_objective",
    "scan_determinant",
    "find_b_star",
    "SCAN_LO",
    "SCAN_HI",
]

SCAN_LO = 0.001
SCAN_HI = 0.999


@dataclass(frozen=True)
class BifurcationPoint:
    m: int
    alpha: float
    b_star: float
    residual: float
    scale: float
    bracket: Tuple[float, float]
    kernel: np.ndarray
    certificate: Tuple[bool, bool, bool]

    @property
    def certified(self) -> bool:
        return all(self.certificate) and self.residual <= 1e-12 * self.scale


@dataclass(frozen=True)
class BifurcationScan:
    m: int
    alpha: float
    grid_b: np.ndarray
    q_plus: np.ndarray
    q_minus: np.ndarray
    theta_m: float
    j_ratio: np.ndarray

    @property
    def objective(self) -> np.ndarray:
        return self.theta_m - self.q_plus

    def sign_changes(self) -> np.ndarray:
        """Indices i such that the objective changes sign on [grid_b[i], grid_b[i+1]]."""
        s = np.sign(self.objective)
        return np.nonzero(s[:-1] * s[1:] < 0)[0]


def root_objective(m: int, alpha: float, b: float) -> float:
    return theta_n(m, alpha) - q_branches(m, Params(alpha, b))[1]


def scan_determinant(m: int, alpha: float, grid_size: int = 200) -> BifurcationScan:
    """Sample Q_pm, Theta_m and (Lambda_m/Lambda_1)^2 on an even grid of (0.001, 0.999)."""
    if grid_size < 50:
        raise PreconditionError("grid_size must be at least 50")
    if m < 2:
        raise PreconditionError("m must be at least 2")
    grid = np.linspace(SCAN_LO, SCAN_HI, grid_size)
    qp = np.empty(grid_size)
    qm = np.empty(grid_size)
    jr = np.empty(grid_size)
    for i, b in enumerate(grid):
        p = Params(alpha, float(b))
        qm[i], qp[i] = q_branches(m, p)
        jr[i] = (lambda_n(m, p) / lambda_n(1, p)) ** 2
    return BifurcationScan(m, alpha, grid, qp, qm, theta_n(m, alpha), jr)


def _certificate(m: int, alpha: float, b: float) -> Tuple[bool, bool, bool]:
    p = Params(alpha, b)
    th = theta_n(m, alpha)
    qp = q_branches(m, p)[1]
    lam1 = lambda_n(1, p)
    return (
        abs(th - qp) <= 1e-10 * th,
        th > b ** alpha * lam1,
        b ** alpha * lam1 > b * b * lam1,
    )


def find_b_star(m: int, alpha: float, tol: float = 1e-12, grid_size: int = 200) -> BifurcationPoint:
    """Locate and certify the bifurcation radius for the m-fold mode."""
    if tol < 1e-14:
        raise PreconditionError("tol must be >= 1e-14")
    scan = scan_determinant(m, alpha, grid_size)
    changes = scan.sign_changes()
    if len(changes) == 0:
        raise InvariantFailure(f"no root of Delta_{m} on (0,1) for alpha={alpha}")
    if len(changes) > 1:
        raise InvariantFailure(f"{len(changes)} sign changes of Delta_{m} for alpha={alpha}")
    i = int(changes[0])

    def g(b: float) -> float:
        return root_objective(m, alpha, b)

    root = brentq(g, float(scan.grid_b[i]), float(scan.grid_b[i + 1]), xtol=tol / 8, rtol=4 * np.finfo(float).eps)
    lo, hi = _tight_bracket(g, root, tol, float(scan.grid_b[i]), float(scan.grid_b[i + 1]))
    b_star = 0.5 * (lo + hi) if abs(g(0.5 * (lo + hi))) < abs(g(root)) else root

    p = Params(alpha, b_star)
    res = abs(delta(m, p))
    scale = max(theta_n(m, alpha) * lambda_n(1, Params(alpha, x)) for x in (lo, hi))
    lam1 = lambda_n(1, p)
    lamm = lambda_n(m, p)
    v0 = np.array([b_star ** 2 * lamm, b_star ** 2 * lam1 - theta_n(m, alpha)])
    return BifurcationPoint(
        m=m,
        alpha=alpha,
        b_star=b_star,
        residual=res,
        scale=scale,
        bracket=(lo, hi),
        kernel=v0 / np.linalg.norm(v0),
        certificate=_certificate(m, alpha, b_star),
    )


def _tight_bracket(g, root: float, tol: float, a: float, b: float) -> Tuple[float, float]:
    """Shrink a sign-change bracket around ``root`` to width <= tol."""
    ga = g(a)
    half = 0.45 * tol
    lo, hi = max(a, root - half), min(b, root + half)
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo, lo
    if ghi == 0.0:
        return hi, hi
    if math.copysign(1.0, glo) != math.copysign(1.0, ghi):
        return lo, hi
    # fall back on plain bisection of the original bracket
    lo, hi = a, b
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0.0:
            return mid, mid
        if math.copysign(1.0, gm) == math.copysign(1.0, ga):
            lo, ga = mid, gm
        else:
            hi = mid
    return lo, hi
