"""Linearised operator around the annulus, one 2x2 block per Fourier mode.

At the annulus (b, R=0, r=0) the derivative of the stationary functional maps
the pair (cos nx, 0), (0, cos nx) onto sin nx multiples given by the columns of
-n M_n(b), with

    M_n(b) = [[-Theta_n + b^2 Lambda_1(b),  -b^2 Lambda_n(b)          ],
              [ b Lambda_n(b),               b^(1-alpha) Theta_n - b Lambda_1(b)]].
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import InconsistencyError, InvariantFailure, PreconditionError
from .specfun import (
    Params,
    gamma_fn,
    lambda_n,
    lambda_n_prime,
    mode_data,
    theta_n,
)

__all__ = [
    "ModeMatrix",
    "TransversalityData",
    "AsymptoticCoefficients",
    "mode_matrix",
    "delta",
    "q_branches",
    "q_tilde_plus",
    "euler_matrix",
    "euler_delta_closed",
    "euler_delta_sum",
    "delta_asymptotics",
    "lambda_prime_fd",
    "d_mode_matrix_db",
    "transversality",
    "inverse_block",
]

DISCRIMINANT_CLAMP = 1e-14


@dataclass(frozen=True)
class ModeMatrix:
    """The 2x2 block M_n(b) and its determinant."""

    n: int
    entries: np.ndarray
    det: float
    at_params: Optional[Params]

    @property
    def m11(self) -> float:
        return float(self.entries[0, 0])

    @property
    def m12(self) -> float:
        return float(self.entries[0, 1])

    @property
    def m21(self) -> float:
        return float(self.entries[1, 0])

    @property
    def m22(self) -> float:
        return float(self.entries[1, 1])


def _matrix_from_scalars(b: float, alpha: float, lam1: float, lamn: float, theta: float) -> np.ndarray:
    return np.array(
        [
            [-theta + b * b * lam1, -b * b * lamn],
            [b * lamn, b ** (1.0 - alpha) * theta - b * lam1],
        ]
    )


def mode_matrix(n: int, p: Params) -> ModeMatrix:
    """Build M_n(b) from Lambda_1(b), Lambda_n(b) and Theta_n."""
    md = mode_data(n, p)
    M = _matrix_from_scalars(p.b, p.alpha, md.lambda_1, md.lambda_n, md.theta_n)
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return ModeMatrix(n=n, entries=M, det=float(det), at_params=p)


def delta(n: int, p: Params) -> float:
    """Determinant of M_n(b) through the expanded polynomial in Theta_n."""
    if n == 1:
        return 0.0
    b, al = p.b, p.alpha
    th = theta_n(n, al)
    lam1 = lambda_n(1, p)
    lamn = lambda_n(n, p)
    return (
        -(b ** (1.0 - al)) * th * th
        + th * (b ** (3.0 - al) * lam1 + b * lam1)
        + b ** 3 * (lamn * lamn - lam1 * lam1)
    )


def q_branches(m: int, p: Params) -> Tuple[float, float]:
    """The two roots Q_-(b,m) <= Q_+(b,m) of Delta_m(b) = 0 viewed as a quadratic in Theta_m."""
    if m < 2:
        raise PreconditionError("q_branches needs m >= 2")
    b, al = p.b, p.alpha
    lam1 = lambda_n(1, p)
    lamm = lambda_n(m, p)
    disc = lam1 * lam1 * (b - b ** (3.0 - al)) ** 2 + 4.0 * b ** (4.0 - al) * lamm * lamm
    if disc < 0.0:
        if disc < -DISCRIMINANT_CLAMP:
            raise InconsistencyError(f"negative discriminant {disc} in Q_pm")
        disc = 0.0
    denom = 2.0 * b ** (1.0 - al)
    q_plus = (lam1 * (b + b ** (3.0 - al)) + math.sqrt(disc)) / denom
    # product of the roots is b^(2+alpha) (Lambda_1^2 - Lambda_m^2); avoids cancellation
    q_minus = b ** (2.0 + al) * (lam1 * lam1 - lamm * lamm) / q_plus if q_plus != 0.0 else 0.0
    return q_minus, q_plus


def q_tilde_plus(m: int, p: Params) -> float:
    """Q_+(b,m) / (Lambda_1(b) b^alpha), the rescaled branch that increases in b."""
    return q_branches(m, p)[1] / (lambda_n(1, p) * p.b ** p.alpha)


# ---------------------------------------------------------------------------
# Euler limit
# ---------------------------------------------------------------------------

def euler_matrix(m: int, b: float) -> ModeMatrix:
    """Closed-form alpha -> 0 limit of M_m(b)."""
    if m < 2:
        raise PreconditionError("euler_matrix needs m >= 2")
    if not (0.0 < b < 1.0):
        raise PreconditionError("euler_matrix needs b in (0, 1)")
    M = np.array(
        [
            [b * b / 2 - 0.5 + 1.0 / (2 * m), -(b ** (m + 1)) / (2 * m)],
            [b ** m / (2 * m), -b / (2 * m)],
        ]
    )
    det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
    return ModeMatrix(n=m, entries=M, det=float(det), at_params=None)


def euler_delta_closed(m: int, b: float) -> float:
    return b / (4.0 * m * m) * (b ** (2 * m) - ((b * b - 1.0) * m + 1.0))


def euler_delta_sum(m: int, b: float) -> float:
    """Same determinant written as a sum of negative terms times a negative prefactor."""
    k = np.arange(m)
    return b * (b * b - 1.0) / (4.0 * m * m) * float(np.sum(b ** (2 * k) - 1.0))


# ---------------------------------------------------------------------------
# Large-n behaviour of Delta_n
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymptoticCoefficients:
    """Leading coefficients of Delta_n(b) as n -> infinity.

    ``mu`` is set for alpha < 1, ``p`` and ``q`` for alpha > 1 and
    ``log2_coeff`` (the coefficient of (log n)^2) for alpha = 1; the others are nan.
    """

    alpha: float
    b: float
    mu: float
    p: float
    q: float
    log2_coeff: float
    regime: str


def _gamma_c(alpha: float) -> float:
    return gamma_fn(1.0 - alpha) / (2.0 ** (1.0 - alpha) * gamma_fn(1.0 - alpha / 2) ** 2)


def delta_asymptotics(p: Params) -> AsymptoticCoefficients:
    al, b = p.alpha, p.b
    nan = math.nan
    lam1b = lambda_n(1, p)
    if al < 1.0:
        lam11 = lambda_n(1, Params(al, 1.0))
        mu = (-lam11 + b * b * lam1b) * (b ** (1.0 - al) * lam11 - b * lam1b)
        return AsymptoticCoefficients(al, b, mu, nan, nan, nan, "alpha_lt_1")
    if al == 1.0:
        return AsymptoticCoefficients(al, b, nan, nan, nan, -(b ** (1.0 - al)) / math.pi ** 2, "alpha_eq_1")
    C = _gamma_c(al)
    pa = -(b ** (1.0 - al)) * C * C
    qa = -C * b * lam1b * (1.0 + b ** (2.0 - al))
    return AsymptoticCoefficients(al, b, nan, pa, qa, nan, "alpha_gt_1")


# ---------------------------------------------------------------------------
# Transversality
# ---------------------------------------------------------------------------

def lambda_prime_fd(n: int, p: Params, h: float = 1e-5) -> float:
    """Centred difference of Lambda_n in b with one Richardson step."""
    b = p.b
    if not (h < b < 1.0 - h):
        raise PreconditionError("finite-difference step leaves (0, 1)")

    def central(step: float) -> float:
        return (lambda_n(n, Params(p.alpha, b + step)) - lambda_n(n, Params(p.alpha, b - step))) / (2.0 * step)

    return (4.0 * central(h / 2) - central(h)) / 3.0


def d_mode_matrix_db(n: int, p: Params, lam1p: Optional[float] = None, lamnp: Optional[float] = None) -> np.ndarray:
    """Entrywise b-derivative of M_n(b) (Theta_n does not depend on b)."""
    b, al = p.b, p.alpha
    lam1 = lambda_n(1, p)
    lamn = lambda_n(n, p)
    th = theta_n(n, al)
    if lam1p is None:
        lam1p = lambda_n_prime(1, p)
    if lamnp is None:
        lamnp = lambda_n_prime(n, p)
    return np.array(
        [
            [b * b * lam1p + 2 * b * lam1, -b * b * lamnp - 2 * b * lamn],
            [b * lamnp + lamn, (1.0 - al) * b ** (-al) * th - b * lam1p - lam1],
        ]
    )


@dataclass(frozen=True)
class TransversalityData:
    m: int
    alpha: float
    b_star: float
    v0: np.ndarray
    w: np.ndarray
    w1: np.ndarray
    lambda_prime_1: float
    lambda_prime_m: float
    kernel_residual: float
    parallel_margin: float
    derivative_agreement: float


def _cross(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def transversality(m: int, b_star: float, alpha: float, fd_tol: float = 1e-7) -> TransversalityData:
    """Kernel, range and transversality vectors at a bifurcation radius.

    Lambda' is taken from the analytic hypergeometric derivative and checked
    against a Richardson-extrapolated centred difference.
    """
    p = Params(alpha, b_star)
    d = delta(m, p)
    if abs(d) > 1e-6:
        raise PreconditionError(f"b_star={b_star} is not a root: |Delta|={abs(d):.3e}")
    b = b_star
    lam1 = lambda_n(1, p)
    lamm = lambda_n(m, p)
    th = theta_n(m, alpha)
    l1p = lambda_n_prime(1, p)
    lmp = lambda_n_prime(m, p)
    agreement = max(
        abs(l1p - lambda_prime_fd(1, p)) / abs(l1p),
        abs(lmp - lambda_prime_fd(m, p)) / abs(lmp),
    )
    if agreement > fd_tol:
        raise InvariantFailure(f"Lambda' routes disagree by {agreement:.2e}")

    M = mode_matrix(m, p).entries
    v0 = np.array([b * b * lamm, b * b * lam1 - th])
    w = np.array([-th + b * b * lam1, b * lamm])
    w1 = d_mode_matrix_db(m, p, l1p, lmp) @ v0
    kres = float(np.linalg.norm(M @ v0) / (np.linalg.norm(M) * np.linalg.norm(v0)))
    margin = abs(_cross(w1, w)) / (np.linalg.norm(w1) * np.linalg.norm(w))

    if kres > 1e-9:
        raise InvariantFailure(f"v0 is not in the kernel (relative residual {kres:.2e})")
    if not (w1[0] > 0 and w1[1] > 0):
        raise InvariantFailure(f"w1 components are not both positive: {w1}")
    if not (w[0] * w[1] < 0):
        raise InvariantFailure(f"w components do not have opposite signs: {w}")
    if margin <= 1e-6:
        raise InvariantFailure(f"w1 and w are parallel (margin {margin:.2e})")
    return TransversalityData(
        m=m,
        alpha=alpha,
        b_star=b_star,
        v0=v0,
        w=w,
        w1=w1,
        lambda_prime_1=l1p,
        lambda_prime_m=lmp,
        kernel_residual=kres,
        parallel_margin=float(margin),
        derivative_agreement=agreement,
    )


def inverse_block(n: int, p: Params) -> np.ndarray:
    """Inverse of the full linear block -n M_n(b), used to solve DF[H,h] = (U,u) mode by mode."""
    M = mode_matrix(n, p)
    if M.det == 0.0:
        raise PreconditionError(f"mode {n} block is singular")
    return np.linalg.inv(-n * M.entries)
