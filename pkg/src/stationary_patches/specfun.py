"""Special functions behind the spectral coefficients of the annulus.

Gamma, Pochhammer and the Gauss hypergeometric function are implemented here
together with the coefficients Lambda_n(b) and Theta_n that populate the 2x2
mode matrices.  Every coefficient has at least two independent evaluation
routes so that the routes can be played against each other in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Sequence, Tuple

import numpy as np
from scipy.special import digamma, roots_jacobi

from .errors import AccuracyError, DomainError, PreconditionError

__all__ = [
    "Params",
    "ModeData",
    "IdentityReport",
    "c_alpha",
    "gamma_fn",
    "rgamma",
    "gamma_ratio",
    "pochhammer",
    "hyp2f1",
    "lambda_n",
    "lambda_n_prime",
    "lambda_n_integral",
    "theta_n",
    "theta_n_closed_form",
    "theta_n_gauss",
    "mode_data",
    "identity_suite",
    "kernel_cosine_moment_closed",
    "kernel_sine_moment_closed",
]

# ---------------------------------------------------------------------------
# Gamma family
# ---------------------------------------------------------------------------

def _is_pole(x: float) -> bool:
    return x <= 0.0 and x == math.floor(x)


def gamma_fn(x: float) -> float:
    """Gamma function; raises :class:`DomainError` at the poles 0, -1, -2, ..."""
    x = float(x)
    if not math.isfinite(x) or _is_pole(x):
        raise DomainError(f"Gamma has a pole at x={x!r}")
    try:
        return math.gamma(x)
    except OverflowError as exc:
        raise DomainError(f"Gamma overflows at x={x!r}") from exc


def rgamma(x: float) -> float:
    """Reciprocal Gamma function, an entire function (zero at the poles of Gamma)."""
    x = float(x)
    if _is_pole(x):
        return 0.0
    lg, sg = _lgamma_signed(x)
    return sg * math.exp(-lg)


def _lgamma_signed(x: float) -> Tuple[float, float]:
    """Return (log|Gamma(x)|, sign Gamma(x)) for x away from the poles."""
    if x > 0.0:
        return math.lgamma(x), 1.0
    sign = -1.0 if (math.floor(x) % 2) else 1.0
    return math.lgamma(x), sign


def gamma_ratio(num: Sequence[float], den: Sequence[float]) -> float:
    """prod Gamma(num) / prod Gamma(den), evaluated through signed log-Gamma.

    A pole in the denominator makes the ratio vanish; a pole in the numerator
    is a domain error unless it is cancelled by a denominator pole.
    """
    if any(_is_pole(d) for d in den):
        if any(_is_pole(v) for v in num):
            raise DomainError("indeterminate Gamma ratio (poles on both sides)")
        return 0.0
    if any(_is_pole(v) for v in num):
        raise DomainError("Gamma ratio has a pole in the numerator")
    logv, sign = 0.0, 1.0
    for v in num:
        lg, sg = _lgamma_signed(float(v))
        logv += lg
        sign *= sg
    for d in den:
        lg, sg = _lgamma_signed(float(d))
        logv -= lg
        sign *= sg
    return sign * math.exp(logv)


def pochhammer(a: float, n: int) -> float:
    """Rising factorial (a)_n = a (a+1) ... (a+n-1), with (a)_0 = 1."""
    if n < 0 or int(n) != n:
        raise PreconditionError("pochhammer needs a nonnegative integer n")
    out = 1.0
    for k in range(int(n)):
        out *= a + k
    return out


def c_alpha(alpha: float) -> float:
    """Normalising constant of the gSQG kernel."""
    return gamma_fn(alpha / 2) / (2.0 * math.pi * 2.0 ** (1.0 - alpha) * gamma_fn(1.0 - alpha / 2))


def _log_pochhammer_over_factorial(a: float, n: int) -> float:
    """log((a)_n / n!) for a > 0."""
    return math.lgamma(n + a) - math.lgamma(a) - math.lgamma(n + 1.0)


# ---------------------------------------------------------------------------
# Gauss hypergeometric function
# ---------------------------------------------------------------------------

_SERIES_CAP = 20_000_000
_SERIES_ZMAX = 0.99999
# each connection term carries ~1e-14 relative error from the gamma factors, so
# more than tenfold cancellation would cost digits beyond the 1e-11 target
_CANCEL_MAX = 10.0


def _series(a: float, b: float, c: float, z: float) -> float:
    """Direct Maclaurin series, summed in vectorised chunks until the tail is negligible."""
    if z == 0.0:
        return 1.0
    total = 1.0
    term = 1.0
    k0 = 0
    chunk = 256
    while True:
        k = np.arange(k0, k0 + chunk, dtype=float)
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        terms = term * np.cumprod(ratio)
        total += float(np.sum(terms))
        term = float(terms[-1])
        k0 += chunk
        if not math.isfinite(total):
            raise AccuracyError("hypergeometric series overflowed")
        if term == 0.0:
            return total
        rr = max(abs(float(ratio[-1])), abs(z))
        if rr < 1.0 and abs(term) * rr / (1.0 - rr) <= 2e-17 * abs(total):
            return total
        if k0 > _SERIES_CAP:
            raise AccuracyError(f"hypergeometric series did not converge (z={z})")
        chunk = min(chunk * 2, 1 << 17)


def _terminates(a: float, b: float) -> bool:
    return _is_pole(a) or _is_pole(b)


def _transform_one_minus_z(a: float, b: float, c: float, z: float) -> Tuple[float, float]:
    """The two terms of the z -> 1-z connection formula for non-integer s = c-a-b."""
    s = math.fsum((c, -a, -b))
    w = 1.0 - z
    t1 = gamma_ratio([c, s], [c - a, c - b])
    if t1 != 0.0:
        t1 *= _series(a, b, 1.0 - s, w)
    t2 = gamma_ratio([c, -s], [a, b])
    if t2 != 0.0:
        t2 *= w ** s * _series(c - a, c - b, 1.0 + s, w)
    return t1, t2


def _log_case(a: float, b: float, c: float, z: float, m: int) -> float:
    """Integer s = c-a-b = m >= 0, where the transformation acquires logarithms."""
    w = 1.0 - z
    logw = math.log(w)
    out = 0.0
    if m > 0:
        finite = 0.0
        coef = 1.0
        for n in range(m):
            finite += coef * w ** n
            if n < m - 1:
                coef *= (a + n) * (b + n) / ((n + 1.0) * (1.0 - m + n))
        out += gamma_ratio([float(m), c], [a + m, b + m]) * finite
    # infinite logarithmic part, extended until the coefficients are negligible
    pref = gamma_ratio([c], [a, b]) / math.factorial(m)
    if m > 0:
        pref *= -((-w) ** m)
    nmax = 64
    while True:
        n = np.arange(nmax, dtype=float)
        ratio = (a + m + n) * (b + m + n) / ((n + 1.0) * (n + m + 1.0)) * w
        coef = np.concatenate(([1.0], np.cumprod(ratio[:-1])))
        rr = max(abs(float(ratio[-1])), w)
        if rr < 1.0 and abs(coef[-1]) * rr / (1.0 - rr) <= 1e-18 * np.max(np.abs(coef)):
            break
        nmax *= 2
        if nmax > 1 << 22:
            raise AccuracyError("logarithmic hypergeometric expansion did not converge")
    if m == 0:
        bracket = 2.0 * digamma(n + 1.0) - digamma(a + n) - digamma(b + n) - logw
    else:
        bracket = logw - digamma(n + 1.0) - digamma(n + m + 1.0) + digamma(a + n + m) + digamma(b + n + m)
    out += pref * float(np.sum(coef * bracket))
    return out


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z in [-0.5, 1].

    Direct series up to z = 0.9; beyond that the z -> 1-z connection formula
    (with its logarithmic form when c-a-b is an integer); Gauss summation at
    z = 1.  When the two connection terms cancel badly (c-a-b close to an
    integer, or large parameters) the direct series is kept up to z = 0.99999.
    """
    a, b, c, z = float(a), float(b), float(c), float(z)
    if _is_pole(c):
        raise DomainError(f"2F1 undefined for c={c} (nonpositive integer)")
    if not (-0.5 <= z <= 1.0):
        raise DomainError(f"2F1 argument z={z} outside the supported range [-0.5, 1]")
    if z == 0.0:
        return 1.0
    if _terminates(a, b):
        return _series(a, b, c, z)
    s = math.fsum((c, -a, -b))
    if z == 1.0:
        if s <= 0.0:
            raise DomainError(f"2F1 diverges at z=1 when c-a-b={s} <= 0")
        return gamma_ratio([c, s], [c - a, c - b])
    if z <= 0.9:
        return _series(a, b, c, z)
    if s == round(s):
        m = int(round(s))
        if m < 0:
            return (1.0 - z) ** m * hyp2f1(c - a, c - b, c, z)
        return _log_case(a, b, c, z, m)
    t1, t2 = _transform_one_minus_z(a, b, c, z)
    value = t1 + t2
    # the two connection terms cancel when s is close to an integer or the
    # parameters are large; fall back on the direct series while it is affordable
    cancel = (abs(t1) + abs(t2)) / abs(value) if value != 0.0 else math.inf
    if (not math.isfinite(cancel) or cancel > _CANCEL_MAX) and z <= _SERIES_ZMAX:
        return _series(a, b, c, z)
    return value


# ---------------------------------------------------------------------------
# Spectral coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Params:
    """Physical parameters: kernel exponent alpha and inner radius b."""

    alpha: float
    b: float
    c_alpha: float = field(init=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < 2.0):
            raise PreconditionError(f"alpha must lie in (0, 2), got {self.alpha}")
        if not (0.0 < self.b <= 1.0):
            raise PreconditionError(f"b must lie in (0, 1], got {self.b}")
        object.__setattr__(self, "c_alpha", c_alpha(self.alpha))


def _lambda_prefactor(alpha: float) -> float:
    # 2*pi*c_alpha
    return gamma_fn(alpha / 2) / (gamma_fn(1.0 - alpha / 2) * 2.0 ** (1.0 - alpha))


def lambda_n(n: int, p: Params) -> float:
    """Lambda_n(b) through its hypergeometric representation."""
    if n < 1:
        raise PreconditionError("mode index n must be >= 1")
    a = p.alpha / 2
    b = p.b
    if b == 1.0 and p.alpha >= 1.0:
        raise DomainError("Lambda_n(1) is infinite for alpha >= 1")
    F = hyp2f1(a, n + a, n + 1.0, b * b)
    logc = _log_pochhammer_over_factorial(a, n) + (n - 1) * math.log(b)
    return _lambda_prefactor(p.alpha) * math.exp(logc) * F


def lambda_n_prime(n: int, p: Params) -> float:
    """d Lambda_n / db, from the derivative rule dF/dz = (ab/c) F(a+1, b+1; c+1; z)."""
    if n < 1:
        raise PreconditionError("mode index n must be >= 1")
    a = p.alpha / 2
    b = p.b
    if b >= 1.0:
        raise DomainError("Lambda_n'(b) is only finite for b < 1")
    z = b * b
    coef = _lambda_prefactor(p.alpha) * math.exp(_log_pochhammer_over_factorial(a, n))
    dF = a * (n + a) / (n + 1.0) * hyp2f1(a + 1.0, n + a + 1.0, n + 2.0, z)
    out = 2.0 * b ** n * dF
    if n > 1:
        out += (n - 1) * b ** (n - 2) * hyp2f1(a, n + a, n + 1.0, z)
    return coef * out


@lru_cache(maxsize=256)
def _jacobi_rule(npts: int, aw: float, bw: float) -> Tuple[np.ndarray, np.ndarray]:
    x, w = roots_jacobi(npts, aw, bw)
    return x, w


def _beta_integral(n: int, alpha: float, b: float, npts: int) -> float:
    """int_0^1 x^beta (1-x)^(-a) (1-b^2 x)^(-a) dx on graded panels, fixed order."""
    a = alpha / 2
    beta = n - 1 + a
    b2 = b * b

    def smooth_log(x: np.ndarray) -> np.ndarray:
        return -a * np.log1p(-b2 * x)

    # [0, 1/2] with the x^beta weight absorbed into Gauss-Jacobi
    t, w = _jacobi_rule(npts, 0.0, beta)
    x = (1.0 + t) / 4.0
    total = 0.25 ** (beta + 1.0) * float(np.sum(w * np.exp(-a * np.log1p(-x) + smooth_log(x))))

    if b == 1.0:
        kmax = 1
    else:
        d = 1.0 - b2
        kmax = max(1, int(math.ceil(math.log2(1.0 / d))) + 1)

    tl, wl = np.polynomial.legendre.leggauss(npts)
    for k in range(1, kmax):
        lo, hi = 1.0 - 2.0 ** (-k), 1.0 - 2.0 ** (-k - 1)
        x = lo + (hi - lo) * (1.0 + tl) / 2.0
        f = np.exp(beta * np.log(x) - a * np.log1p(-x) + smooth_log(x))
        total += (hi - lo) / 2.0 * float(np.sum(wl * f))

    h = 2.0 ** (-kmax)
    if b == 1.0:
        t, w = _jacobi_rule(npts, -alpha, 0.0)
        x = 1.0 - h * (1.0 - t) / 2.0
        total += (h / 2.0) ** (1.0 - alpha) * float(np.sum(w * np.exp(beta * np.log(x))))
    else:
        t, w = _jacobi_rule(npts, -a, 0.0)
        x = 1.0 - h * (1.0 - t) / 2.0
        total += (h / 2.0) ** (1.0 - a) * float(np.sum(w * np.exp(beta * np.log(x) + smooth_log(x))))
    return total


def lambda_n_integral(n: int, p: Params, rtol: float = 1e-10, max_points: int = 512) -> float:
    """Lambda_n(b) from its Beta-type integral representation.

    Endpoint singularities are absorbed into Gauss-Jacobi weights; the
    near-singularity of (1 - b^2 x)^(-alpha/2) for b close to 1 is resolved by
    dyadic panels toward x = 1.  The node count is doubled until two
    successive estimates agree to ``rtol``.
    """
    if n < 1:
        raise PreconditionError("mode index n must be >= 1")
    alpha, b = p.alpha, p.b
    if b == 1.0 and alpha >= 1.0:
        raise DomainError("the integral diverges at b=1 for alpha >= 1")
    pref = b ** (n - 1) / (2.0 ** (1.0 - alpha) * gamma_fn(1.0 - alpha / 2) ** 2)
    npts = 16
    prev = _beta_integral(n, alpha, b, npts)
    while npts < max_points:
        npts *= 2
        cur = _beta_integral(n, alpha, b, npts)
        if abs(cur - prev) <= rtol * abs(cur):
            return pref * cur
        prev = cur
    raise AccuracyError(f"Lambda_{n} quadrature did not reach rtol={rtol}")


@lru_cache(maxsize=4096)
def theta_n(n: int, alpha: float) -> float:
    """Theta_n = Lambda_1(1) - Lambda_n(1), as a finite telescoping sum.

    Both terms are infinite for alpha >= 1, but their difference is the finite
    sum  G * sum_{k=1}^{n-1} g(k) / (k + 1 - alpha/2)  with
    g(k) = Gamma(k + alpha/2) / Gamma(k + 1 - alpha/2), valid for every alpha
    in (0, 2).
    """
    if n < 1:
        raise PreconditionError("mode index n must be >= 1")
    if not (0.0 < alpha < 2.0):
        raise PreconditionError("alpha must lie in (0, 2)")
    if n == 1:
        return 0.0
    a = alpha / 2
    G = gamma_fn(2.0 - alpha) / (2.0 ** (1.0 - alpha) * gamma_fn(1.0 - a) ** 2)
    k = np.arange(1, n, dtype=float)
    g1 = gamma_fn(1.0 + a) / gamma_fn(2.0 - a)
    steps = np.concatenate(([g1], (k[:-1] + a) / (k[:-1] + 1.0 - a)))
    g = np.cumprod(steps)
    return G * float(np.sum(g / (k + 1.0 - a)))


def theta_n_closed_form(n: int, alpha: float) -> float:
    """Closed form of Theta_n: a Gamma-ratio difference (alpha != 1) or digammas (alpha = 1)."""
    a = alpha / 2
    if alpha == 1.0:
        return float(digamma(n + 0.5) - digamma(1.5)) / math.pi
    C = gamma_fn(1.0 - alpha) / (2.0 ** (1.0 - alpha) * gamma_fn(1.0 - a) ** 2)
    return C * (gamma_ratio([1.0 + a], [2.0 - a]) - gamma_ratio([n + a], [n + 1.0 - a]))


def theta_n_gauss(n: int, alpha: float) -> float:
    """Theta_n from Gauss-summed Lambda values at b = 1 (finite only for alpha < 1)."""
    p = Params(alpha, 1.0)
    return lambda_n(1, p) - lambda_n(n, p)


@dataclass(frozen=True)
class ModeData:
    """Per-mode scalars entering the linearisation at the annulus."""

    n: int
    lambda_n: float
    lambda_1: float
    theta_n: float
    at_params: Params


def mode_data(n: int, p: Params) -> ModeData:
    lam1 = lambda_n(1, p)
    lamn = lam1 if n == 1 else lambda_n(n, p)
    return ModeData(n=n, lambda_n=lamn, lambda_1=lam1, theta_n=theta_n(n, p.alpha), at_params=p)


# ---------------------------------------------------------------------------
# Contiguous relations and basic integrals
# ---------------------------------------------------------------------------

IDENTITY_NAMES = (
    "derivative",
    "contiguous_b_c",
    "contiguous_b_c1",
    "contiguous_bm1_c1",
    "contiguous_a_c",
    "contiguous_a_b",
)


@dataclass
class IdentityReport:
    """Absolute residual and term magnitude of each identity at one parameter point."""

    params: Tuple[float, float, float, float]
    residuals: Dict[str, float]
    scales: Dict[str, float]

    def max_residual(self) -> float:
        return max(self.residuals.values())

    def max_relative(self) -> float:
        return max(self.residuals[k] / max(1.0, self.scales[k]) for k in self.residuals)


def _fd_derivative(a: float, b: float, c: float, z: float, h: float = 1e-3) -> float:
    # Centred differences at h, h/2, h/4 with two Richardson levels (sixth order).
    # A step this large keeps rounding amplification near eps/h; smaller steps with
    # a fourth-order stencil lose two digits once the terms reach ~1e3.  The stencil
    # is summed with the direct series: its terms are positive here, so the values
    # are smooth in z to rounding level, unlike the connection formula past z = 0.9.
    def central(step: float) -> float:
        return (_series(a, b, c, z + step) - _series(a, b, c, z - step)) / (2.0 * step)

    d1, d2, d3 = central(h), central(h / 2), central(h / 4)
    r1 = (4.0 * d2 - d1) / 3.0
    r2 = (4.0 * d3 - d2) / 3.0
    return (16.0 * r2 - r1) / 15.0


def identity_suite(a: float, b: float, c: float, z: float) -> IdentityReport:
    """Evaluate the derivative rule and five contiguous relations of 2F1.

    Two of the relations are used in their corrected forms:
    c F(a,b;c) - (c-b) F(a,b;c+1) - b F(a,b+1;c+1) = 0 and
    c F(a,b-1;c) + (a-c) z F(a,b;c+1) + (z-1) c F(a,b;c) = 0.
    """
    if not (0.0 <= z <= 0.95):
        raise PreconditionError("identity_suite expects z in [0, 0.95]")
    F = hyp2f1
    f = F(a, b, c, z)
    f_b1 = F(a, b + 1, c, z)
    f_a1 = F(a + 1, b, c, z)
    f_ab1 = F(a + 1, b + 1, c + 1, z)
    f_c1 = F(a, b, c + 1, z)
    f_b1c1 = F(a, b + 1, c + 1, z)
    f_bm1 = F(a, b - 1, c, z)

    terms = {
        "derivative": [_fd_derivative(a, b, c, z), -a * b / c * f_ab1],
        "contiguous_b_c": [c * f, -c * f_b1, a * z * f_ab1],
        "contiguous_b_c1": [c * f, -(c - b) * f_c1, -b * f_b1c1],
        "contiguous_bm1_c1": [c * f_bm1, (a - c) * z * f_c1, (z - 1.0) * c * f],
        "contiguous_a_c": [c * f, -c * f_a1, b * z * f_ab1],
        "contiguous_a_b": [b * f_b1, -a * f_a1, (a - b) * f],
    }
    residuals = {k: abs(math.fsum(v)) for k, v in terms.items()}
    scales = {k: max(abs(t) for t in v) for k, v in terms.items()}
    return IdentityReport(params=(a, b, c, z), residuals=residuals, scales=scales)


def kernel_cosine_moment_closed(m: int, b: float, alpha: float) -> float:
    """(1/2pi) int_0^2pi cos(m y) (1 + b^2 - 2 b cos y)^(-alpha/2) dy in closed form."""
    a = alpha / 2
    return b ** m * math.exp(_log_pochhammer_over_factorial(a, m)) * hyp2f1(a, m + a, m + 1.0, b * b)


def kernel_sine_moment_closed(m: int, b: float, alpha: float) -> float:
    """(alpha/2m) int_0^2pi 2 sin y sin(m y) (1 + b^2 - 2 b cos y)^(-alpha/2-1) dy in closed form."""
    a = alpha / 2
    return 2.0 * math.pi * b ** (m - 1) * math.exp(_log_pochhammer_over_factorial(a, m)) * hyp2f1(
        a, m + a, m + 1.0, b * b
    )
