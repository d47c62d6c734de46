"""Named invariant checks covering every module, used by ``cli verify`` and the tests.

Each check returns a :class:`CheckResult` with the measured quantity, the
threshold it is compared against and a pass flag, so that reports show the
margin rather than a bare verdict.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bifurcation import find_b_star, scan_determinant
from .config import RunConfig
from .continuation import (
    ContinuationConfig,
    assemble_jacobian,
    class_leakage,
    kernel_angle,
    stationarity_check,
    trace_branch,
)
from .errors import InvariantFailure, PatchError
from .functional import (
    FourierCosine,
    PatchState,
    QuadratureGrid,
    Workspace,
    adaptive_grid,
    default_grid,
    eval_DF,
    eval_F,
    kernel_cosine_moment_quadrature,
    kernel_sine_moment_quadrature,
)
from .linops import (
    delta,
    euler_delta_closed,
    euler_delta_sum,
    euler_matrix,
    inverse_block,
    mode_matrix,
    transversality,
)
from .specfun import (
    Params,
    identity_suite,
    lambda_n,
    lambda_n_integral,
    kernel_cosine_moment_closed,
    kernel_sine_moment_closed,
    theta_n,
)

__all__ = ["CheckResult", "CHECKS", "run_checks", "delta_bisection_oracle", "linearization_error", "gateaux_fd_error"]

B_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
LINEARIZATION_PAIRS = ((0.5, 0.3), (0.5, 0.6), (0.75, 0.85), (1.0, 0.2), (1.0, 0.5), (1.0, 0.9), (1.25, 0.4), (1.5, 0.7), (1.75, 0.8))


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: measured={self.measured:.3e} threshold={self.threshold:.3e} {self.detail}".rstrip()


def _result(name: str, measured: float, threshold: float, detail: str = "", below: bool = True) -> CheckResult:
    ok = measured <= threshold if below else measured >= threshold
    return CheckResult(name, bool(ok and math.isfinite(measured)), float(measured), float(threshold), detail)


# ---------------------------------------------------------------------------
# specfun
# ---------------------------------------------------------------------------

def check_lambda_routes(cfg: RunConfig) -> CheckResult:
    worst = 0.0
    for al in cfg.alphas:
        for b in B_GRID:
            p = Params(al, b)
            for n in (2, 3, 5, 8, 16, 32):
                x = lambda_n(n, p)
                worst = max(worst, abs(x - lambda_n_integral(n, p)) / abs(x))
    return _result("lambda_series_vs_integral", worst, 1e-8)


def check_lambda_monotone(cfg: RunConfig) -> CheckResult:
    grid = np.linspace(0.02, 0.98, 50)
    bad = 0
    worst_gap = math.inf
    for al in cfg.alphas:
        lam1 = np.array([lambda_n(1, Params(al, b)) for b in grid])
        for n in range(1, 33):
            vals = lam1 if n == 1 else np.array([lambda_n(n, Params(al, b)) for b in grid])
            inc = np.diff(vals)
            bad += int(np.sum(inc <= 0)) + int(np.sum(vals <= 0))
            if n >= 2:
                bad += int(np.sum(vals >= lam1))
                worst_gap = min(worst_gap, float(np.min((lam1 - vals) / lam1)))
    return CheckResult("lambda_positive_increasing_below_lambda1", bad == 0, float(bad), 0.0, f"min relative gap to Lambda_1 {worst_gap:.2e}")


def check_j_ratio(cfg: RunConfig) -> CheckResult:
    grid = np.linspace(0.02, 0.98, 50)
    bad = 0
    for al in cfg.alphas:
        lam1 = np.array([lambda_n(1, Params(al, b)) for b in grid])
        for n in range(2, 11):
            j = (np.array([lambda_n(n, Params(al, b)) for b in grid]) / lam1) ** 2
            bad += int(np.sum(np.diff(j) <= 0)) + int(np.sum(j <= 0))
    return CheckResult("j_ratio_increasing", bad == 0, float(bad), 0.0)


def check_theta(cfg: RunConfig) -> CheckResult:
    bad = 0
    for al in cfg.alphas:
        th = np.array([theta_n(n, al) for n in range(1, 129)])
        bad += int(th[0] != 0.0) + int(np.sum(th < 0)) + int(np.sum(np.diff(th) <= 0))
    return CheckResult("theta_nonnegative_increasing", bad == 0, float(bad), 0.0)


def check_identities(cfg: RunConfig, draws: int = 1000) -> CheckResult:
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    worst_rel = 0.0
    for _ in range(draws):
        al = rng.uniform(0.01, 1.99)
        m = int(rng.integers(1, 33))
        z = rng.uniform(0.0, 0.95)
        rep = identity_suite(al / 2, m + al / 2, m + 1.0, z)
        worst = max(worst, rep.max_residual())
        worst_rel = max(worst_rel, rep.max_relative())
    return _result("hypergeometric_identities", worst, 1e-8, f"relative to the largest term {worst_rel:.2e}")


# ---------------------------------------------------------------------------
# linops / bifurcation
# ---------------------------------------------------------------------------

LINOPS_ALPHAS = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75)


def check_uniqueness(cfg: RunConfig) -> CheckResult:
    bad = []
    for al in LINOPS_ALPHAS:
        for m in range(2, 11):
            sc = scan_determinant(m, al, 200)
            if len(sc.sign_changes()) != 1:
                bad.append((m, al))
    return CheckResult("single_sign_change", not bad, float(len(bad)), 0.0, str(bad) if bad else "")


def check_q_branches(cfg: RunConfig) -> CheckResult:
    bad = 0
    for al in LINOPS_ALPHAS:
        for m in range(2, 11):
            sc = scan_determinant(m, al, 200)
            qt = sc.q_plus / (np.array([lambda_n(1, Params(al, b)) for b in sc.grid_b]) * sc.grid_b ** al)
            # Q_tilde = 1 + O(b^(2m-2)) is flat to rounding at small b; only count genuine decreases
            bad += int(np.sum(np.diff(qt) < -4 * np.finfo(float).eps * qt[1:]))
            bad += int(np.sum(sc.q_minus > sc.q_plus))
            bad += int(np.sum(sc.q_minus >= sc.theta_m))
    return CheckResult("q_tilde_increasing_q_minus_below_theta", bad == 0, float(bad), 0.0)


def delta_bisection_oracle(m: int, alpha: float, points: int = 2000, tol: float = 1e-13) -> float:
    """Independent root of Delta_m by a dense scan of the expanded determinant plus bisection."""
    grid = np.linspace(0.001, 0.999, points)
    vals = np.array([delta(m, Params(alpha, b)) for b in grid])
    idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(idx) != 1:
        raise InvariantFailure(f"oracle found {len(idx)} sign changes")
    lo, hi = grid[idx[0]], grid[idx[0] + 1]
    flo = vals[idx[0]]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = delta(m, Params(alpha, mid))
        if fm == 0.0:
            return mid
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def check_bifurcation(cfg: RunConfig) -> CheckResult:
    worst = 0.0
    failures = []
    for al in cfg.alphas:
        prev = 0.0
        for m in range(2, 9):
            bp = find_b_star(m, al)
            worst = max(worst, abs(bp.b_star - delta_bisection_oracle(m, al)))
            if not bp.certified or bp.b_star <= prev or bp.bracket[1] - bp.bracket[0] > 1e-12:
                failures.append((m, al))
            prev = bp.b_star
    ok = not failures and worst <= 1e-10
    return CheckResult("bifurcation_roots_certified_and_ordered", ok, worst, 1e-10, str(failures) if failures else "")


def check_rank_one(cfg: RunConfig) -> CheckResult:
    worst = 0.0
    min_m21 = math.inf
    for al in cfg.alphas:
        for m in range(2, 9):
            bp = find_b_star(m, al)
            M = mode_matrix(m, Params(al, bp.b_star))
            s = np.linalg.svd(M.entries, compute_uv=False)
            worst = max(worst, s[-1] / s[0])
            min_m21 = min(min_m21, M.m21)
    ok = worst <= 1e-9 and min_m21 > 1e-8
    return CheckResult("rank_one_at_b_star", ok, worst, 1e-9, f"min m21 {min_m21:.2e}")


def check_corollary_decay(cfg: RunConfig) -> CheckResult:
    """Inverse blocks of -km M_km: bounded off-diagonal, diagonal at the predicted rate for k <= 64."""
    worst = 0.0
    for al in cfg.alphas:
        for m in cfg.m_list[:3]:
            p = Params(al, find_b_star(m, al).b_star)
            ks = np.arange(2, 65)
            inv = np.array([inverse_block(int(k) * m, p) for k in ks])
            rho = 1.0 / ks if al < 1 else (1.0 / (ks * np.log(ks)) if al == 1 else ks ** (-al))
            sel = ks >= 8
            for d in (np.abs(inv[sel, 0, 0]), np.abs(inv[sel, 1, 1])):
                r = d / rho[sel]
                worst = max(worst, float(r.max() / r.min()))
                loose = d * ks[sel] ** min(1.0, al)
                worst = max(worst, float(loose.max() / loose[0]))
            off = np.maximum(np.abs(inv[:, 0, 1]), np.abs(inv[:, 1, 0]))
            if off.max() > 1.0:
                worst = max(worst, math.inf)
    return _result("inverse_block_decay", worst, 2.0, "(max/min of rescaled diagonal over 8<=k<=64)")


def check_transversality(cfg: RunConfig) -> CheckResult:
    smallest = math.inf
    failures = []
    for al in cfg.alphas:
        for m in range(2, 9):
            try:
                td = transversality(m, find_b_star(m, al).b_star, al)
            except PatchError as exc:
                failures.append(f"({m},{al}) {exc}")
                continue
            smallest = min(smallest, td.parallel_margin)
    ok = not failures and smallest > 1e-6
    return CheckResult("transversality_signs_and_margin", ok, smallest, 1e-6, "; ".join(failures))


def check_euler_limit(cfg: RunConfig) -> CheckResult:
    """No root near the Euler limit; the limit determinant matches alpha = 1e-6 to 1e-4 and its closed forms to 1e-12."""
    forms = 0.0
    limit = 0.0
    roots = []
    for m in range(2, 9):
        if len(scan_determinant(m, 1e-6, 200).sign_changes()):
            roots.append(m)
        for b in (0.2, 0.5, 0.8):
            d0 = euler_delta_closed(m, b)
            forms = max(forms, abs(d0 - euler_matrix(m, b).det), abs(d0 - euler_delta_sum(m, b)))
            limit = max(limit, abs(d0 - delta(m, Params(1e-6, b))))
    forms = max(forms, abs(euler_delta_closed(2, 0.5) - 0.017578125))
    ok = not roots and forms <= 1e-12 and limit <= 1e-4
    detail = f"closed forms {forms:.2e}" + (f"; roots at m={roots}" if roots else "")
    return CheckResult("euler_limit", ok, limit, 1e-4, detail)


# ---------------------------------------------------------------------------
# functional
# ---------------------------------------------------------------------------

def check_annulus(cfg: RunConfig) -> CheckResult:
    worst = 0.0
    for al in cfg.alphas:
        for b in B_GRID:
            st = PatchState.annulus(b, al, 2, 8)
            F1, F2 = eval_F(st, default_grid(8, 2, b))
            worst = max(worst, F1.sup_residual, F2.sup_residual)
    return _result("annulus_annihilation", worst, 1e-10)


def linearization_error(alpha: float, b: float, n_max: int = 16, grid: Optional[QuadratureGrid] = None) -> float:
    """max |DF coefficients - (-n M_n)| over single cosine modes n <= n_max at the annulus."""
    worst = 0.0
    for n in range(1, n_max + 1):
        st = PatchState.annulus(b, alpha, n, 1)
        g = grid or default_grid(1, n, b)
        one = FourierCosine.mode(n, 1, 1)
        zero = FourierCosine.zeros(n, 1)
        ws = Workspace(st, g)
        a1, a2 = ws.derivative_values(one, zero)
        c1, c2 = ws.derivative_values(zero, one)
        got = np.array(
            [[ws.project(a1).coeffs[0], ws.project(c1).coeffs[0]], [ws.project(a2).coeffs[0], ws.project(c2).coeffs[0]]]
        )
        M = mode_matrix(n, Params(alpha, b)).entries
        worst = max(worst, float(np.max(np.abs(got + n * M))))
    return worst


def _linearization_grid(alpha: float, b: float, n_max: int, quad_tol: float, depth: int) -> QuadratureGrid:
    def top_mode(g: QuadratureGrid) -> np.ndarray:
        st = PatchState.annulus(b, alpha, 1, n_max)
        ws = Workspace(st, g)
        out = []
        for H, h in ((FourierCosine.mode(1, n_max, n_max), FourierCosine.zeros(1, n_max)),
                     (FourierCosine.zeros(1, n_max), FourierCosine.mode(1, n_max, n_max))):
            d1, d2 = ws.derivative_values(H, h)
            out.append(ws.project(d1).coeffs[-1])
            out.append(ws.project(d2).coeffs[-1])
        return np.array(out)

    start = QuadratureGrid(8 * n_max, 4, 8)
    grid, _ = adaptive_grid(top_mode, start, quad_tol, depth)
    return grid


def check_linearization(cfg: RunConfig) -> CheckResult:
    worst = 0.0
    for al, b in LINEARIZATION_PAIRS:
        g = _linearization_grid(al, b, 16, cfg.quad_tol, cfg.quad_depth)
        # the collocation size only needs to resolve one mode per evaluation
        g = QuadratureGrid(8, g.n_sing, g.n_smooth)
        worst = max(worst, linearization_error(al, b, 16, g))
    return _result("linearization_agreement", worst, 1e-8)


def _random_state(rng: np.random.Generator, m: int, J: int) -> PatchState:
    al = float(rng.uniform(0.1, 1.9))
    b = float(rng.uniform(0.2, 0.85))
    decay = np.exp(-0.8 * np.arange(J))
    amp = 0.1 * (1.0 - b)
    R = FourierCosine(m, amp * rng.uniform(-1, 1, J) * decay / J)
    r = FourierCosine(m, amp * rng.uniform(-1, 1, J) * decay / J)
    return PatchState(b, R, r, al)


def gateaux_fd_error(state: PatchState, H: FourierCosine, h: FourierCosine, grid: QuadratureGrid, t: float = 1e-5) -> float:
    """Relative sup difference between the explicit derivative and a Richardson centred difference."""
    D1, D2 = eval_DF(state, (H, h), grid, keep_values=True)
    exact = np.concatenate([D1.values, D2.values])

    def F(tt: float) -> np.ndarray:
        s = PatchState(state.b, state.R_pert + H.scaled(tt), state.r_pert + h.scaled(tt), state.alpha)
        a, c = eval_F(s, grid, keep_values=True)
        return np.concatenate([a.values, c.values])

    c1 = (F(t) - F(-t)) / (2 * t)
    c2 = (F(t / 2) - F(-t / 2)) / t
    fd = (4 * c2 - c1) / 3
    return float(np.max(np.abs(fd - exact)) / np.max(np.abs(exact)))


def check_gateaux(cfg: RunConfig, count: int = 20) -> CheckResult:
    rng = np.random.default_rng(cfg.seed + 1)
    worst = 0.0
    for i in range(count):
        m = int(rng.integers(2, 5))
        J = 8
        st = _random_state(rng, m, J)
        decay = np.exp(-0.8 * np.arange(J))
        H = FourierCosine(m, rng.uniform(-1, 1, J) * decay)
        h = FourierCosine(m, rng.uniform(-1, 1, J) * decay)
        worst = max(worst, gateaux_fd_error(st, H, h, default_grid(J, m, st.b)))
    return _result("gateaux_vs_finite_difference", worst, 1e-6)


def check_odd_and_closure(cfg: RunConfig) -> CheckResult:
    rng = np.random.default_rng(cfg.seed + 2)
    worst_cos = 0.0
    worst_leak = 0.0
    for _ in range(6):
        m = int(rng.integers(2, 5))
        st = _random_state(rng, m, 8)
        F1, F2 = eval_F(st, default_grid(8, m, st.b, full_circle=True))
        worst_cos = max(worst_cos, F1.cos_content, F2.cos_content)
        worst_leak = max(worst_leak, F1.leakage, F2.leakage)
    ok = worst_cos <= 1e-9 and worst_leak <= 1e-10
    return CheckResult("odd_image_and_m_fold_closure", ok, max(worst_cos, worst_leak), 1e-10,
                       f"cosine content {worst_cos:.2e}, leakage {worst_leak:.2e}")


def check_basic_integrals(cfg: RunConfig) -> CheckResult:
    worst = 0.0
    for m in range(1, 17):
        for b in (0.2, 0.5, 0.8):
            for al in (0.5, 1.0, 1.5):
                a1 = kernel_cosine_moment_closed(m, b, al)
                a2 = kernel_sine_moment_closed(m, b, al)
                # absolute error: the integrands are O(1) while the values decay like b^m
                worst = max(worst, abs(kernel_cosine_moment_quadrature(m, b, al) - a1))
                worst = max(worst, abs(kernel_sine_moment_quadrature(m, b, al) - a2))
    return _result("basic_integrals_closed_forms", worst, 1e-12)


# ---------------------------------------------------------------------------
# continuation
# ---------------------------------------------------------------------------

BRANCH_CASES = ((2, 1.0), (3, 0.5), (2, 1.5))


def check_branches(cfg: RunConfig) -> CheckResult:
    ccfg = ContinuationConfig(J=cfg.J, newton_tol=cfg.newton_tol)
    s_values = np.linspace(1e-4, 1e-3, 10)
    problems = []
    worst = 0.0
    for m, al in BRANCH_CASES:
        br = trace_branch(m, al, s_values, ccfg)
        if not br.complete or len(br.points) != len(s_values):
            problems.append(f"({m},{al}) incomplete")
            continue
        res = max(p.residual for p in br.points)
        ang = kernel_angle(br.points[0], br.origin.kernel)
        leak = max(class_leakage(p) for p in br.points)
        stat = max(stationarity_check(p) for p in br.points)
        worst = max(worst, res)
        if res > 1e-9 or ang > 1e-3 or leak > 1e-10 or stat > 1e-8:
            problems.append(f"({m},{al}) res={res:.1e} angle={ang:.1e} leak={leak:.1e} stat={stat:.1e}")
    return CheckResult("branch_existence", not problems, worst, 1e-9, "; ".join(problems))


def check_annulus_jacobian(cfg: RunConfig) -> CheckResult:
    """At the annulus the pinned Jacobian is block diagonal with blocks -km M_km."""
    worst = 0.0
    for m, al in BRANCH_CASES[:2]:
        b = find_b_star(m, al).b_star
        J = 8
        st = PatchState.annulus(b, al, m, J)
        Jm = assemble_jacobian(st, default_grid(J, m, b))
        expected = np.zeros_like(Jm)
        p = Params(al, b)
        for k in range(1, J + 1):
            M = -k * m * mode_matrix(k * m, p).entries
            rows = (k - 1, J + k - 1)
            if k >= 2:
                expected[rows[0], k - 2] = M[0, 0]
                expected[rows[1], k - 2] = M[1, 0]
            expected[rows[0], J - 1 + k - 1] = M[0, 1]
            expected[rows[1], J - 1 + k - 1] = M[1, 1]
        expected[:, -1] = Jm[:, -1]
        worst = max(worst, float(np.max(np.abs(Jm - expected))))
    return _result("annulus_jacobian_block_structure", worst, 1e-8)


CHECKS: Dict[str, Callable[[RunConfig], CheckResult]] = {
    "lambda_series_vs_integral": check_lambda_routes,
    "lambda_positive_increasing_below_lambda1": check_lambda_monotone,
    "j_ratio_increasing": check_j_ratio,
    "theta_nonnegative_increasing": check_theta,
    "hypergeometric_identities": check_identities,
    "single_sign_change": check_uniqueness,
    "q_tilde_increasing_q_minus_below_theta": check_q_branches,
    "bifurcation_roots_certified_and_ordered": check_bifurcation,
    "rank_one_at_b_star": check_rank_one,
    "inverse_block_decay": check_corollary_decay,
    "transversality_signs_and_margin": check_transversality,
    "euler_limit": check_euler_limit,
    "annulus_annihilation": check_annulus,
    "linearization_agreement": check_linearization,
    "gateaux_vs_finite_difference": check_gateaux,
    "odd_image_and_m_fold_closure": check_odd_and_closure,
    "basic_integrals_closed_forms": check_basic_integrals,
    "annulus_jacobian_block_structure": check_annulus_jacobian,
    "branch_existence": check_branches,
}


def run_checks(cfg: RunConfig, names: Optional[Sequence[str]] = None) -> List[CheckResult]:
    """Run the selected checks (all by default); a crashing check is reported as a failure."""
    out = []
    for name in names or list(CHECKS):
        t0 = time.perf_counter()
        try:
            res = CHECKS[name](cfg)
        except PatchError as exc:
            res = CheckResult(name, False, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        out.append(res)
    return out
