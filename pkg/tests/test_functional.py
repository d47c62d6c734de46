import numpy as np
import pytest

import oracles
from stationary_patches.bifurcation import find_b_star
from stationary_patches.errors import DomainError, PreconditionError
from stationary_patches.functional import (
    FourierCosine,
    PatchState,
    QuadratureGrid,
    Workspace,
    adaptive_grid,
    dF_db_direct,
    default_grid,
    eval_DF,
    eval_dF_db,
    eval_F,
    eval_T1,
    eval_T2,
    kernel_cosine_moment_quadrature,
    kernel_sine_moment_quadrature,
    normal_velocity,
    refine_grid,
)
from stationary_patches.linops import d_mode_matrix_db, mode_matrix
from stationary_patches.specfun import Params, lambda_n, theta_n
from stationary_patches.verify import gateaux_fd_error, linearization_error

ALPHAS = (0.25, 0.5, 1.0, 1.5, 1.75)
GRID = QuadratureGrid(64, 128, 128)


def sine_coeff(values, n, m=1):
    """Coefficient of sin(n x) of samples on the full circle."""
    N = len(values)
    x = 2 * np.pi * np.arange(N) / N
    return 2.0 / N * float(np.sum(values * np.sin(n * x)))


# --- FourierCosine / PatchState ----------------------------------------------

def test_fourier_cosine_evaluation():
    f = FourierCosine(3, [0.5, -0.25])
    x = np.linspace(0, 2 * np.pi, 11)
    np.testing.assert_allclose(f(x), 0.5 * np.cos(3 * x) - 0.25 * np.cos(6 * x), atol=1e-15)
    np.testing.assert_allclose(f.derivative(x), -1.5 * np.sin(3 * x) + 1.5 * np.sin(6 * x), atol=1e-14)
    assert f.tail() == 0.25 and f.sup_bound() == 0.75
    np.testing.assert_allclose(f(x), f(-x))
    np.testing.assert_allclose(f(x + 2 * np.pi / 3), f(x), atol=1e-14)
    with pytest.raises(PreconditionError):
        f + FourierCosine(2, [1.0, 0.0])


def test_patch_state_admissibility():
    st = PatchState(0.5, FourierCosine(2, [0.1]), FourierCosine(2, [0.05]), 1.0)
    st.check_admissible()
    assert st.is_small()
    bad = PatchState(0.8, FourierCosine(2, [-0.15]), FourierCosine(2, [0.1]), 1.0)
    with pytest.raises(DomainError):
        bad.check_admissible()
    assert not bad.is_small()


# --- T1 and T2 ------------------------------------------------------------------

@pytest.mark.parametrize("c", [1.0, 0.3, 1.7])
def test_t1_vanishes_on_circles(c):
    for al in ALPHAS:
        u = FourierCosine(1, np.zeros(1), c)
        assert np.max(np.abs(eval_T1(u, al, GRID))) < 1e-11


def test_t1_rejects_nonpositive_radius():
    with pytest.raises(DomainError):
        eval_T1(FourierCosine(1, [1.2], 1.0), 1.0, GRID)


def test_t1_linear_response():
    """T1(1 + eps cos 2x) = eps * 2 Theta_2 sin 2x + O(eps^2) at alpha = 1."""
    eps = 0.01
    grid = QuadratureGrid(64, 128, 128, full_circle=True)
    u = FourierCosine(1, [0.0, eps], 1.0)
    vals = eval_T1(u, 1.0, grid)
    predicted = eps * 2 * theta_n(2, 1.0)
    assert abs(sine_coeff(vals, 2) - predicted) < 1e-4
    # remainder is quadratic: halving eps quarters it
    u2 = FourierCosine(1, [0.0, eps / 2], 1.0)
    r1 = abs(sine_coeff(vals, 2) - predicted)
    r2 = abs(sine_coeff(eval_T1(u2, 1.0, grid), 2) - predicted / 2)
    assert r2 < 0.3 * r1 + 1e-12


def test_t2_vanishes_on_annulus():
    for al in ALPHAS:
        p = FourierCosine(1, np.zeros(1), 0.5)
        q = FourierCosine(1, np.zeros(1), 1.0)
        assert np.max(np.abs(eval_T2(p, q, al, GRID))) < 1e-12
        assert np.max(np.abs(eval_T2(q, p, al, GRID))) < 1e-12


def test_t2_off_diagonal_linear_response():
    """T2(b + eps cos 2x, 1) = eps * 2 b^2 Lambda_2(b) sin 2x + O(eps^2)."""
    b, eps = 0.5, 1e-4
    grid = QuadratureGrid(64, 128, 128, full_circle=True)
    p = FourierCosine(1, [0.0, eps], b)
    q = FourierCosine(1, np.zeros(2), 1.0)
    got = sine_coeff(eval_T2(p, q, 1.0, grid), 2)
    assert got == pytest.approx(eps * 2 * b * b * lambda_n(2, Params(1.0, b)), abs=1e-8)


def test_t2_output_is_odd():
    grid = QuadratureGrid(64, 128, 128, full_circle=True)
    p = FourierCosine(1, [0.02, 0.01, -0.005], 0.4)
    q = FourierCosine(1, [-0.01, 0.03, 0.0], 1.0)
    x = grid.x_nodes(1)
    v = eval_T2(p, q, 0.8, grid, x)
    np.testing.assert_allclose(eval_T2(p, q, 0.8, grid, -x), -v, atol=1e-14)


def test_t2_collision():
    with pytest.raises(DomainError):
        PatchState(0.9, FourierCosine(2, [-0.06]), FourierCosine(2, [0.06]), 1.0).check_admissible()


# --- F ------------------------------------------------------------------------

@pytest.mark.parametrize("b, alpha", [(0.5, 1.0), (0.7, 1.5)])
def test_annulus_is_stationary(b, alpha):
    F1, F2 = eval_F(PatchState.annulus(b, alpha, 2, 8), default_grid(8, 2, b))
    assert max(F1.sup_residual, F2.sup_residual) < 1e-10


def test_annulus_matrix():
    for al in ALPHAS:
        for b in np.round(np.arange(0.1, 1.0, 0.1), 1):
            F1, F2 = eval_F(PatchState.annulus(b, al, 2, 8), default_grid(8, 2, b))
            assert max(F1.sup_residual, F2.sup_residual) < 1e-10


def test_kernel_direction_quadratic_remainder():
    bp = find_b_star(2, 1.0)
    v = bp.kernel
    res = []
    for eps in (1e-4, 1e-5):
        st = PatchState(bp.b_star, FourierCosine(2, [eps * v[0], 0.0]), FourierCosine(2, [eps * v[1], 0.0]), 1.0)
        F1, F2 = eval_F(st, default_grid(2, 2, bp.b_star))
        res.append(max(np.max(np.abs(F1.coeffs)), np.max(np.abs(F2.coeffs))))
    assert res[0] / res[1] == pytest.approx(100, rel=0.05)


def test_generic_direction_is_linear():
    b = 0.5
    res = []
    for eps in (1e-4, 1e-5):
        st = PatchState(b, FourierCosine(2, [eps]), FourierCosine(2, [0.0]), 1.0)
        F1, _ = eval_F(st, default_grid(1, 2, b))
        res.append(abs(F1.coeffs[0]))
    assert res[0] / res[1] == pytest.approx(10, rel=0.01)


# --- derivatives ------------------------------------------------------------------

@pytest.mark.parametrize("alpha, b", [(0.5, 0.3), (0.75, 0.85), (1.0, 0.5), (1.5, 0.7), (1.75, 0.8)])
def test_linearization_matches_mode_matrices(alpha, b):
    assert linearization_error(alpha, b, 16) < 1e-8


def test_linearization_on_m_fold_class():
    """Directions cos(jm x) at the annulus map onto -jm M_jm for j = 1..8."""
    m, b, al = 3, 0.6, 1.25
    J = 8
    st = PatchState.annulus(b, al, m, J)
    grid = default_grid(J, m, b)
    zero = FourierCosine.zeros(m, J)
    for j in range(1, J + 1):
        n = j * m
        M = mode_matrix(n, Params(al, b)).entries
        D1, D2 = eval_DF(st, (FourierCosine.mode(m, J, j), zero), grid)
        assert D1.coeffs[j - 1] == pytest.approx(-n * M[0, 0], abs=1e-8)
        assert D2.coeffs[j - 1] == pytest.approx(-n * M[1, 0], abs=1e-8)
        D1, D2 = eval_DF(st, (zero, FourierCosine.mode(m, J, j)), grid)
        assert D1.coeffs[j - 1] == pytest.approx(-n * M[0, 1], abs=1e-8)
        assert D2.coeffs[j - 1] == pytest.approx(-n * M[1, 1], abs=1e-8)
        # other modes stay untouched
        others = np.delete(D1.coeffs, j - 1)
        assert np.max(np.abs(others)) < 1e-10


def test_gateaux_example_state():
    st = PatchState(0.5, FourierCosine(2, [0.01, 0, 0, 0]), FourierCosine(2, [-0.005, 0, 0, 0]), 0.75)
    rng = np.random.default_rng(3)
    H = FourierCosine(2, rng.uniform(-1, 1, 4))
    h = FourierCosine(2, rng.uniform(-1, 1, 4))
    assert gateaux_fd_error(st, H, h, default_grid(4, 2, 0.5)) < 1e-6


def test_gateaux_random_states():
    rng = np.random.default_rng(11)
    for _ in range(20):
        m = int(rng.integers(2, 5))
        al = float(rng.uniform(0.1, 1.9))
        b = float(rng.uniform(0.2, 0.85))
        J = 6
        amp = 0.1 * (1 - b)
        decay = np.exp(-np.arange(J))
        st = PatchState(b, FourierCosine(m, amp * rng.uniform(-1, 1, J) * decay / J),
                        FourierCosine(m, amp * rng.uniform(-1, 1, J) * decay / J), al)
        H = FourierCosine(m, rng.uniform(-1, 1, J) * decay)
        h = FourierCosine(m, rng.uniform(-1, 1, J) * decay)
        assert gateaux_fd_error(st, H, h, default_grid(J, m, b)) < 1e-6


def test_eval_df_rejects_foreign_class():
    st = PatchState.annulus(0.5, 1.0, 2, 4)
    with pytest.raises(PreconditionError):
        eval_DF(st, (FourierCosine.mode(3, 4, 1), FourierCosine.zeros(3, 4)), default_grid(4, 2, 0.5))


def test_eval_df_rejects_large_state():
    st = PatchState(0.5, FourierCosine(2, [0.2]), FourierCosine(2, [0.1]), 1.0)
    with pytest.raises(PreconditionError, match="smallness"):
        eval_DF(st, (FourierCosine.mode(2, 1, 1), FourierCosine.zeros(2, 1)), default_grid(1, 2, 0.5))


def test_db_derivative_routes():
    al, b, eps, n = 1.25, 0.55, 1e-4, 2
    A, a = 0.6, -0.8
    st = PatchState(b, FourierCosine(n, [eps * A, 0.0]), FourierCosine(n, [eps * a, 0.0]), al)
    grid = default_grid(2, n, b)
    fd1, fd2 = eval_dF_db(st, grid)
    ex1, ex2 = dF_db_direct(st, grid)
    np.testing.assert_allclose(fd1.coeffs, ex1.coeffs, atol=1e-9)
    np.testing.assert_allclose(fd2.coeffs, ex2.coeffs, atol=1e-9)
    # linear prediction: d/db of -n M_n(b) (A, a) eps
    pred = -n * d_mode_matrix_db(n, Params(al, b)) @ np.array([A, a]) * eps
    assert fd1.coeffs[0] == pytest.approx(pred[0], abs=50 * eps * eps)
    assert fd2.coeffs[0] == pytest.approx(pred[1], abs=50 * eps * eps)


def test_db_derivative_vanishes_on_annulus_family():
    st = PatchState.annulus(0.4, 0.8, 2, 4)
    d1, d2 = eval_dF_db(st, default_grid(4, 2, 0.4))
    assert max(d1.sup_residual, d2.sup_residual) < 1e-8
    assert max(d1.cos_content, d2.cos_content) < 1e-8


def test_db_one_sided_near_edge():
    st = PatchState.annulus(1.5e-6, 1.0, 2, 2)
    d1, _ = eval_dF_db(st, QuadratureGrid(16, 64, 64))
    assert np.all(np.isfinite(d1.coeffs))


# --- symmetry and closure -----------------------------------------------------------

def test_odd_image_and_closure():
    rng = np.random.default_rng(5)
    for m in (2, 3):
        J = 6
        b = 0.45
        st = PatchState(b, FourierCosine(m, 0.02 * rng.uniform(-1, 1, J) / np.arange(1, J + 1) ** 2),
                        FourierCosine(m, 0.02 * rng.uniform(-1, 1, J) / np.arange(1, J + 1) ** 2), 1.3)
        F1, F2 = eval_F(st, default_grid(J, m, b, full_circle=True))
        assert max(F1.cos_content, F2.cos_content) <= 1e-9
        assert max(F1.leakage, F2.leakage) <= 1e-10


def test_independent_normal_velocity_route():
    """The vector-kernel normal velocity equals -F (up to sign conventions) at every node."""
    st = PatchState(0.5, FourierCosine(2, [0.01, -0.002]), FourierCosine(2, [0.004, 0.001]), 0.9)
    grid = default_grid(2, 2, 0.5)
    F1, F2 = eval_F(st, grid, keep_values=True)
    n1, n2 = normal_velocity(st, grid)
    scale = max(np.max(np.abs(F1.values)), np.max(np.abs(F2.values)))
    assert min(np.max(np.abs(n1 - F1.values)), np.max(np.abs(n1 + F1.values))) < 1e-11 * max(1, scale)
    assert min(np.max(np.abs(n2 - F2.values)), np.max(np.abs(n2 + F2.values))) < 1e-11 * max(1, scale)


# --- grids and basic integrals ---------------------------------------------------------

def test_grid_refinement_converged():
    st = PatchState(0.6, FourierCosine(2, [0.01, 0.001, 0.0001]), FourierCosine(2, [-0.01, 0.0, 0.0]), 1.6)
    g = default_grid(3, 2, 0.6)
    a1, a2 = eval_F(st, g)
    b1, b2 = eval_F(st, refine_grid(g))
    assert np.max(np.abs(a1.coeffs - b1.coeffs)) < 1e-11
    assert np.max(np.abs(a2.coeffs - b2.coeffs)) < 1e-11


def test_adaptive_grid_stops_on_agreement():
    calls = []

    def evaluate(g):
        calls.append(g)
        return np.array([1.0 / g.n_sing])

    g, change = adaptive_grid(evaluate, QuadratureGrid(8, 4, 4), 1e-3, 20)
    assert change <= 1e-3
    assert g.n_sing == 1024 and len(calls) == 9


def test_singular_rule_exact_moments():
    from stationary_patches.functional import _singular_rule

    mp = oracles.mp
    for al in (0.25, 1.0, 1.75):
        e = 1 - al
        for k in (0, 3, 11):
            # closed-form cosine moment of |2 sin(y/2)|^e over one period
            ref = float(2 * mp.pi * (-1) ** k * mp.gamma(e + 1) * mp.rgamma(e / 2 + k + 1) * mp.rgamma(e / 2 - k + 1))
            for n in (64, 512, 2048):
                y, w = _singular_rule(n, al)
                assert len(y) == n
                assert float(np.sum(w * np.cos(k * y))) == pytest.approx(ref, abs=1e-12)


def test_basic_integrals_by_quadrature():
    for m in range(1, 17):
        for b in (0.2, 0.5, 0.8):
            for al in (0.5, 1.0, 1.5):
                assert kernel_cosine_moment_quadrature(m, b, al) == pytest.approx(oracles.kernel_cosine_moment(m, b, al), rel=1e-9, abs=1e-13)
                assert kernel_sine_moment_quadrature(m, b, al) == pytest.approx(oracles.kernel_sine_moment(m, b, al), rel=1e-9, abs=1e-13)
