import numpy as np
import pytest

from stationary_patches.bifurcation import SCAN_HI, SCAN_LO, find_b_star, root_objective, scan_determinant
from stationary_patches.errors import InvariantFailure, PreconditionError
from stationary_patches.linops import delta
from stationary_patches.specfun import Params, lambda_n, theta_n
from stationary_patches.verify import delta_bisection_oracle

ALPHAS = (0.25, 0.5, 1.0, 1.5, 1.75)


def test_b_star_m2_alpha1_against_oracle():
    bp = find_b_star(2, 1.0)
    assert 0 < bp.b_star < 1
    assert abs(delta(2, Params(1.0, bp.b_star))) < 1e-12
    assert bp.b_star == pytest.approx(delta_bisection_oracle(2, 1.0), abs=1e-10)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_roots_match_independent_determinant_bisection(alpha):
    for m in range(2, 9):
        assert find_b_star(m, alpha).b_star == pytest.approx(delta_bisection_oracle(m, alpha), abs=1e-10)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_certificates_and_ordering(alpha):
    prev = 0.0
    for m in range(2, 9):
        bp = find_b_star(m, alpha)
        assert bp.certified, bp
        assert bp.residual <= 1e-12 * bp.scale
        assert bp.bracket[1] - bp.bracket[0] <= 1e-12
        assert bp.bracket[0] <= bp.b_star <= bp.bracket[1]
        b = bp.b_star
        p = Params(alpha, b)
        assert theta_n(m, alpha) > b ** alpha * lambda_n(1, p) > b * b * lambda_n(1, p)
        assert np.linalg.norm(bp.kernel) == pytest.approx(1.0, abs=1e-15)
        assert b > prev
        prev = b


def test_euler_limit_has_no_root():
    with pytest.raises(InvariantFailure, match="no root"):
        find_b_star(2, 1e-6)


def test_tolerance_precondition():
    with pytest.raises(PreconditionError):
        find_b_star(2, 1.0, tol=1e-15)
    with pytest.raises(PreconditionError):
        scan_determinant(2, 1.0, 20)
    with pytest.raises(PreconditionError):
        scan_determinant(1, 1.0)


def test_scan_invariants():
    sc = scan_determinant(2, 1.0, 200)
    assert sc.grid_b[0] == SCAN_LO and sc.grid_b[-1] == SCAN_HI
    assert np.all(sc.q_minus <= sc.q_plus)
    assert np.all(sc.q_minus < sc.theta_m)
    sc = scan_determinant(4, 1.5, 200)
    assert np.all(np.diff(sc.j_ratio) > 0)


def test_scan_refinement_consistency():
    coarse = scan_determinant(2, 0.5, 50)
    fine_root = find_b_star(2, 0.5, grid_size=200).b_star
    (i,) = coarse.sign_changes()
    assert coarse.grid_b[i] <= fine_root <= coarse.grid_b[i + 1]


@pytest.mark.parametrize("alpha", (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75))
def test_uniqueness_scan(alpha):
    for m in range(2, 11):
        assert len(scan_determinant(m, alpha, 200).sign_changes()) == 1


def test_root_objective_sign_pattern():
    bp = find_b_star(3, 0.75)
    assert root_objective(3, 0.75, 0.5 * bp.b_star) * root_objective(3, 0.75, 0.5 * (1 + bp.b_star)) < 0
