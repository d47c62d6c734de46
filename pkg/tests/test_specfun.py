import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from stationary_patches.errors import AccuracyError, DomainError, PreconditionError
from stationary_patches.specfun import (
    IDENTITY_NAMES,
    Params,
    c_alpha,
    gamma_fn,
    gamma_ratio,
    hyp2f1,
    identity_suite,
    lambda_n,
    lambda_n_integral,
    lambda_n_prime,
    kernel_cosine_moment_closed,
    kernel_sine_moment_closed,
    mode_data,
    pochhammer,
    rgamma,
    theta_n,
    theta_n_closed_form,
    theta_n_gauss,
)

ALPHAS = (0.25, 0.5, 1.0, 1.5, 1.75)
B_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


# --- Gamma family -----------------------------------------------------------

@pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, 1.7724538509055160), (5.0, 24.0)])
def test_gamma_examples(x, expected):
    assert gamma_fn(x) == pytest.approx(expected, rel=1e-15)


def test_gamma_relative_accuracy_on_0_50():
    xs = np.linspace(0.01, 49.9, 300)
    worst = max(abs(gamma_fn(x) / float(oracles.mp.gamma(x)) - 1) for x in xs)
    assert worst <= 1e-13


def test_gamma_reflection_region():
    for x in (-0.5, -1.25, -2.75):
        assert gamma_fn(x) == pytest.approx(float(oracles.mp.gamma(x)), rel=1e-13)


@pytest.mark.parametrize("x", [0.0, -1.0, -7.0])
def test_gamma_poles(x):
    with pytest.raises(DomainError):
        gamma_fn(x)
    assert rgamma(x) == 0.0


def test_gamma_ratio_large_arguments():
    # Gamma(170.5)/Gamma(170) overflows term by term but the ratio is ~ sqrt(170)
    r = gamma_ratio([170.5], [170.0])
    assert r == pytest.approx(float(oracles.mp.gamma(170.5) / oracles.mp.gamma(170)), rel=1e-12)
    assert gamma_ratio([1.5], [-2.0]) == 0.0


@pytest.mark.parametrize("a, n, expected", [(0.7, 0, 1.0), (1.0, 4, 24.0), (0.5, 2, 0.75)])
def test_pochhammer_examples(a, n, expected):
    assert pochhammer(a, n) == expected


def test_pochhammer_rejects_negative():
    with pytest.raises(PreconditionError):
        pochhammer(1.0, -1)


# --- Params -------------------------------------------------------------------

def test_params_c_alpha_recomputable():
    for al in ALPHAS:
        expected = float(oracles.mp.gamma(al / 2) / (2 * oracles.mp.pi * oracles.mp.power(2, 1 - al) * oracles.mp.gamma(1 - al / 2)))
        assert Params(al, 0.5).c_alpha == pytest.approx(expected, rel=1e-14)
        assert c_alpha(al) == Params(al, 0.5).c_alpha


@pytest.mark.parametrize("alpha, b", [(0.0, 0.5), (2.0, 0.5), (1.0, 0.0), (1.0, 1.1), (-1, 0.5)])
def test_params_invalid(alpha, b):
    with pytest.raises(PreconditionError):
        Params(alpha, b)


# --- hyp2f1 -------------------------------------------------------------------

def test_hyp2f1_examples():
    assert hyp2f1(0.3, 2.7, 4.0, 0.0) == 1.0
    assert hyp2f1(1, 1, 2, 0.5) == pytest.approx(-math.log(0.5) / 0.5, rel=1e-15)
    assert hyp2f1(0.5, 0.5, 2, 1.0) == pytest.approx(4 / math.pi, rel=1e-15)


def test_hyp2f1_divergent_gauss_sum():
    with pytest.raises(DomainError):
        hyp2f1(1.0, 1.5, 2.0, 1.0)


def test_hyp2f1_pole_in_c():
    with pytest.raises(DomainError):
        hyp2f1(0.5, 0.5, -1.0, 0.3)


def test_hyp2f1_parameter_cone_against_mpmath():
    """a = alpha/2, b = n + alpha/2, c = n + 1 across the full z range, including z -> 1."""
    worst = 0.0
    for al in (0.1, 0.5, 0.99, 1.0, 1.01, 1.5, 1.9):
        a = al / 2
        for n in (1, 2, 5, 17, 40):
            for z in (0.0, 0.1, 0.5, 0.81, 0.95, 0.99, 0.999, 1.0):
                if z == 1.0 and al >= 1.0:  # Gauss sum needs c - a - b = 1 - alpha > 0
                    continue
                ref = oracles.hyp2f1(a, n + a, n + 1, z)
                worst = max(worst, abs(hyp2f1(a, n + a, n + 1.0, z) / ref - 1))
    assert worst <= 1e-11


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.01, 70.0),
    b=st.floats(0.01, 70.0),
    c=st.floats(1.0, 70.0),
    z=st.floats(0.0, 0.9),
)
def test_hyp2f1_random_series_region(a, b, c, z):
    ref = oracles.hyp2f1(a, b, c, z)
    if not math.isfinite(ref) or abs(ref) > 1e250:
        return
    assert hyp2f1(a, b, c, z) == pytest.approx(ref, rel=1e-11)


@settings(max_examples=60, deadline=None)
@given(
    al=st.floats(0.05, 1.95),
    n=st.integers(1, 60),
    z=st.floats(0.9, 0.9999),
)
def test_hyp2f1_random_near_one(al, n, z):
    a = al / 2
    assert hyp2f1(a, n + a, n + 1.0, z) == pytest.approx(oracles.hyp2f1(a, n + a, n + 1, z), rel=1e-11)


# --- Lambda_n -----------------------------------------------------------------

def test_lambda_small_b_limits():
    assert abs(lambda_n(2, Params(1.0, 1e-8))) <= 1e-7
    assert lambda_n(1, Params(1.0, 1e-8)) == pytest.approx(0.5, abs=1e-6)
    assert oracles.lambda_beta_integral(1, 1.0, 1e-8) == pytest.approx(0.5, abs=1e-6)


def test_lambda_example_below_lambda1():
    p = Params(0.5, 0.5)
    v = lambda_n(3, p)
    assert 0.0 < v < lambda_n(1, p)
    assert v == pytest.approx(oracles.lambda_beta_integral(3, 0.5, 0.5), rel=1e-13)


@pytest.mark.parametrize("alpha", ALPHAS)
def test_lambda_three_independent_routes(alpha):
    for b in (0.1, 0.5, 0.9):
        for n in (1, 2, 7):
            ref_h = oracles.lambda_hypergeometric(n, alpha, b)
            assert oracles.lambda_fourier(n, alpha, b) == pytest.approx(ref_h, rel=1e-20 + 1e-13)
            assert lambda_n(n, Params(alpha, b)) == pytest.approx(ref_h, rel=1e-12)


def test_lambda_at_b_equal_one():
    for al in (0.25, 0.5, 0.9):
        for n in (1, 3, 10):
            assert lambda_n(n, Params(al, 1.0)) == pytest.approx(oracles.lambda_hypergeometric(n, al, 1.0), rel=1e-12)
    with pytest.raises(DomainError):
        lambda_n(2, Params(1.0, 1.0))


@pytest.mark.parametrize("n, b, alpha", [(1, 0.3, 1.0), (8, 0.9, 1.7)])
def test_lambda_integral_examples(n, b, alpha):
    p = Params(alpha, b)
    assert lambda_n_integral(n, p) == pytest.approx(lambda_n(n, p), rel=1e-8)


def test_lambda_integral_matches_series_on_test_matrix():
    for al in ALPHAS:
        for b in B_GRID:
            for n in (2, 4, 16):
                p = Params(al, b)
                assert lambda_n_integral(n, p) == pytest.approx(lambda_n(n, p), rel=1e-8)


def test_lambda_integral_euler_limit():
    # near alpha = 0 the integral tends to b^(n-1) / (2 n)
    n, b = 2, 0.5
    assert lambda_n_integral(n, Params(1e-6, b)) == pytest.approx(b ** (n - 1) / (2 * n), abs=1e-5)


def test_lambda_integral_accuracy_error():
    with pytest.raises(AccuracyError):
        lambda_n_integral(3, Params(1.9, 0.999999), rtol=1e-15, max_points=32)


def test_lambda_monotone_in_b_and_n():
    grid = np.linspace(0.02, 0.98, 50)
    for al in ALPHAS:
        prev = None
        for n in (1, 2, 3, 8, 16, 32):
            vals = np.array([lambda_n(n, Params(al, b)) for b in grid])
            assert np.all(vals > 0)
            assert np.all(np.diff(vals) > 0)
            if prev is not None:
                assert np.all(vals < prev)
            prev = vals


def test_lambda_prime_matches_finite_difference():
    for al in ALPHAS:
        for n in (1, 3, 9):
            for b in (0.2, 0.6, 0.9):
                h = 1e-6
                fd = (oracles.lambda_hypergeometric(n, al, b + h) - oracles.lambda_hypergeometric(n, al, b - h)) / (2 * h)
                assert lambda_n_prime(n, Params(al, b)) == pytest.approx(fd, rel=1e-7)


# --- Theta_n ------------------------------------------------------------------

def test_theta_one_is_zero():
    for al in ALPHAS:
        assert theta_n(1, al) == 0.0


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0, 1.5, 1.75, 1.99])
def test_theta_against_integral_oracle(alpha):
    for n in (2, 5, 40):
        assert theta_n(n, alpha) == pytest.approx(oracles.theta_fourier(n, alpha), rel=1e-13)


def test_theta_closed_form_alpha_gt_1():
    for n in (2, 5, 50, 500):
        assert theta_n(n, 1.5) == pytest.approx(theta_n_closed_form(n, 1.5), rel=1e-10)
    assert theta_n(5, 1.0) == pytest.approx(theta_n_closed_form(5, 1.0), rel=1e-13)


def test_theta_gauss_route_alpha_lt_1():
    for al in (0.25, 0.5, 0.75):
        for n in (2, 9, 64):
            assert theta_n(n, al) == pytest.approx(theta_n_gauss(n, al), rel=1e-10)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_theta_increasing(alpha):
    vals = [theta_n(n, alpha) for n in range(2, 129)]
    assert all(v > 0 for v in vals)
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_mode_data():
    p = Params(0.75, 0.4)
    md = mode_data(4, p)
    assert md.lambda_n < md.lambda_1
    assert md.theta_n == theta_n(4, 0.75)
    assert mode_data(1, p).theta_n == 0.0


# --- identities and basic integrals ---------------------------------------------

def test_identity_examples():
    rep = identity_suite(0.5, 3.5, 4.0, 0.25)
    assert set(rep.residuals) == set(IDENTITY_NAMES)
    assert rep.max_residual() < 1e-9
    assert identity_suite(0.9, 10.9, 11.0, 0.8).max_residual() < 1e-8


def test_identity_z_zero_exact():
    rep = identity_suite(0.3, 2.3, 3.0, 0.0)
    for name in IDENTITY_NAMES:
        if name != "derivative":
            assert rep.residuals[name] <= 1e-15


def test_identity_random_draws():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        al = rng.uniform(0.01, 1.99)
        m = int(rng.integers(1, 33))
        z = rng.uniform(0.0, 0.95)
        worst = max(worst, identity_suite(al / 2, m + al / 2, m + 1.0, z).max_residual())
    assert worst < 1e-8


def test_identity_rejects_large_z():
    with pytest.raises(PreconditionError):
        identity_suite(0.5, 1.5, 2.0, 0.97)


def test_corrected_contiguous_relations_hold_in_mpmath():
    """The two corrected relations are true identities (checked at 30 digits)."""
    mp = oracles.mp
    a, b, c, z = mp.mpf("0.35"), mp.mpf("4.35"), mp.mpf(5), mp.mpf("0.6")
    F = mp.hyp2f1
    r1 = c * F(a, b, c, z) - (c - b) * F(a, b, c + 1, z) - b * F(a, b + 1, c + 1, z)
    r2 = c * F(a, b - 1, c, z) + (a - c) * z * F(a, b, c + 1, z) + (z - 1) * c * F(a, b, c, z)
    assert abs(r1) < 1e-25 and abs(r2) < 1e-25


def test_basic_integral_closed_forms():
    for m in (1, 2, 5, 12):
        for b in (0.2, 0.5, 0.8):
            for al in (0.5, 1.0, 1.5):
                assert kernel_cosine_moment_closed(m, b, al) == pytest.approx(oracles.kernel_cosine_moment(m, b, al), rel=1e-12)
                assert kernel_sine_moment_closed(m, b, al) == pytest.approx(oracles.kernel_sine_moment(m, b, al), rel=1e-12)
