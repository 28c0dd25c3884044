import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from bubblecluster import radial_profiles as rp


def test_bubble_values():
    assert rp.bubble_U(0.0) == pytest.approx(np.log(8.0), abs=1e-15)
    assert rp.bubble_U(1.0) == pytest.approx(np.log(2.0), abs=1e-15)


def test_bubble_mass(oracle):
    val, _ = quad(lambda r: 2 * np.pi * r * rp.bubble_expU(r), 0, np.inf, epsabs=1e-13)
    assert val == pytest.approx(oracle["closed_forms"]["bubble_mass"], rel=1e-10)
    assert val == pytest.approx(8 * np.pi, rel=1e-10)


@given(st.floats(0.0, 1e3))
def test_bubble_solves_liouville(r):
    # U'' + U'/r + e^U = 0 in the radial variable
    if r < 1e-3:
        return
    h = 1e-4 * max(r, 1.0)
    d2 = (rp.bubble_U(r + h) - 2 * rp.bubble_U(r) + rp.bubble_U(r - h)) / h ** 2
    lap = d2 + rp.bubble_dU(r) / r
    assert abs(lap + rp.bubble_expU(r)) <= 1e-5 * max(1.0, rp.bubble_expU(r))


def test_kernel_values():
    assert rp.kernel_Z(0, 0.0) == pytest.approx(-1.0)
    assert rp.kernel_Z(1, 1.0 + 0j) == pytest.approx(2.0)


def test_kernel_orthogonality():
    # e^U Z_i Z_j over the plane, in polar coordinates
    def integrand(r, th, i, j):
        y = r * np.exp(1j * th)
        return r * rp.bubble_expU(r) * rp.kernel_Z(i, y) * rp.kernel_Z(j, y)

    ths = 2 * np.pi * (np.arange(64) + 0.5) / 64
    for i, j in ((0, 1), (0, 2), (1, 2)):
        val, _ = quad(lambda r: np.mean(integrand(r, ths, i, j)) * 2 * np.pi, 0, np.inf, epsabs=1e-12)
        assert abs(val) <= 1e-10


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_kernel_equation(a, b):
    # Delta Z + e^U Z = 0
    y = complex(a, b)
    for i in (0, 1, 2):
        lap = rp.kernel_Z_laplacian(i, y)
        assert abs(lap + rp.bubble_expU(abs(y)) * rp.kernel_Z(i, y)) <= 1e-10


def test_rhs_values():
    assert rp.rhs_f(1, 2.0) == 2.0
    assert rp.rhs_f(2, 0.0, 3.0) == pytest.approx(-4.5)
    assert rp.rhs_f(2, 2.0, 2.0) == 0.0
    with pytest.raises(ValueError):
        rp.rhs_f(2, 1.0)
    with pytest.raises(ValueError):
        rp.rhs_f(3, 1.0)


@pytest.fixture(scope="module")
def base_pair():
    V = rp.solve_correction_profile(1)
    W = rp.solve_correction_profile(2, v_profile=V)
    return V, W


def test_first_log_coefficient(base_pair, oracle):
    V, _ = base_pair
    assert V.log_coeff == pytest.approx(rp.C1_EXACT, rel=1e-6)
    assert rp.log_coefficient_by_integral(1) == pytest.approx(rp.C1_EXACT, rel=1e-6)
    assert rp.C1_EXACT == pytest.approx(oracle["closed_forms"]["C1"], rel=1e-14)


def test_second_log_coefficient(base_pair, oracle):
    V, W = base_pair
    ref = oracle["profiles_origin_normalized"]
    assert W.log_coeff == pytest.approx(rp.log_coefficient_by_integral(2, V), rel=1e-6)
    assert W.log_coeff == pytest.approx(ref["C2"], rel=1e-6)
    assert V.far_const == pytest.approx(ref["V_far_const"], rel=1e-6)


def test_far_field_normalization(oracle):
    V, W = rp.far_field_normalized_profiles()
    ref = oracle["profiles_far_normalized"]
    assert abs(V.far_const) < 1e-8 and abs(W.far_const) < 1e-8
    assert W.log_coeff == pytest.approx(ref["C2"], rel=1e-6)


def test_integrand_vanishes_at_unit_radius():
    assert rp.kernel_Z(0, 1.0) == 0.0


def test_profile_ode_residual(base_pair):
    V, W = base_pair
    assert V.ode_residual() <= 1e-8
    assert W.ode_residual(V) <= 1e-8


def test_offset_adds_kernel(base_pair):
    V, _ = base_pair
    r = np.array([0.0, 0.5, 2.0, 50.0])
    shifted = V.with_offset(1.5)
    assert np.allclose(shifted(r) - V(r), 1.5 * rp.kernel_Z(0, r), atol=1e-12)
    assert shifted.log_coeff == V.log_coeff


def test_far_field_matches_fit(base_pair):
    V, _ = base_pair
    for r in (1e5, 1e6, 1e8):
        assert V(r) == pytest.approx(V.log_coeff * np.log(r) + V.far_const, abs=1e-6)


@settings(deadline=None, max_examples=30)
@given(st.floats(-5, 12))
def test_log_radius_evaluation_consistent(base_pair, t):
    V, _ = base_pair
    if t < 9.0:
        assert V.at_log_radius(t) == pytest.approx(V(np.exp(t)), abs=1e-9)
    assert np.isfinite(V.at_log_radius(t + 500.0))


def test_derivative_matches_difference(base_pair):
    V, _ = base_pair
    for r in (0.3, 1.0, 7.0):
        h = 1e-5
        assert V.derivative(r) == pytest.approx((V(r + h) - V(r - h)) / (2 * h), rel=1e-6)


def test_csv_round_trip(base_pair, tmp_path):
    V, _ = base_pair
    path = tmp_path / "V.csv"
    V.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.allclose(data[:, 1], V(data[:, 0]), atol=1e-9)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        rp.solve_correction_profile(3)
    with pytest.raises(ValueError):
        rp.solve_correction_profile(2)
    with pytest.raises(ValueError):
        rp.solve_correction_profile(1, r_max=10.0)
