import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblecluster import reduced_energy as re_
from bubblecluster.parameters import limit_constants


def test_phi_values(oracle):
    cf = oracle["closed_forms"]
    assert re_.phi_k(4, 2 / 3) == pytest.approx(cf["phi4_at_2_3"], rel=1e-13)
    assert re_.phi_k(5, 0.5) == pytest.approx(cf["phi5_at_1_2"], rel=1e-13)


@pytest.mark.parametrize("k", [4, 5])
def test_phi_identity(k, oracle):
    assert re_.phi_identity_defect(k) <= 1e-10
    assert 8 * np.pi * np.e * re_.phi_k(k, 2 / (k - 1)) == pytest.approx(
        oracle["closed_forms"][f"phi{k}_over_E"], rel=1e-13)


@pytest.mark.parametrize("k", [4, 5, 6])
def test_minimizer(k):
    e0 = 2 / (k - 1)
    assert abs(re_.minimize_phi(k) - e0) <= 1e-10
    assert abs(re_.log_phi_derivative(k, e0)) <= 1e-12
    h = 2e-6
    assert abs(re_.phi_k(k, e0 + h) - re_.phi_k(k, e0 - h)) / (2 * h) <= 1e-8
    assert re_.second_difference(lambda e: re_.phi_k(k, e), e0, 1e-4) > 0


@settings(max_examples=50)
@given(st.floats(0.3, 0.95))
def test_log_derivative_matches_difference(eta):
    h = 1e-6
    fd = (np.log(re_.phi_k(4, eta + h)) - np.log(re_.phi_k(4, eta - h))) / (2 * h)
    assert re_.log_phi_derivative(4, eta) == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_phi_domain():
    with pytest.raises(ValueError):
        re_.phi_k(4, 0.2)
    with pytest.raises(ValueError):
        re_.minimize_phi(4, (0.1, 0.9))


def test_energy_derivative_at_k0():
    dE, k0 = re_.energy_derivative_at_k0()
    assert abs(dE) <= 1e-6
    assert k0 == pytest.approx(5.187, abs=1e-3)


@pytest.fixture(scope="module")
def curve80(profiles):
    return re_.energy_curve(4, [80], etas=[0.6, 2 / 3, 0.73], profiles=profiles)


def test_prefactor_eta_independent(curve80):
    rep = re_.prefactor_report(curve80)[80]
    assert rep["spread"] <= 0.1
    # the leading constant is 4 pi e, approached from below
    assert 0.9 <= rep["vs_4pi_e"] <= 1.0


def test_discrete_argmin(curve80):
    assert abs(curve80.argmin[80] - 2 / 3) <= 0.05


def test_phi_correction_higher_order(profiles):
    on = re_.discrete_reduced_energy(4, 2 / 3, 40, profiles=profiles, use_phi=True)
    off = re_.discrete_reduced_energy(4, 2 / 3, 40, profiles=profiles, use_phi=False)
    assert abs(on - off) / abs(off) <= 40.0 ** -3


def test_eta_grid_admissible():
    etas = re_.eta_grid(4, 0.1, 21)
    assert len(etas) > 0
    assert np.all(np.abs(etas - 2 / 3) <= 0.1 + 1e-12)


def test_total_energy_consistent():
    c = limit_constants(4)
    assert re_.FOUR_PI_E * 2 * re_.phi_k(4, c.eta_inf) == pytest.approx(c.E_total, rel=1e-13)
