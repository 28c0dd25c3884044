import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from bubblecluster import ansatz as az
from bubblecluster import geometry as gm
from bubblecluster.radial_profiles import bubble_expU

PS = [20, 40, 80, 160]


@pytest.fixture(scope="module")
def f100(profiles):
    return az.make_ansatz(4, 100, 2 / 3, None, *profiles)


@pytest.fixture(scope="module")
def f40(profiles):
    return az.make_ansatz(4, 40, 2 / 3, None, *profiles)


def test_signs_of_peaks(f100):
    assert f100(0.0) > 0
    assert f100(complex(f100.rho, 0.0)) < 0


@settings(deadline=None, max_examples=50)
@given(st.floats(0.0, 0.99), st.floats(0.0, 2 * np.pi))
def test_rotation_symmetry(f40, r, t):
    x = r * np.exp(1j * t)
    rot = np.exp(2j * np.pi / 4)
    assert f40(rot * x) == pytest.approx(f40(x), abs=1e-10)
    assert f40(np.conj(x)) == pytest.approx(f40(x), abs=1e-10)


def test_boundary_values_vanish(f40):
    x = np.exp(1j * np.linspace(0, 2 * np.pi, 97))
    assert np.max(np.abs(f40(x))) <= 1e-10


def test_error_equals_laplacian_on_nodal_set(f40):
    r0 = brentq(lambda r: f40(complex(r, 0.0)), f40.alpha, f40.rho)
    x = complex(r0, 0.0)
    ev = f40.evaluate(np.array([x]))
    assert abs(ev["ups"][0]) <= 1e-12
    assert f40.error(np.array([x]))[0] == pytest.approx(ev["lap"][0], rel=1e-8, abs=1e-12)


def test_laplacian_matches_finite_difference(f40):
    # a point on the ring scale, where the Laplacian is large
    x = az.principal_root(f40.a + f40.b * (0.7 + 0.4j), 4)
    h = 1e-3 * f40.b / (4 * f40.rho ** 3)
    lap = (f40(x + h) + f40(x - h) + f40(x + 1j * h) + f40(x - 1j * h) - 4 * f40(x)) / h ** 2
    assert lap == pytest.approx(f40.evaluate(np.array([x]))["lap"][0], rel=1e-4)


def test_gradient_matches_finite_difference(f40):
    for x in (0.3 * f40.rho * np.exp(0.1j), 2.0 * f40.rho * np.exp(0.3j), 0.6 * np.exp(0.5j)):
        h = 1e-6 * abs(x)
        g = (f40(x + h) - f40(x - h)) / (2 * h) + 1j * (f40(x + 1j * h) - f40(x - 1j * h)) / (2 * h)
        assert f40.gradient(np.array([x]))[0] == pytest.approx(g, rel=1e-5)


def test_bubble_norm_is_eight(f40):
    grid = az.build_norm_grid(f40)
    h = bubble_expU(np.abs(grid.y)) / f40.alpha ** 2
    norm, i = az.weighted_norm(h, f40.weight(grid.x, grid.y, grid.z))
    assert norm <= 8.0 + 1e-12
    assert norm == pytest.approx(8.0, rel=1e-9)
    assert abs(grid.y[i]) < 1e-9


def test_weight_has_unit_norm(f40):
    grid = az.build_norm_grid(f40)
    w = f40.weight(grid.x, grid.y, grid.z)
    assert az.weighted_norm(w, w)[0] == pytest.approx(1.0, abs=1e-15)


def test_weight_integral_bound(f40):
    from bubblecluster.sector_grid import grid_for_params
    g = grid_for_params(f40.params)
    total = g.integrate(f40.weight(g.x))
    bound = az.weight_integral_bound(f40)
    assert total <= bound
    assert total >= 0.8 * bound


def test_error_decay_far_field_calibration(profiles):
    res = az.error_norm_sweep(4, 2 / 3, PS, profiles=profiles)
    norms = [r["norm"] for r in res["rows"]]
    assert -4.5 <= res["slope"] <= -3.5
    assert np.all(np.diff(norms) < 0)


def test_second_order_ablation_loses_one_order(profiles):
    full = az.error_norm_sweep(4, 2 / 3, PS, profiles=profiles)["slope"]
    ablated = az.error_norm_sweep(4, 2 / 3, PS, profiles=profiles, order=2)["slope"]
    assert 0.5 <= ablated - full <= 1.5


def test_regional_ratios(profiles):
    fields = [az.make_ansatz(4, p, 2 / 3, None, *profiles) for p in PS]
    far = [az.far_region_ratio(f) for f in fields]
    assert np.all(np.diff(far) < 0)
    der = [az.derivative_ratio(f) for f in fields]
    assert max(der) <= 2.0
    # the inner regions carry log p corrections: sub-polynomial growth only
    for fn in (az.origin_region_ratio, az.ring_region_ratio):
        vals = [fn(f) for f in fields]
        assert np.all(np.isfinite(vals))
        assert az.loglog_slope(PS, vals) <= 0.5


def test_origin_expansion(profiles):
    y = np.array([0.0, 0.5, 2.0, 5.0 + 1j])
    d = [np.max(np.abs(az.origin_expansion_defect(az.make_ansatz(4, p, 2 / 3, None, *profiles), y)))
         for p in (40, 80)]
    assert d[1] < d[0]


def test_custom_domain_field(profiles):
    dom = gm.star_domain(lambda th: 1.0 + 0.05 * np.cos(4 * th), 4)
    f = az.make_ansatz(4, 30, 2 / 3, dom, *profiles)
    assert f(0.0) > 0 and f(complex(f.rho, 0)) < 0
    bnd = dom.boundary[::11]
    assert np.max(np.abs(f(bnd))) <= 1e-3 * f(0.0)


def test_rejects_bad_inputs(profiles):
    with pytest.raises(ValueError):
        az.make_ansatz(4, 40, 2 / 3, gm.disk(1.0, 5), *profiles)
    with pytest.raises(ValueError):
        az.make_ansatz(4, 40, 2 / 3, None, *profiles, delta=1.5)
    with pytest.raises(ValueError):
        az.make_ansatz(4, 5000, 2 / 3, None, *profiles)


@given(st.floats(-50, 50), st.floats(1.0, 80.0))
def test_signed_power_properties(u, p):
    v = az.signed_power(np.array([u]), p)[0]
    assert np.sign(v) == np.sign(u) or v == 0.0
    assert az.abs_power(np.array([u]), p)[0] == pytest.approx(abs(v), rel=1e-12, abs=1e-300)
