import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from bubblecluster import sector_grid as sg
from bubblecluster.parameters import solve_parameter_system


def poisson_error(grid, exact, source):
    u = spla.spsolve(grid.S.tocsc(), grid.mass * source(grid.x))
    return np.max(np.abs(u - exact(grid.x)))


@settings(deadline=None, max_examples=15)
@given(st.integers(2, 6), st.integers(8, 40), st.integers(4, 20))
def test_stiffness_structure(k, n_r, n_t):
    g = sg.build_sector_grid(k, 1.0, n_r=n_r, n_theta=n_t)
    assert abs(g.S - g.S.T).max() <= 1e-12 * abs(g.S).max()
    assert sg.is_m_matrix(g.S)
    assert np.all(g.mass > 0)
    assert g.kind[0] == sg.ORIGIN and np.sum(g.kind == sg.ORIGIN) == 1


def test_area_of_cells():
    g = sg.build_sector_grid(4, 2.0, n_r=200, n_theta=33)
    r_half = 0.5 * (g.r[-1] + g.r[-2])
    assert g.integrate(np.ones(g.n)) == pytest.approx(np.pi * r_half ** 2, rel=1e-12)


def test_paraboloid_reproduced_exactly():
    g = sg.build_sector_grid(4, 1.0, n_r=40, n_theta=9)
    assert poisson_error(g, lambda x: 1 - np.abs(x) ** 2, lambda x: 4.0 + 0 * np.abs(x)) <= 1e-12


def test_radial_poisson_second_order():
    q = np.pi / 2
    exact = lambda x: np.cos(q * np.abs(x))
    src = lambda x: q * q * np.cos(q * np.abs(x)) + q * np.sinc(np.abs(x) / 2) * q
    errs = [poisson_error(sg.build_sector_grid(4, 1.0, n_r=n, n_theta=9), exact, src) for n in (32, 64, 128)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8)


def test_angular_mode_converges():
    k = 4
    exact = lambda x: np.abs(x) ** k * np.cos(k * np.angle(x)) * (1 - np.abs(x) ** 2)
    src = lambda x: (4 * k + 4) * np.abs(x) ** k * np.cos(k * np.angle(x))
    errs = [poisson_error(sg.build_sector_grid(k, 1.0, n_r=n, n_theta=n // 2 + 1), exact, src)
            for n in (32, 64)]
    assert errs[1] < errs[0] / 3


def test_dirichlet_energy_of_paraboloid():
    g = sg.build_sector_grid(4, 1.0, n_r=400, n_theta=17)
    u = 1 - np.abs(g.x) ** 2
    assert g.dirichlet_energy(u) == pytest.approx(2 * np.pi, rel=1e-3)


def test_laplacian_of_paraboloid():
    g = sg.build_sector_grid(4, 1.0, n_r=100, n_theta=17)
    lap = g.laplacian(np.abs(g.x) ** 2)
    inner = np.abs(g.x) < 0.9
    assert np.allclose(lap[inner], 4.0, rtol=1e-2)


def test_polar_round_trip():
    g = sg.build_sector_grid(3, 1.0, n_r=20, n_theta=7)
    u = np.random.default_rng(0).normal(size=g.n)
    P = g.to_polar(u)
    assert P.shape == (len(g.r), len(g.theta))
    assert np.all(P[-1] == 0.0) and np.all(P[0] == u[0])
    val = g.sample(u, g.r[3], g.theta[2])
    assert val == pytest.approx(P[3, 2])


def test_adapted_grid_resolves_scales():
    for p in (40, 80):
        prm = solve_parameter_system(4, p, 2 / 3)
        g = sg.grid_for_params(prm)
        rep = sg.resolution_report(g, p)
        assert rep["ok"], rep
        assert g.r[1] < prm.alpha


def test_equidistribute_endpoints():
    nodes = sg.equidistribute(lambda s: 0.1 + s, 0.0, 2.0, 50)
    assert nodes[0] == 0.0 and nodes[-1] == 2.0
    assert np.all(np.diff(nodes) > 0)
    assert np.diff(nodes)[0] < np.diff(nodes)[-1]


def test_refine_halves_mesh():
    prm = solve_parameter_system(4, 40, 2 / 3)
    a = sg.grid_for_params(prm)
    b = sg.grid_for_params(prm, refine=2)
    assert len(b.r) - 1 == 2 * (len(a.r) - 1)
