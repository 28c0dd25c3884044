import numpy as np
import pytest

from bubblecluster import pde_solver as ps
from bubblecluster.ansatz import make_ansatz
from bubblecluster.sector_grid import build_sector_grid, grid_for_params


@pytest.fixture(scope="module")
def sol40(profiles):
    return ps.solve_at(4, 40, profiles=profiles)


def test_converges_to_cluster(sol40):
    d = sol40.diagnostics
    assert sol40.iterations <= 20
    assert d["positive_peak_at_origin"]
    assert d["positive_peaks"] == 1 and d["negative_peaks"] == 4
    assert d["u0"] > 0 > d["u_min"]
    assert abs(d["ring_angle"]) <= 1e-12 or abs(abs(d["ring_angle"]) - np.pi / 4) <= 1e-12


def test_weak_identity(sol40):
    assert sol40.diagnostics["weak_identity_defect"] <= 1e-6


def test_nodal_annulus_separates_peaks(sol40):
    lo, hi = sol40.diagnostics["nodal_annulus"]
    assert 0 < lo <= hi < sol40.diagnostics["ring_radius"]


def test_energy_targets_reported(sol40, oracle):
    d = sol40.diagnostics
    assert d["E_plus"] / d["E_plus_ratio"] == pytest.approx(oracle["closed_forms"]["E_plus_target_4"], rel=1e-12)
    assert 0.9 < d["E_plus_ratio"] < 1.1 and 0.9 < d["E_minus_ratio"] < 1.1


def test_exact_seed_needs_no_steps(sol40):
    again = ps.newton_refine(sol40.u, 40, sol40.grid)
    assert again.iterations == 0
    assert np.array_equal(again.u, sol40.u)


def test_seed_is_close(sol40):
    assert sol40.diagnostics["seed_distance"] < 0.05


def test_symmetric_peaks_counted():
    g = build_sector_grid(4, 1.0, n_r=40, n_theta=9)
    u = np.cos(4 * np.angle(g.x)) * np.sin(np.pi * np.abs(g.x))
    peaks = ps.find_peaks(g, u)
    assert sum(m for _, s, m in peaks if s > 0) == 4
    assert sum(m for _, s, m in peaks if s < 0) == 4


def test_newton_rejects_bad_input(sol40):
    with pytest.raises(ValueError):
        ps.newton_refine(sol40.u, 1.0, sol40.grid)
    with pytest.raises(ValueError):
        ps.newton_refine(np.full_like(sol40.u, np.nan), 40, sol40.grid)


def test_newton_failure_carries_history(sol40):
    with pytest.raises(ps.NewtonFailure) as err:
        ps.newton_refine(sol40.u * 0.3, 40, sol40.grid, max_iter=1)
    assert len(err.value.history) >= 1


def test_single_step_continuation_matches_newton(profiles):
    f = make_ansatz(4, 40, 2 / 3, None, *profiles)
    grid = grid_for_params(f.params)
    run = ps.continuation(4, 2 / 3, 40, 40, 1, profiles=profiles, grid=grid)
    direct = ps.newton_refine(f(grid.x), 40, grid)
    assert run["completed"]
    assert np.max(np.abs(run["solutions"][-1].u - direct.u)) <= 1e-9 * np.max(np.abs(direct.u))
    assert run["solutions"][-1].iterations == 0


def test_short_continuation_trends(profiles):
    run = ps.continuation(4, 2 / 3, 40, 48, 2, profiles=profiles)
    assert run["completed"]
    d = [s.diagnostics for s in run["solutions"]]
    assert np.all(np.diff([q["ring_radius"] for q in d]) < 0)
    assert np.all(np.diff([q["outer_sup"] for q in d]) < 0)
    assert all(q["weak_identity_defect"] <= 1e-6 for q in d)


def test_fixed_point_contracts(profiles):
    out = ps.fixed_point_phi(make_ansatz(4, 40, 2 / 3, None, *profiles))
    assert out["converged"]
    assert max(out["ratios"]) < 0.5
    assert np.max(np.abs(out["phi"])) * 40 ** 3 < 1e3
