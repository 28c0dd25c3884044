"""Reduced energy of the cluster as a function of the amplitude ratio eta.

The leading term of the reduced energy is

    phi_k(eta) = (1 + k eta^2) eta^{-2 k eta^2 / ((k eta - 1)(eta + 1))},

minimized at eta = 2/(k-1).  The discrete reduced energy evaluates the
Lane-Emden functional J_p(u) = int |grad u|^2 / 2 - |u|^{p+1} / (p+1) at
u = Ups + phi on a sector grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import geometry
from .ansatz import abs_power, make_ansatz
from .linearized import build_linear_system
from .parameters import check_admissible, find_k0, limit_constants, total_energy
from .sector_grid import grid_for_params

FOUR_PI_E = 4.0 * np.pi * np.e


def phi_k(k, eta):
    """Leading term of the reduced energy; defined for 1/k < eta < 1."""
    eta = np.asarray(eta, dtype=float)
    if np.any(eta <= 1.0 / k) or np.any(eta >= 1.0):
        raise ValueError(f"eta must lie in (1/k, 1) for k={k}")
    expo = -2.0 * k * eta ** 2 / ((k * eta - 1.0) * (eta + 1.0))
    out = (1.0 + k * eta ** 2) * np.exp(expo * np.log(eta))
    return float(out) if out.ndim == 0 else out


def log_phi_derivative(k, eta):
    """d/d eta of log phi_k."""
    d = k * eta ** 2 + (k - 1.0) * eta - 1.0
    dd = 2.0 * k * eta + k - 1.0
    g = -2.0 * k * eta ** 2 / d
    dg = -2.0 * k * (2.0 * eta * d - eta ** 2 * dd) / d ** 2
    return 2.0 * k * eta / (1.0 + k * eta ** 2) + dg * np.log(eta) + g / eta


def minimize_phi(k, bracket=None, tol=1e-12):
    """Minimizer of phi_k: bounded Brent search, polished by a root of the
    analytic derivative of log phi_k (Brent on values alone stalls near
    sqrt(machine epsilon))."""
    lo, hi = bracket if bracket is not None else (1.0 / k + 1e-6, 1.0 - 1e-6)
    if lo <= 1.0 / k or hi >= 1.0 or lo >= hi:
        raise ValueError(f"bracket {bracket} must lie inside (1/k, 1)")
    res = minimize_scalar(lambda e: phi_k(k, e), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-8})
    x = float(res.x)
    a, b = max(lo, x - 1e-4), min(hi, x + 1e-4)
    if log_phi_derivative(k, a) < 0 < log_phi_derivative(k, b):
        x = brentq(lambda e: log_phi_derivative(k, e), a, b, xtol=tol, rtol=4 * np.finfo(float).eps)
    return float(x)


def second_difference(fun, x, h):
    return (fun(x + h) - 2 * fun(x) + fun(x - h)) / h ** 2


def energy_derivative_at_k0(h=1e-4):
    """Central difference of E(k) at its maximizer k0."""
    k0 = find_k0()
    return float((total_energy(k0 + h) - total_energy(k0 - h)) / (2 * h)), k0


def jp_functional(grid, u, p, lap=None, ups=None):
    """J_p of a nodal field.  The gradient term is the discrete Dirichlet
    energy unless an analytic Laplacian ``lap`` of ``ups`` is supplied, in
    which case int|grad u|^2 = -int ups lap - 2 int (u-ups) lap + |grad(u-ups)|^2."""
    if lap is None:
        grad2 = grid.dirichlet_energy(u)
    else:
        phi = u - ups
        grad2 = (-grid.integrate(ups * lap) - 2.0 * grid.integrate(phi * lap)
                 + grid.dirichlet_energy(phi))
    pot = grid.integrate(abs_power(u, p + 1.0))
    return 0.5 * grad2 - pot / (p + 1.0), grad2, pot


def discrete_reduced_energy(k, eta, p, dom=None, profiles=None, use_phi=True, grid=None,
                            return_parts=False):
    """F_p(eta) = J_p(Ups + phi) on a sector grid.

    The gradient of Ups enters through its analytic Laplacian; phi comes from
    the contraction map when ``use_phi`` is set.
    """
    from .pde_solver import fixed_point_phi
    dom = dom or geometry.disk(1.0, k)
    f = make_ansatz(k, p, eta, dom, *(profiles or (None, None)))
    grid = grid or grid_for_params(f.params, R=dom.radius)
    ev = f.evaluate(grid.x)
    ups, lap = ev["ups"], ev["lap"]
    out = {"c": 0.0, "phi_sup": 0.0}
    u = ups
    if use_phi:
        fp = fixed_point_phi(f, build_linear_system(f, grid))
        u = ups + fp["phi"]
        out.update(c=fp["c"], phi_sup=float(np.max(np.abs(fp["phi"]))))
    J, grad2, pot = jp_functional(grid, u, p, lap=lap, ups=ups)
    out.update(F=J, grad2=grad2, pot=pot, p=p, eta=eta)
    return out if return_parts else J


@dataclass
class EnergyCurve:
    k: int
    eta: np.ndarray
    phi: np.ndarray
    F: dict = field(default_factory=dict)
    c: dict = field(default_factory=dict)
    argmin: dict = field(default_factory=dict)

    def rows(self):
        out = []
        for i, e in enumerate(self.eta):
            row = {"eta": float(e), "phi_k": float(self.phi[i])}
            for p, vals in self.F.items():
                row[f"F_p{p:g}"] = float(vals[i])
                row[f"pF_p{p:g}"] = float(p * vals[i])
            out.append(row)
        return out


def eta_grid(k, band=0.1, n=41):
    """Admissible eta values in a band around 2/(k-1)."""
    e0 = 2.0 / (k - 1.0)
    etas = np.linspace(e0 - band, e0 + band, n)
    ok = [check_admissible(k, e)["ok"] for e in etas]
    return etas[np.array(ok, bool)]


def energy_curve(k, p_list, etas=None, band=0.1, n=41, dom=None, profiles=None, use_phi=False):
    """phi_k and F_p on an eta grid for each p, with the discrete argmins."""
    etas = eta_grid(k, band, n) if etas is None else np.asarray(etas, float)
    curve = EnergyCurve(k, etas, phi_k(k, etas))
    for p in p_list:
        vals, cs = [], []
        for e in etas:
            parts = discrete_reduced_energy(k, e, p, dom, profiles, use_phi, return_parts=True)
            vals.append(parts["F"])
            cs.append(parts["c"])
        curve.F[p] = np.array(vals)
        curve.c[p] = np.array(cs)
        curve.argmin[p] = float(etas[int(np.argmin(vals))])
    return curve


def prefactor_report(curve):
    """Empirical p F_p / phi_k compared with 4 pi e and 4 pi / e."""
    out = {}
    for p, vals in curve.F.items():
        ratio = p * vals / curve.phi
        out[p] = {"mean": float(ratio.mean()), "spread": float((ratio.max() - ratio.min()) / ratio.mean()),
                  "vs_4pi_e": float(ratio.mean() / FOUR_PI_E),
                  "vs_4pi_over_e": float(ratio.mean() / (4 * np.pi / np.e))}
    return out


def phi_identity_defect(k):
    """phi_k(2/(k-1)) - E(k)/(8 pi e)."""
    c = limit_constants(k)
    return abs(phi_k(k, c.eta_inf) - c.E_total / (8 * np.pi * np.e))
