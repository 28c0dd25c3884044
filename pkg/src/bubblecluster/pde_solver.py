"""Newton and continuation solver for -Delta u = |u|^{p-1} u on a disk sector.

Solutions are sought in the k-symmetric, reflection-even class by working
on a ``SectorGrid``.  The nonlinear residual in integrated form is

    F(u) = -S u + mass * |u|^{p-1} u

and convergence is measured in solution units by the fixed-point defect
G(u) = u - S^{-1}(mass |u|^{p-1} u) = -S^{-1} F(u).  Forming G this way
avoids the cancellation in S u, whose entries are huge on the graded grid,
and makes the defect insensitive to the cell-area ratios.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry
from .ansatz import abs_power, make_ansatz, signed_power
from .linearized import build_linear_system, projected_solve
from .parameters import limit_constants
from .sector_grid import EDGE, ORIGIN, grid_for_params


class NewtonFailure(RuntimeError):
    """Newton did not converge; carries the residual history and last iterate."""

    def __init__(self, msg, history, u):
        super().__init__(f"{msg}; residual history {['%.2e' % h for h in history]}")
        self.history = history
        self.u = u


@dataclass
class DiscreteSolution:
    grid: object
    u: np.ndarray
    p: float
    newton_residual: float
    iterations: int
    history: list
    diagnostics: dict = field(default_factory=dict)


_LAPLACE_LU = {}


def _laplace_lu(grid):
    key = id(grid)
    if key not in _LAPLACE_LU or _LAPLACE_LU[key][0] is not grid:
        _LAPLACE_LU.clear()
        _LAPLACE_LU[key] = (grid, spla.splu(grid.S.tocsc(), permc_spec="MMD_AT_PLUS_A"))
    return _LAPLACE_LU[key][1]


def nonlinear_residual(grid, u, p):
    """Integrated residual F(u) = -S u + mass |u|^{p-1} u."""
    return -(grid.S @ u) + grid.mass * signed_power(u, p)


def fixed_point_defect(grid, u, p):
    """G(u) = u - S^{-1}(mass |u|^{p-1} u)."""
    return u - _laplace_lu(grid).solve(grid.mass * signed_power(u, p))


def residual_norm(grid, u, p):
    """||G(u)||_inf, the residual in solution units."""
    return float(np.max(np.abs(fixed_point_defect(grid, u, p))))


def newton_refine(seed, p, grid, max_iter=20, tol=1e-9, max_halvings=10):
    """Damped Newton for the discrete Lane-Emden equation.

    Accepts when the residual (solution units) is at most ``tol * ||u||_inf``.
    A step is halved, up to ``max_halvings`` times, while it fails to reduce
    the residual.

    Raises
    ------
    NewtonFailure
        On a singular Jacobian, a failed line search or ``max_iter`` steps.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    u = np.array(seed, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("seed must be finite")
    res = residual_norm(grid, u, p)
    hist = [res]
    for it in range(max_iter + 1):
        if res <= tol * np.max(np.abs(u)):
            return DiscreteSolution(grid, u, float(p), res, it, hist)
        if it == max_iter:
            break
        # S G is small and accurate, unlike S u - mass f(u)
        F = -(grid.S @ fixed_point_defect(grid, u, p))
        J = (-grid.S + sp.diags(grid.mass * p * abs_power(u, p - 1.0))).tocsc()
        try:
            du = spla.splu(J, permc_spec="MMD_AT_PLUS_A").solve(-F)
        except RuntimeError as exc:
            raise NewtonFailure(f"singular Jacobian ({exc})", hist, u) from exc
        if not np.all(np.isfinite(du)):
            raise NewtonFailure("singular Jacobian", hist, u)
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = u + lam * du
            r_trial = residual_norm(grid, trial, p)
            if r_trial < res:
                break
            lam *= 0.5
        else:
            raise NewtonFailure("line search failed", hist, u)
        u, res = trial, r_trial
        hist.append(res)
    raise NewtonFailure(f"no convergence in {max_iter} iterations", hist, u)


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _neighbours(grid):
    A = grid.S.tocsr().copy()
    A.setdiag(0)
    A.eliminate_zeros()
    return A


def multiplicity(grid, i):
    """Copies of sector node i in the full disk."""
    if grid.kind[i] == ORIGIN:
        return 1
    return grid.k if grid.kind[i] == EDGE else 2 * grid.k


def find_peaks(grid, u):
    """Strict local maxima of u>0 and minima of u<0, with their multiplicity
    in the full disk."""
    A = _neighbours(grid)
    peaks = []
    for i in range(grid.n):
        nb = A.indices[A.indptr[i]:A.indptr[i + 1]]
        if u[i] > 0 and np.all(u[i] > u[nb]):
            peaks.append((i, 1, multiplicity(grid, i)))
        elif u[i] < 0 and np.all(u[i] < u[nb]):
            peaks.append((i, -1, multiplicity(grid, i)))
    return peaks


def nodal_annulus(grid, u):
    """Radial range swept by the nodal line closest to the origin."""
    polar = grid.to_polar(u)
    radii = []
    for j in range(polar.shape[1]):
        col = polar[:-1, j]
        s = np.nonzero(np.sign(col[1:]) != np.sign(col[:-1]))[0]
        if len(s):
            i = s[0]
            t = col[i] / (col[i] - col[i + 1])
            radii.append(grid.r[i] + t * (grid.r[i + 1] - grid.r[i]))
    if not radii:
        return (np.nan, np.nan)
    return (float(min(radii)), float(max(radii)))


def diagnostics(sol, consts=None, outer_radius=0.5):
    """Energies, peaks and nodal geometry of a converged solution.

    Energies are p int (u^+)^{p+1} and p int (u^-)^{p+1} over the disk,
    compared with their limits in ``consts``.
    """
    g, u, p = sol.grid, sol.u, sol.p
    k = g.k
    consts = consts or limit_constants(k)
    pw = abs_power(u, p + 1.0)
    E_plus = p * g.integrate(pw * (u > 0))
    E_minus = p * g.integrate(pw * (u < 0))
    grad2 = g.dirichlet_energy(u)
    potential = g.integrate(pw)
    peaks = find_peaks(g, u)
    pos = [q for q in peaks if q[1] > 0]
    neg = [q for q in peaks if q[1] < 0]
    imin = int(np.argmin(u))
    far = np.abs(g.x) >= outer_radius
    return {
        "p": p,
        "u0": float(u[0]),
        "u0_scaled": float(u[0] / (1 + np.log(8.0) / p)),
        "t_k": consts.t_k,
        "u_min": float(u[imin]),
        "ring_radius": float(abs(g.x[imin])),
        "ring_angle": float(np.angle(g.x[imin])),
        "positive_peaks": int(sum(m for _, _, m in pos)),
        "negative_peaks": int(sum(m for _, _, m in neg)),
        "positive_peak_at_origin": bool(len(pos) == 1 and pos[0][0] == 0),
        "nodal_annulus": nodal_annulus(g, u),
        "E_plus": E_plus,
        "E_minus": E_minus,
        "E_total": E_plus + E_minus,
        "E_plus_ratio": E_plus / consts.E_plus,
        "E_minus_ratio": E_minus / consts.E_minus,
        "E_total_ratio": (E_plus + E_minus) / consts.E_total,
        "weak_identity_defect": abs(grad2 - potential) / potential,
        "outer_sup": float(p * np.max(pw[far])) if np.any(far) else 0.0,
        "newton_residual": sol.newton_residual,
        "iterations": sol.iterations,
    }


# ---------------------------------------------------------------------------
# seeds and continuation
# ---------------------------------------------------------------------------

def ansatz_seed(k, p, eta, grid, dom=None, profiles=None):
    f = make_ansatz(k, p, eta, dom, *(profiles or (None, None)))
    return f(grid.x), f


def solve_at(k, p, eta=None, dom=None, grid=None, profiles=None, **newton_kw):
    """Ansatz-seeded Newton solve at one exponent."""
    eta = limit_constants(k).eta_inf if eta is None else eta
    dom = dom or geometry.disk(1.0, k)
    if not dom.is_disk:
        raise ValueError("the sector solver needs a disk domain")
    f = make_ansatz(k, p, eta, dom, *(profiles or (None, None)))
    grid = grid or grid_for_params(f.params, R=dom.radius)
    sol = newton_refine(f(grid.x), p, grid, **newton_kw)
    sol.diagnostics = diagnostics(sol)
    sol.diagnostics["seed_distance"] = seed_distance(sol.u, f(grid.x))
    return sol


def seed_distance(u, ups):
    return float(np.max(np.abs(u - ups)) / np.max(np.abs(ups)))


def continuation(k, eta, p_start, p_end, steps, dom=None, profiles=None, grid=None,
                 min_step=None, log=None, **newton_kw):
    """Track the solution from p_start to p_end in ``steps`` equal steps.

    Each step is seeded by the previous solution times the ratio of the
    amplitudes tau p; the ansatz is rebuilt as a seed only if that fails, and
    a failing step is bisected down to ``min_step``.  All steps share one
    grid that resolves the concentration scales along the whole path.

    Returns
    -------
    dict with ``solutions`` (list of DiscreteSolution), ``completed`` and
    ``events`` (text log of fallbacks).
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    dom = dom or geometry.disk(1.0, k)
    ps = np.linspace(p_start, p_end, steps + 1)
    fields = {float(q): make_ansatz(k, q, eta, dom, *(profiles or (None, None))) for q in ps}
    if grid is None:
        grid = grid_for_params([f.params for f in fields.values()], R=dom.radius)
    if min_step is None:
        min_step = abs(p_end - p_start) / steps / 16 if p_end != p_start else 1.0
    events = []

    def field_at(q):
        if q not in fields:
            fields[q] = make_ansatz(k, q, eta, dom, *(profiles or (None, None)))
        return fields[q]

    def amp(q):
        prm = field_at(q).params
        return prm.tau * prm.p

    first = newton_refine(field_at(float(ps[0]))(grid.x), ps[0], grid, **newton_kw)
    first.diagnostics = diagnostics(first)
    sols = [first]
    targets = list(ps[1:])
    q_cur = float(ps[0])
    while targets:
        q = float(targets[0])
        seed = sols[-1].u * amp(q) / amp(q_cur)
        try:
            sol = newton_refine(seed, q, grid, **newton_kw)
        except NewtonFailure as exc:
            events.append(f"p={q:.4g}: predictor failed ({exc.history[-1]:.2e}); ansatz seed")
            try:
                sol = newton_refine(field_at(q)(grid.x), q, grid, **newton_kw)
            except NewtonFailure:
                h = q - q_cur
                if abs(h) / 2 < min_step:
                    events.append(f"p={q:.4g}: step below floor, aborting")
                    return {"solutions": sols, "completed": False, "events": events, "grid": grid}
                events.append(f"p={q:.4g}: bisecting step")
                targets.insert(0, q_cur + h / 2)
                continue
        sol.diagnostics = diagnostics(sol)
        sols.append(sol)
        q_cur = q
        targets.pop(0)
        if log:
            log(sol.diagnostics)
    return {"solutions": sols, "completed": True, "events": events, "grid": grid}


# ---------------------------------------------------------------------------
# the contraction map
# ---------------------------------------------------------------------------

def fixed_point_phi(field, sys=None, max_iter=50, tol=1e-12):
    """Iterate phi <- T(-E - N(phi)) with T the projected solve.

    E is the analytic error of the ansatz at the grid nodes and
    N(phi) = |Ups+phi|^{p-1}(Ups+phi) - |Ups|^{p-1}Ups - p|Ups|^{p-1}phi.

    Returns
    -------
    dict with ``phi``, ``c``, ``ratios`` (successive contraction ratios),
    ``converged`` and ``steps``.

    Raises
    ------
    RuntimeError
        When the ratio is at least 1 for three consecutive iterations.
    """
    sys = sys or build_linear_system(field)
    x = sys.grid.x
    ev = field.evaluate(x)
    ups = ev["ups"]
    E = field.error(x, ev=ev)
    base = signed_power(ups, field.p)
    pot = sys.potential

    def N(phi):
        return signed_power(ups + phi, field.p) - base - pot * phi

    phi = np.zeros_like(ups)
    c = 0.0
    steps, ratios = [], []
    bad = 0
    for _ in range(max_iter):
        s = projected_solve(sys, -E - N(phi))
        step = float(np.max(np.abs(s["phi"] - phi)))
        if steps:
            ratios.append(step / steps[-1] if steps[-1] > 0 else 0.0)
            bad = bad + 1 if ratios[-1] >= 1 else 0
            if bad >= 3:
                raise RuntimeError(f"contraction map diverges; ratios {ratios}")
        steps.append(step)
        phi, c = s["phi"], s["c"]
        if step <= tol * max(1.0, np.max(np.abs(phi))):
            return {"phi": phi, "c": c, "ratios": ratios, "steps": steps, "converged": True}
    return {"phi": phi, "c": c, "ratios": ratios, "steps": steps, "converged": False}
