"""Linearized operator around the ansatz and the orthogonality-projected solve.

The operator is L phi = Delta phi + p |Ups|^{p-1} phi on the k-symmetric,
reflection-even functions vanishing on the boundary, discretized on a
``SectorGrid``.  The approximate kernel direction is the ring translation
mode Zt(x) = Z1((x^k - rho^k)/beta^k) and its projection P Zt; the solve

    L phi = h + c |x|^{2k-2} e^{U2} Zt,      int |x|^{2k-2} e^{U2} Zt phi = 0

is done as one bordered sparse system.  Here e^{U2} = k^2 beta^{-2k} e^{U(z)},
so |x|^{2k-2} e^{U2} Zt = -Delta Zt.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import roots_legendre

from . import geometry
from .ansatz import principal_root
from .radial_profiles import bubble_expU, kernel_Z, kernel_Z_laplacian
from .sector_grid import grid_for_params

ZTILDE_LIMIT_FACTOR = 32.0 * np.pi / 3.0  # int e^U Z1^2 over the plane


def kernel_fields(field, x, y=None, z=None):
    """Z_{0,1}, Z_{1,1}, Z_{2,1}, Z_{0,2}, Z_{1,2}, Z_{2,2} at x.

    The first three are the kernel functions of the origin bubble in
    y = x/alpha, the last three those of the ring bubble in z.
    """
    x, y, z = field.local_coords(x, y, z)
    return tuple(kernel_Z(i, y) for i in range(3)) + tuple(kernel_Z(i, z) for i in range(3))


def ring_weight(field, x, y=None, z=None):
    """|x|^{2k-2} e^{U2(x)} = k^2 |x|^{2k-2} beta^{-2k} e^{U(z)}."""
    x, y, z = field.local_coords(x, y, z)
    w = field.a + field.b * z
    return field.k ** 2 * field.ring_factor(w) * bubble_expU(np.abs(z)) / field.b ** 2


def ztilde(field, x, y=None, z=None):
    """Zt = Z_{1,2}."""
    x, y, z = field.local_coords(x, y, z)
    return kernel_Z(1, z)


def ztilde_laplacian(field, x, y=None, z=None):
    """Analytic Laplacian of Zt in x."""
    x, y, z = field.local_coords(x, y, z)
    w = field.a + field.b * z
    return field.k ** 2 * field.ring_factor(w) * kernel_Z_laplacian(1, z) / field.b ** 2


class ProjectedZtilde:
    """P Zt on the field's domain: Zt minus its harmonic extension."""

    def __init__(self, field):
        self.field = field
        dom = field.dom
        if not dom.is_disk:
            f = field

            def bvals(x):
                return kernel_Z(1, f.local_coords(x)[2])
            self._coef, self.fit_residual = dom.mfs.fit(bvals)

    def harmonic(self, x, z):
        f = self.field
        if f.dom.is_disk:
            w = f.a + f.b * z
            return geometry.ring_translation_harmonic(w, f.a, f.b, f.dom.radius, f.k)
        return self.field.dom.mfs.evaluate(self._coef, x)

    def __call__(self, x, y=None, z=None):
        x, y, z = self.field.local_coords(x, y, z)
        return kernel_Z(1, z) - self.harmonic(x, z)


def _radial_gauss(zmax, n_per=24):
    """Gauss-Legendre nodes and weights on [0, zmax], split geometrically."""
    edges = [0.0, 0.5, 1.0, 2.0, 4.0]
    while edges[-1] < zmax:
        edges.append(edges[-1] * 2.0)
    edges[-1] = zmax
    edges = np.unique(np.minimum(edges, zmax))
    t, wt = roots_legendre(n_per)
    s, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        s.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * wt)
    return np.concatenate(s), np.concatenate(ws)


def ztilde_energy(field, grid=None, n_angle=64):
    """Full-domain integral of |grad P Zt|^2, computed as
    int |x|^{2k-2} e^{U2} Zt P Zt.

    Without a grid the integral is done in the z-plane, where it equals
    k int e^{U(z)} Z1(z) P Zt dz, by Gauss-Legendre in |z| and the
    trapezoid rule in angle over the largest z-disk inside the image of the
    domain.  With a grid it is the nodal quadrature on that grid.
    """
    pz = ProjectedZtilde(field)
    if grid is not None:
        x = grid.x
        vals = ring_weight(field, x) * ztilde(field, x) * pz(x)
        return grid.integrate(vals)
    if field.dom.is_disk:
        zmax = (field.Rk - field.a) / field.b
    else:
        rmin = field.dom.boundary_radius(np.linspace(0, 2 * np.pi, 720)).min()
        zmax = (rmin ** field.k - field.a) / field.b
    zmax = min(zmax, 1e12)
    s, ws = _radial_gauss(zmax)
    ph = np.linspace(0.0, 2 * np.pi, n_angle, endpoint=False)
    Z = s[:, None] * np.exp(1j * ph)[None, :]
    X = principal_root(field.a + field.b * Z, field.k)
    vals = bubble_expU(np.abs(Z)) * kernel_Z(1, Z) * pz(X, z=Z)
    inner = vals.mean(axis=1) * 2 * np.pi
    return float(field.k * np.sum(ws * s * inner))


@dataclass
class LinearSystem:
    """Discrete L on a sector grid with the orthogonality constraint.

    Attributes
    ----------
    grid : SectorGrid
    operator : sparse matrix of the integrated operator -S + mass * p|Ups|^{p-1}
    potential : nodal p|Ups|^{p-1}
    ztilde : nodal P Zt
    weight_vec : nodal |x|^{2k-2} e^{U2} Zt
    """

    field: object
    grid: object
    operator: sp.csc_matrix
    potential: np.ndarray
    ztilde: np.ndarray
    weight_vec: np.ndarray
    _lu: tuple = None

    @property
    def constraint(self):
        return self.grid.mass * self.weight_vec

    def bordered(self):
        """The symmetric bordered matrix [[A, -g], [-g^T, 0]] (for inspection;
        solves go through the Schur complement)."""
        g = self.constraint[:, None]
        K = sp.bmat([[self.operator, sp.csc_matrix(-g)], [sp.csc_matrix(-g.T), None]])
        return K.tocsc()

    def factor(self):
        """Sparse LU of the operator and the scalar Schur complement of the
        border."""
        if self._lu is None:
            try:
                lu = spla.splu(self.operator, permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise np.linalg.LinAlgError(f"singular operator: {exc}") from exc
            g = self.constraint
            ug = lu.solve(g)
            schur = float(g @ ug)
            if not np.isfinite(schur) or abs(schur) < 1e-14 * np.linalg.norm(g) * np.linalg.norm(ug):
                raise np.linalg.LinAlgError(
                    f"singular bordered matrix (Schur complement {schur:.3e})")
            self._lu = (lu, ug, schur)
        return self._lu

    def solve_bordered(self, f, s=0.0):
        """Solve [[A, -g], [-g^T, 0]] (phi, c) = (f, s)."""
        lu, ug, schur = self.factor()
        u1 = lu.solve(f)
        c = -(s + self.constraint @ u1) / schur
        return u1 + c * ug, float(c)

    def smallest_singular_value(self, iters=30, seed=0):
        """Inverse-iteration estimate of the smallest singular value of the
        symmetric bordered matrix."""
        n = len(self.constraint)
        v = np.random.default_rng(seed).standard_normal(n + 1)
        v /= np.linalg.norm(v)
        lam = 1.0
        for _ in range(iters):
            phi, c = self.solve_bordered(v[:-1], v[-1])
            u = np.concatenate([phi, [c]])
            lam = np.linalg.norm(u)
            v = u / lam
        return float(1.0 / lam)


def build_linear_system(field, grid=None):
    """Assemble L around the ansatz on a sector grid adapted to it."""
    if grid is None:
        if not field.dom.is_disk:
            raise ValueError("sector grids are only available for disks")
        grid = grid_for_params(field.params, R=field.dom.radius)
    x = grid.x
    ups = field(x)
    pot = field.derivative_factor(ups)
    A = (-grid.S + sp.diags(grid.mass * pot)).tocsc()
    pz = ProjectedZtilde(field)(x)
    wv = ring_weight(field, x) * ztilde(field, x)
    return LinearSystem(field, grid, A, pot, pz, wv)


def projected_solve(sys, h):
    """Solve L phi = h + c wv with int wv phi = 0.

    Returns
    -------
    dict with ``phi`` (nodal), ``c`` and the relative orthogonality residual.
    """
    h = np.asarray(h, float)
    phi, c = sys.solve_bordered(sys.grid.mass * h)
    g = sys.constraint
    orth = abs(g @ phi) / max(np.linalg.norm(phi) * np.linalg.norm(g), 1e-300)
    return {"phi": phi, "c": float(c), "orthogonality": float(orth)}


def multiplier_by_formula(sys, h, phi):
    """Multiplier from the weak form tested against P Zt:

        c int|grad PZt|^2 = -int h PZt + int p|Ups|^{p-1} phi PZt - int grad phi . grad PZt

    where the last term vanishes in the continuum by orthogonality.
    Also returns the estimate that drops the phi terms.
    """
    g = sys.grid
    pz = sys.ztilde
    denom = g.integrate(sys.weight_vec * pz)
    hz = g.integrate(h * pz)
    full = (-hz + g.integrate(sys.potential * phi * pz) - g.dirichlet_energy(phi, pz)) / denom
    return {"c": float(full), "c_h_only": float(-hz / denom), "ztilde_energy": float(denom)}


def energy_identity_defect(sys, h, phi):
    """Relative defect of int|grad phi|^2 = int p|Ups|^{p-1} phi^2 - int h phi."""
    g = sys.grid
    lhs = g.dirichlet_energy(phi)
    rhs = g.integrate(sys.potential * phi ** 2) - g.integrate(h * phi)
    return abs(lhs - rhs) / max(abs(lhs), 1e-300)


def probe_battery(field, grid):
    """Right-hand sides of unit weighted norm on the grid nodes: the weight,
    e^{U1}, |x|^{2k-2} e^{U2} and three smooth k-symmetric bumps."""
    x = grid.x
    k = field.k
    wt = field.weight(x)
    r = np.abs(x)
    c = np.cos(k * np.angle(x))
    R = grid.R
    raw = [
        wt,
        bubble_expU(np.abs(x) / field.alpha) / field.alpha ** 2,
        ring_weight(field, x),
        (1 - (r / R) ** 2),
        (r / R) ** k * c * np.exp(-4 * (r / R) ** 2),
        np.exp(-((r - 0.5 * R) / (0.1 * R)) ** 2) * (1 + 0.5 * c),
    ]
    return [h / np.max(np.abs(h) / wt) for h in raw]


def stability_probe(k, eta, p_list, dom=None, profiles=None, delta=0.1, grid_kw=None):
    """gain(p) = max over the battery of ||phi||_inf + |c| for unit ||h||_*.

    Returns
    -------
    dict with ``rows`` (p, gain, ztilde_energy, sigma_min) and the log-log
    ``slope`` of the gain.
    """
    from .ansatz import loglog_slope, make_ansatz
    dom = dom or geometry.disk(1.0, k)
    rows = []
    for p in p_list:
        f = make_ansatz(k, p, eta, dom, *(profiles or (None, None)), delta=delta)
        grid = grid_for_params(f.params, R=dom.radius, **(grid_kw or {}))
        sys = build_linear_system(f, grid)
        gain = 0.0
        for h in probe_battery(f, grid):
            s = projected_solve(sys, h)
            gain = max(gain, np.max(np.abs(s["phi"])) + abs(s["c"]))
        rows.append({"p": float(p), "gain": float(gain), "ztilde_energy": ztilde_energy(f),
                     "sigma_min": sys.smallest_singular_value()})
    slope = loglog_slope([r["p"] for r in rows], [r["gain"] for r in rows])
    return {"rows": rows, "slope": slope}
