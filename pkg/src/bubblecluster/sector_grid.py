"""Finite-volume discretization of one symmetry sector of a disk.

The sector 0 <= theta <= pi/k, 0 <= r <= R is covered by a polar grid.  Each
node carries a control volume bounded by radial midpoints and angular
midpoints; the two radial edges of the sector are mirror lines, so the
half-cells there carry no flux through the edge (even reflection).  The
origin is one unknown whose cell is the disk sector of radius r_{1/2}.  The
outer circle is a homogeneous Dirichlet boundary.

With this layout the stiffness matrix S (the integrated -Delta) is
symmetric, an M-matrix, and u^T S u is the discrete Dirichlet energy of one
sector.  Sector integrals are sums against ``mass``; full-domain integrals
multiply by 2k.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

INTERIOR, EDGE, ORIGIN = 0, 1, 2


def equidistribute(h, a, b, n, n_sample=200_000, focus=()):
    """n+1 nodes on [a, b] placing equal mass of 1/h between neighbours.

    ``focus`` lists (center, width) pairs where h drops to ``width``; the
    sampling of 1/h is refined geometrically around each so that narrow
    features are integrated accurately.
    """
    lo = a if a > 0 else 1e-12 * b
    parts = [np.geomspace(lo, b, n_sample)]
    for c, w in focus:
        off = np.geomspace(1e-3 * w, b - a, 20_000)
        parts.extend([c - off, c + off])
    s = np.concatenate(parts)
    s = np.unique(s[(s > a) & (s < b)])
    s = np.concatenate([[a], s, [b]])
    g = 1.0 / h(s)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (g[1:] + g[:-1]) * np.diff(s))])
    nodes = np.interp(np.linspace(0.0, cum[-1], n + 1), cum, s)
    nodes[0], nodes[-1] = a, b
    return nodes


@dataclass
class SectorGrid:
    """Polar finite-volume grid of the sector [0, pi/k] of a disk.

    Attributes
    ----------
    r : (N+1,) radial nodes, r[0] = 0, r[N] = R (Dirichlet).
    theta : (M,) angular nodes, theta[0] = 0, theta[-1] = pi/k.
    S : sparse stiffness matrix on the unknowns.
    mass : cell areas.
    x : complex node positions; x[0] = 0 is the origin.
    kind : node class (INTERIOR, EDGE or ORIGIN).
    """

    k: int
    R: float
    r: np.ndarray
    theta: np.ndarray
    S: sp.csr_matrix
    mass: np.ndarray
    x: np.ndarray
    kind: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.x)

    @property
    def shape(self):
        return len(self.r) - 1, len(self.theta)

    def integrate(self, values):
        """Integral over the full domain of a k-symmetric nodal field."""
        return 2 * self.k * float(np.sum(self.mass * values))

    def dirichlet_energy(self, u, v=None):
        """Full-domain integral of grad u . grad v for nodal fields."""
        v = u if v is None else v
        return 2 * self.k * float(u @ (self.S @ v))

    def laplacian(self, u):
        """Discrete Laplacian at the nodes."""
        return -(self.S @ u) / self.mass

    def to_polar(self, u):
        """Nodal values as an (N+1) x M array including origin and boundary."""
        N, M = self.shape
        out = np.zeros((N + 1, M))
        out[0] = u[0]
        out[1:N] = u[1:].reshape(N - 1, M)
        return out

    def sample(self, u, r, theta):
        """Bilinear interpolation of a nodal field at polar points."""
        from scipy.interpolate import RegularGridInterpolator
        polar = self.to_polar(u)
        f = RegularGridInterpolator((self.r, self.theta), polar)
        th = np.abs(np.angle(np.exp(1j * self.k * np.asarray(theta)))) / self.k
        return f(np.column_stack([np.ravel(r), np.ravel(th)])).reshape(np.shape(r))


def assemble(r, theta, k):
    """Stiffness matrix, cell areas and node positions for polar nodes."""
    r = np.asarray(r, float)
    theta = np.asarray(theta, float)
    N, M = len(r) - 1, len(theta)
    if N < 3 or M < 2:
        raise ValueError("need at least 3 radial intervals and 2 angular nodes")
    rh = 0.5 * (r[1:] + r[:-1])
    dth = np.diff(theta)
    tb = np.zeros(M)
    tb[:-1] += dth / 2
    tb[1:] += dth / 2
    n = 1 + (N - 1) * M
    ii, jj = np.meshgrid(np.arange(1, N), np.arange(M), indexing="ij")
    idx = 1 + (ii - 1) * M + jj

    rows, cols, vals = [], [], []

    def couple(a, b, c):
        a, b, c = np.ravel(a), np.ravel(b), np.ravel(c)
        rows.extend([a, b, a, b])
        cols.extend([a, b, b, a])
        vals.extend([c, c, -c, -c])

    # origin to first ring
    couple(np.zeros(M, int), idx[0], rh[0] * tb / (r[1] - r[0]))
    # radial faces between rings
    if N > 2:
        c = (rh[1:N - 1] / (r[2:N] - r[1:N - 1]))[:, None] * tb[None, :]
        couple(idx[:-1], idx[1:], c)
    # angular faces
    c = np.log(rh[1:N] / rh[0:N - 1])[:, None] / dth[None, :]
    couple(idx[:, :-1], idx[:, 1:], c)
    # Dirichlet face to r = R
    diag = np.zeros(n)
    diag[idx[-1]] = rh[N - 1] * tb / (r[N] - r[N - 1])

    S = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr() + sp.diags(diag)
    mass = np.empty(n)
    mass[0] = 0.5 * rh[0] ** 2 * (np.pi / k)
    mass[1:] = (0.5 * (rh[1:N] ** 2 - rh[0:N - 1] ** 2)[:, None] * tb[None, :]).ravel()
    x = np.zeros(n, complex)
    x[1:] = (r[1:N, None] * np.exp(1j * theta[None, :])).ravel()
    kind = np.full(n, INTERIOR)
    kind[0] = ORIGIN
    kind[1:][(jj.ravel() == 0) | (jj.ravel() == M - 1)] = EDGE
    return S.tocsr(), mass, x, kind


def build_sector_grid(k, R=1.0, alpha=None, rho=None, ring_width=None,
                      n_r=512, n_theta=128, refine=1.0):
    """Sector grid refined near the origin (scale alpha) and near the peak
    ring r = rho (radial width ``ring_width``, the x-scale of the ring
    bubble).

    ``alpha``, ``rho`` and ``ring_width`` may be sequences of equal length,
    in which case the grid resolves every listed configuration (used along
    a continuation path).  ``refine`` multiplies both node counts; refine=2
    halves the mesh size.
    """
    if k < 1:
        raise ValueError("k must be a positive integer")
    n_r = int(round(n_r * refine))
    n_theta = int(round((n_theta - 1) * refine)) + 1
    cap = 0.05 * R
    al = np.atleast_1d(alpha).astype(float) if alpha is not None else None
    rh = np.atleast_1d(rho).astype(float) if rho is not None else None
    wd = np.atleast_1d(ring_width).astype(float) if ring_width is not None else None
    if al is None:
        r = np.linspace(0.0, R, n_r + 1)
    else:
        def h(s):
            out = np.full_like(s, cap)
            for i in range(len(al)):
                hi = np.maximum(s, al[i])
                if rh is not None and wd is not None:
                    hi = np.minimum(hi, np.maximum(np.abs(s - rh[i]), wd[i]))
                out = np.minimum(out, hi)
            return out
        focus = [(0.0, a) for a in al]
        if rh is not None and wd is not None:
            focus += list(zip(rh, wd))
        r = equidistribute(h, 0.0, R, n_r, focus=focus)
    if rh is not None and wd is not None:
        eps_t = np.min(wd / rh)

        def ht(t):
            return np.minimum(np.maximum(t, eps_t), 0.05)
        theta = equidistribute(ht, 0.0, np.pi / k, n_theta - 1)
    else:
        theta = np.linspace(0.0, np.pi / k, n_theta)
    S, mass, x, kind = assemble(r, theta, k)
    meta = {"alpha": al, "rho": rh, "ring_width": wd, "n_r": n_r,
            "n_theta": n_theta, "refine": refine}
    return SectorGrid(k, R, r, theta, S, mass, x, kind, meta)


def default_radial_nodes(p):
    """Radial node count for a single-p grid: 512 up to p = 40, then
    proportional to p, since the number of decades between the
    concentration scales and the domain grows linearly in p."""
    return int(512 * max(1.0, p / 40.0))


def ring_width_of(params):
    """Radial x-width of the ring bubble, beta^k / (k rho^{k-1})."""
    k = params.k
    return np.exp(k * params.log_beta - np.log(k) - (k - 1) * params.log_rho)


def grid_for_params(params, R=1.0, n_r=None, **kw):
    """Sector grid adapted to the concentration scales of one parameter set
    or of a list of them."""
    plist = list(params) if isinstance(params, (list, tuple)) else [params]
    k = plist[0].k
    if n_r is None:
        n_r = default_radial_nodes(max(q.p for q in plist))
        if len(plist) > 1:
            n_r = int(n_r * (1 + 0.25 * (len(plist) - 1)))
    return build_sector_grid(k, R, [q.alpha for q in plist], [q.rho for q in plist],
                             [ring_width_of(q) for q in plist], n_r=n_r, **kw)


def resolution_report(grid, p):
    """Node counts per concentration scale; the grid resolves a scale when
    at least 8 radial nodes fall inside alpha*p around the origin and inside
    ring_width*p around the ring."""
    m = grid.meta
    out = {}
    if m.get("alpha") is not None:
        out["origin_nodes"] = int(min(np.sum(grid.r <= a * p) for a in m["alpha"]))
    if m.get("ring_width") is not None:
        out["ring_nodes"] = int(min(np.sum(np.abs(grid.r - c) <= min(w * p, 0.5 * c))
                                    for c, w in zip(m["rho"], m["ring_width"])))
    out["ok"] = all(v >= 8 for v in out.values())
    return out


def is_m_matrix(S, tol=1e-14):
    """Nonpositive off-diagonal, nonnegative row sums, and at least one
    strictly dominant row (sufficient for a nonsingular M-matrix on a
    connected stencil)."""
    S = sp.csr_matrix(S)
    d = S.diagonal()
    off = S - sp.diags(d)
    if off.nnz and off.data.max() > tol * np.abs(d).max():
        return False
    rs = np.asarray(S.sum(axis=1)).ravel()
    return bool(np.all(rs >= -tol * np.abs(d).max()) and np.any(rs > tol * np.abs(d).max()))
