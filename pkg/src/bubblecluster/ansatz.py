"""The approximate cluster solution and its error.

The ansatz is

    Ups = tau (P U1 + P V1/p + P W1/p^2) - tau eta (P U2 + P V2/p + P W2/p^2)

where U1, V1, W1 are the radial profiles rescaled by alpha around the origin
and U2, V2, W2 are the same profiles composed with the ring coordinate
z = (x^k - rho^k) / beta^k, and P subtracts the harmonic function with the
same boundary values.  All fields are evaluated from the local coordinates
y = x/alpha and z, which are passed in explicitly whenever a point was
generated from them: near the ring x^k - rho^k suffers cancellation once
beta^k << rho^k.

The error is E = Delta Ups + |Ups|^{p-1} Ups, with the Laplacian taken from
the profile equations (never by differentiating numerically), measured in
the weighted sup norm

    ||h||_* = sup |h| / (alpha^{-2} (1+|y|^2)^{-1-d}
                         + |x|^{2k-2} beta^{-2k} (1+|z|^2)^{-1-d}).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import geometry
from .parameters import solve_parameter_system
from .radial_profiles import LOG8, bubble_U, bubble_expU, rhs_f, solve_correction_profile

FLUSH = -700.0


def signed_power(u, p):
    """|u|^{p-1} u in log space; values below e^-700 are flushed to zero."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        lg = p * np.log(np.abs(u))
    out = np.zeros_like(u)
    m = lg > FLUSH
    out[m] = np.sign(u[m]) * np.exp(np.minimum(lg[m], 700.0))
    return out


def abs_power(u, q):
    """|u|^q with the same guard."""
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore"):
        lg = q * np.log(np.abs(u))
    out = np.zeros_like(u)
    m = lg > FLUSH
    out[m] = np.exp(np.minimum(lg[m], 700.0))
    return out


def ring_coordinate(x, rho, beta, k):
    """z = (x^k - rho^k) / beta^k without cancellation near the ring.

    Uses x^k - rho^k = rho^k (e^{s} e^{i phi} - 1) with s = k log(|x|/rho),
    phi = k arg x, and expm1 / half-angle forms for the real part.
    """
    x = np.asarray(x, dtype=complex)
    r = np.abs(x)
    with np.errstate(divide="ignore"):
        s = k * (np.log(r) - np.log(rho))
    phi = k * np.angle(x)
    es = np.exp(np.minimum(s, 700.0))
    re = np.expm1(np.minimum(s, 700.0)) * np.cos(phi) - 2.0 * np.sin(0.5 * phi) ** 2
    im = es * np.sin(phi)
    scale = np.exp(k * (np.log(rho) - np.log(beta)))
    return scale * (re + 1j * im)


def principal_root(w, k):
    """Principal k-th root of complex w."""
    w = np.asarray(w, dtype=complex)
    return np.abs(w) ** (1.0 / k) * np.exp(1j * np.angle(w) / k)


class AnsatzField:
    """Evaluator bundle for the ansatz on a domain.

    Parameters
    ----------
    params : BubbleParams
    dom : DomainModel
    V, W : RadialProfile
    delta : float
        Exponent of the weight.
    order : {2, 3}
        3 keeps the W terms; 2 drops them (ablation).
    """

    def __init__(self, params, dom, V, W, delta=0.1, order=3, n_fourier=512):
        if params.k != dom.k_sym:
            raise ValueError(f"symmetry mismatch: params k={params.k}, domain k={dom.k_sym}")
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if min(params.log_alpha, params.k * params.log_beta) < -650.0:
            raise ValueError(f"p={params.p} puts the concentration scales below double precision range")
        self.params = params
        self.dom = dom
        self.V, self.W = V, W
        self.delta = float(delta)
        self.order = order
        self.k = k = params.k
        self.p = params.p
        self.tau = params.tau
        self.eta = params.eta
        self.alpha = params.alpha
        self.log_alpha = params.log_alpha
        self.log_b = k * params.log_beta
        self.b = np.exp(self.log_b)
        self.a = np.exp(k * params.log_rho)
        self.rho = params.rho
        if dom.is_disk and self.rho >= dom.radius:
            raise ValueError("peak ring lies outside the domain")
        self._w2 = 1.0 / params.p ** 2 if order == 3 else 0.0
        if dom.is_disk:
            self._setup_disk(n_fourier)
        else:
            self._setup_mfs()

    # -- harmonic parts ------------------------------------------------------

    def _setup_disk(self, n):
        R, k, a, b, p = self.dom.radius, self.k, self.a, self.b, self.p
        Rk = R ** k
        self.Rk = Rk
        tR = np.log(R) - self.log_alpha
        self._g1 = (LOG8 + 4 * self.log_alpha - 2 * np.log(R * R + self.alpha ** 2)
                    + self.V.at_log_radius(tR) / p + self.W.at_log_radius(tR) * self._w2)
        # remainder of the profiles after removing C log|z| on |w| = R^k
        exts = []
        for prof in (self.V, self.W):
            def rest(w, prof=prof):
                s = np.abs(w - a) / b
                return prof(s) - prof.log_coeff * (np.log(np.abs(w - a)) - self.log_b)
            exts.append(geometry.FourierExtension(rest, Rk, n, even=True))
        self._extV, self._extW = exts

    def _log_part(self, w, C):
        # harmonic extension of C log(|w - a| / b) from |w| = R^k
        Rk = self.Rk
        return C * (np.log(Rk) + np.log(np.abs(1.0 - self.a * w / Rk ** 2)) - self.log_b)

    def _log_part_grad(self, w, C):
        Rk2 = self.Rk ** 2
        return C * np.conj(-(self.a / Rk2) / (1.0 - self.a * w / Rk2))

    def _g2_disk(self, w):
        a, b, k, R, p = self.a, self.b, self.k, self.dom.radius, self.p
        g = LOG8 + 4 * self.log_b + geometry.ring_bubble_harmonic(w, a, b, R, k)
        g = g + (self._log_part(w, self.V.log_coeff) + self._extV(w)) / p
        if self._w2:
            g = g + (self._log_part(w, self.W.log_coeff) + self._extW(w)) * self._w2
        return g

    def _g2_disk_grad_w(self, w):
        a, b, p = self.a, self.b, self.p
        a1, b1 = a / self.Rk, b / self.Rk
        c = geometry._ring_root(a1, b1)
        w1 = w / self.Rk
        g = 4.0 * np.conj(c / (self.Rk * (1.0 - c * w1)))
        g = g + (self._log_part_grad(w, self.V.log_coeff) + self._extV.gradient(w)) / p
        if self._w2:
            g = g + (self._log_part_grad(w, self.W.log_coeff) + self._extW.gradient(w)) * self._w2
        return g

    def _setup_mfs(self):
        mfs = self.dom.mfs
        p = self.p

        def b1(x):
            y = np.abs(x) / self.alpha
            return bubble_U(y) + self.V(y) / p + self.W(y) * self._w2

        def b2(x):
            z = np.abs(ring_coordinate(x, self.rho, self.params.beta, self.k))
            return bubble_U(z) + self.V(z) / p + self.W(z) * self._w2

        self._c1, self.fit_residual1 = mfs.fit(b1)
        self._c2, self.fit_residual2 = mfs.fit(b2)

    def harmonic_parts(self, x, w):
        """Harmonic functions subtracted from the two groups (before the
        amplitude factors)."""
        if self.dom.is_disk:
            return np.full(np.shape(x), self._g1), self._g2_disk(w)
        mfs = self.dom.mfs
        return mfs.evaluate(self._c1, x), mfs.evaluate(self._c2, x)

    # -- evaluation ----------------------------------------------------------

    def local_coords(self, x, y=None, z=None):
        x = np.asarray(x, dtype=complex)
        if y is None:
            y = x / self.alpha
        if z is None:
            z = ring_coordinate(x, self.rho, self.params.beta, self.k)
        return x, np.asarray(y, dtype=complex), np.asarray(z, dtype=complex)

    def evaluate(self, x, y=None, z=None):
        """Values and Laplacians of the ansatz and of its two groups."""
        x, y, z = self.local_coords(x, y, z)
        p, k, tau, eta = self.p, self.k, self.tau, self.eta
        ry, rz = np.abs(y), np.abs(z)
        w = self.a + self.b * z
        Uy, Uz = bubble_U(ry), bubble_U(rz)
        Vy, Vz = self.V(ry), self.V(rz)
        Wy, Wz = self.W(ry), self.W(rz)
        g1, g2 = self.harmonic_parts(x, w)
        s = self._w2
        ups1 = tau * (Uy + Vy / p + Wy * s - g1)
        ups2 = tau * eta * (Uz + Vz / p + Wz * s - g2)
        # Laplacians from the profile equations
        rad1 = 1.0 - (rhs_f(1, Uy) - Vy) / p - (rhs_f(2, Uy, Vy) - Wy) * s
        rad2 = 1.0 - (rhs_f(1, Uz) - Vz) / p - (rhs_f(2, Uz, Vz) - Wz) * s
        xk2 = self.ring_factor(w)
        lap1 = -tau * bubble_expU(ry) * rad1 / self.alpha ** 2
        lap2 = -tau * eta * k * k * xk2 * bubble_expU(rz) * rad2 / self.b ** 2
        return {"ups": ups1 - ups2, "ups1": ups1, "ups2": ups2,
                "lap": lap1 - lap2, "lap1": lap1, "lap2": lap2,
                "y": y, "z": z}

    def ring_factor(self, w):
        """|x|^{2k-2} computed from w = x^k."""
        return np.abs(w) ** ((2.0 * self.k - 2.0) / self.k)

    def __call__(self, x, y=None, z=None):
        return self.evaluate(x, y, z)["ups"]

    def error(self, x, y=None, z=None, ev=None):
        """E = Delta Ups + |Ups|^{p-1} Ups."""
        ev = ev or self.evaluate(x, y, z)
        return ev["lap"] + signed_power(ev["ups"], self.p)

    def weight(self, x, y=None, z=None, delta=None):
        x, y, z = self.local_coords(x, y, z)
        d = self.delta if delta is None else delta
        w = self.a + self.b * z
        t1 = (1.0 + np.abs(y) ** 2) ** (-1.0 - d) / self.alpha ** 2
        t2 = self.ring_factor(w) * (1.0 + np.abs(z) ** 2) ** (-1.0 - d) / self.b ** 2
        return t1 + t2

    def gradient(self, x, y=None, z=None):
        """Complex gradient d/dx1 + i d/dx2 of the ansatz."""
        x, y, z = self.local_coords(x, y, z)
        p, k, tau, eta = self.p, self.k, self.tau, self.eta
        s = self._w2
        ry, rz = np.abs(y), np.abs(z)
        with np.errstate(invalid="ignore", divide="ignore"):
            uy = np.where(ry > 0, y / ry, 0.0)
            uz = np.where(rz > 0, z / rz, 0.0)
        dy = -4.0 * ry / (1 + ry * ry) + self.V.derivative(ry) / p + self.W.derivative(ry) * s
        dz = -4.0 * rz / (1 + rz * rz) + self.V.derivative(rz) / p + self.W.derivative(rz) * s
        w = self.a + self.b * z
        dwdx = k * principal_root(w, k) ** (k - 1) if k > 1 else np.ones_like(w)
        # gradient of a real function F(w) in x is conj(w'(x)) times its w-gradient
        if self.dom.is_disk:
            g1 = 0.0
            g2 = np.conj(dwdx) * self._g2_disk_grad_w(w)
        else:
            g1 = self.dom.mfs.gradient(self._c1, x)
            g2 = self.dom.mfs.gradient(self._c2, x)
        grad1 = tau * (dy * uy / self.alpha - g1)
        grad2 = tau * eta * (np.conj(dwdx) * dz * uz / self.b - g2)
        return grad1 - grad2

    def derivative_factor(self, ups):
        """p |Ups|^{p-1}."""
        return self.p * abs_power(ups, self.p - 1.0)


def make_ansatz(k, p, eta, dom=None, V=None, W=None, delta=0.1, order=3):
    """Solve the parameters for (k, p, eta) and build the ansatz.

    The log coefficients of V and W and the Robin constant of the domain
    feed the parameter system.  Profiles default to the far-field
    normalization.
    """
    dom = dom or geometry.disk(1.0, k)
    if V is None or W is None:
        V, W = default_profiles()
    c2 = W.log_coeff if order == 3 else 0.0
    params = solve_parameter_system(k, p, eta, robin_00=dom.robin_00, c1=V.log_coeff, c2=c2)
    return AnsatzField(params, dom, V, W, delta=delta, order=order)


_PROFILE_CACHE = {}


def default_profiles(offset_v=None, offset_w=None):
    """(V, W) with the given Z0 offsets relative to the origin-normalized
    solutions; ``None`` means the offset that cancels the far-field constant.
    Cached per offset pair.
    """
    key = (offset_v, offset_w)
    if key not in _PROFILE_CACHE:
        V0 = _base_V()
        cv = -V0.far_const if offset_v is None else offset_v
        V = V0.with_offset(cv)
        W0 = solve_correction_profile(2, v_profile=V)
        cw = -W0.far_const if offset_w is None else offset_w
        _PROFILE_CACHE[key] = (V, W0.with_offset(cw))
    return _PROFILE_CACHE[key]


def _base_V():
    if "V0" not in _PROFILE_CACHE:
        _PROFILE_CACHE["V0"] = solve_correction_profile(1)
    return _PROFILE_CACHE["V0"]


# ---------------------------------------------------------------------------
# norm grid
# ---------------------------------------------------------------------------

@dataclass
class NormGrid:
    """Sample points with exact local coordinates and a zone label
    (0 origin, 1 ring, 2 background)."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    zone: np.ndarray

    def __len__(self):
        return len(self.x)


ZONES = ("origin", "ring", "background")


def build_norm_grid(field, n_r=256, n_theta=128, n_bg_r=800, n_bg_theta=128, reach=10.0):
    """Three-zone sample of one symmetry sector [0, pi/k].

    Polar grids in y = x/alpha and in z reach |y|, |z| <= reach * p; a
    log-polar background covers the rest of the sector.
    """
    k, p = field.k, field.p
    dom = field.dom
    rr = np.concatenate([[0.0], np.geomspace(1e-3, reach * p, n_r - 1)])
    # origin zone
    th = np.linspace(0.0, np.pi / k, n_theta)
    Y = (rr[:, None] * np.exp(1j * th[None, :])).ravel()
    X = field.alpha * Y
    Z = ring_coordinate(X, field.rho, field.params.beta, k)
    # ring zone: upper half z-plane maps into the sector by the principal root
    ph = np.linspace(0.0, np.pi, n_theta)
    Zr = (rr[:, None] * np.exp(1j * ph[None, :])).ravel()
    Xr = principal_root(field.a + field.b * Zr, k)
    Yr = Xr / field.alpha
    # background
    Rb = dom.boundary_radius(np.linspace(0.0, np.pi / k, n_bg_theta))
    tb = np.linspace(0.0, np.pi / k, n_bg_theta)
    sb = np.geomspace(1e-2 * field.alpha / Rb.min(), 1.0 - 1e-9, n_bg_r)
    Xb = (sb[:, None] * (Rb * np.exp(1j * tb))[None, :]).ravel()
    Yb = Xb / field.alpha
    Zb = ring_coordinate(Xb, field.rho, field.params.beta, k)
    x = np.concatenate([X, Xr, Xb])
    y = np.concatenate([Y, Yr, Yb])
    z = np.concatenate([Z, Zr, Zb])
    zone = np.concatenate([np.zeros(len(X), int), np.ones(len(Xr), int), np.full(len(Xb), 2)])
    keep = dom.contains(x) | (zone == 2)
    return NormGrid(x[keep], y[keep], z[keep], zone[keep])


def weighted_norm(values, weights):
    """sup |h| / weight over the samples; returns (norm, argmax)."""
    q = np.abs(values) / weights
    i = int(np.argmax(q))
    return float(q[i]), i


def error_norm(field, grid=None, delta=None):
    """||E||_* of the ansatz on its norm grid.

    Returns a dict with the norm, the zone and location of the maximum, and
    the per-zone maxima.
    """
    grid = grid or build_norm_grid(field)
    ev = field.evaluate(grid.x, grid.y, grid.z)
    E = field.error(grid.x, ev=ev)
    wt = field.weight(grid.x, grid.y, grid.z, delta=delta)
    q = np.abs(E) / wt
    i = int(np.argmax(q))
    per_zone = {ZONES[j]: float(q[grid.zone == j].max()) if np.any(grid.zone == j) else 0.0
                for j in range(3)}
    return {"norm": float(q[i]), "zone": ZONES[grid.zone[i]], "x": complex(grid.x[i]),
            "y": complex(grid.y[i]), "z": complex(grid.z[i]), "per_zone": per_zone}


def loglog_slope(ps, values):
    return float(np.polyfit(np.log(ps), np.log(values), 1)[0])


def error_norm_sweep(k, eta, p_list, dom=None, profiles=None, delta=0.1, order=3):
    """Error norm along a list of exponents.

    Returns
    -------
    dict with ``rows`` (one per p: p, norm, zone, per-zone maxima) and the
    least-squares log-log ``slope``.
    """
    dom = dom or geometry.disk(1.0, k)
    V, W = profiles or default_profiles()
    rows = []
    for p in p_list:
        f = make_ansatz(k, p, eta, dom, V, W, delta=delta, order=order)
        res = error_norm(f)
        rows.append({"p": float(p), "norm": res["norm"], "zone": res["zone"],
                     "per_zone": res["per_zone"]})
    slope = loglog_slope([r["p"] for r in rows], [r["norm"] for r in rows])
    return {"rows": rows, "slope": slope, "offsets": (V.offset, W.offset)}


def calibrate_offsets(k, eta, p_list, dom=None, delta=0.1, start=None, maxiter=60,
                      grid_kw=None):
    """Choose the Z0 offsets of V and W minimizing sum_p log ||E||_*.

    The V offset changes the source of the W equation, so W is rebuilt for
    every trial offset.  Starts from the far-field normalization.

    Returns
    -------
    dict with ``offsets`` (cV, cW), ``profiles`` and ``objective``.
    """
    dom = dom or geometry.disk(1.0, k)
    grid_kw = grid_kw or {"n_r": 96, "n_theta": 48, "n_bg_r": 300, "n_bg_theta": 48}
    V0 = _base_V()
    if start is None:
        Vs, Ws = default_profiles()
        start = (Vs.offset, Ws.offset)
    w_cache = {}

    def profiles_for(cv, cw):
        if cv not in w_cache:
            V = V0.with_offset(cv)
            w_cache[cv] = (V, solve_correction_profile(2, v_profile=V))
        V, Wb = w_cache[cv]
        return V, Wb.with_offset(cw)

    def objective(c):
        V, W = profiles_for(float(c[0]), float(c[1]))
        tot = 0.0
        for p in p_list:
            try:
                f = make_ansatz(k, p, eta, dom, V, W, delta=delta)
                tot += np.log(error_norm(f, build_norm_grid(f, **grid_kw))["norm"])
            except (ValueError, RuntimeError):
                return np.inf
        return tot

    res = minimize(objective, np.asarray(start, float), method="Nelder-Mead",
                   options={"maxiter": maxiter, "xatol": 1e-3, "fatol": 1e-4,
                            "initial_simplex": np.asarray(start) + np.array([[0, 0], [0.5, 0], [0, 0.5]])})
    cv, cw = float(res.x[0]), float(res.x[1])
    V, W = profiles_for(cv, cw)
    return {"offsets": (cv, cw), "profiles": (V, W), "objective": float(res.fun),
            "start_objective": float(objective(start))}


# ---------------------------------------------------------------------------
# regional diagnostics
# ---------------------------------------------------------------------------

def origin_region_ratio(field, theta=0.1, n=200):
    """sup over |y| <= alpha^-theta of |E(alpha y)| alpha^2 p^4 (1+|y|^2)^2 / log^6(|y|+2)."""
    ymax = np.exp(-theta * field.log_alpha)
    r = np.concatenate([[0.0], np.geomspace(1e-3, ymax, n)])
    th = np.linspace(0, np.pi / field.k, 24)
    y = (r[:, None] * np.exp(1j * th)).ravel()
    E = field.error(field.alpha * y, y=y)
    shape = np.log(np.abs(y) + 2) ** 6 / (np.abs(y) ** 2 + 1) ** 2
    return float(np.max(np.abs(E) * field.alpha ** 2 * field.p ** 4 / shape))


def ring_region_ratio(field, theta=0.1, n=200):
    """Same on |z| <= beta^{-k theta}, normalized by rho^{2k-2} / beta^{2k}."""
    zmax = np.exp(-theta * field.log_b)
    r = np.concatenate([[0.0], np.geomspace(1e-3, zmax, n)])
    ph = np.linspace(0, np.pi, 48)
    z = (r[:, None] * np.exp(1j * ph)).ravel()
    x = principal_root(field.a + field.b * z, field.k)
    E = field.error(x, z=z)
    shape = np.log(np.abs(z) + 2) ** 6 / (np.abs(z) ** 2 + 1) ** 2
    scale = field.rho ** (2 * field.k - 2) / field.b ** 2 / field.p ** 4
    return float(np.max(np.abs(E) / (scale * shape)))


def far_region_ratio(field, grid=None):
    """sup over |x| > alpha, |x^k - rho^k| > beta^k of p |E| / bound-shape,
    with the exponent 4 delta taken from the field's weight exponent."""
    grid = grid or build_norm_grid(field)
    m = (np.abs(grid.y) > 1) & (np.abs(grid.z) > 1)
    x, y, z = grid.x[m], grid.y[m], grid.z[m]
    E = field.error(x, y, z)
    d = field.delta
    w = field.a + field.b * z
    shape = (np.abs(y) ** (-2 - 4 * d) / field.alpha ** 2
             + field.ring_factor(w) * np.abs(z) ** (-2 - 4 * d) / field.b ** 2)
    return float(np.max(field.p * np.abs(E) / shape))


def derivative_ratio(field, grid=None):
    """sup of p |Ups|^{p-1} / (e^{U1} + |x|^{2k-2} e^{U2})."""
    grid = grid or build_norm_grid(field)
    ev = field.evaluate(grid.x, grid.y, grid.z)
    w = field.a + field.b * grid.z
    denom = (bubble_expU(np.abs(grid.y)) / field.alpha ** 2
             + field.k ** 2 * field.ring_factor(w) * bubble_expU(np.abs(grid.z)) / field.b ** 2)
    return float(np.max(field.derivative_factor(ev["ups"]) / denom))


def origin_expansion_defect(field, y):
    """Ups(alpha y)/(tau p) - (1 + U/p + V/p^2 + W/p^3) at sample points y."""
    y = np.asarray(y, dtype=complex)
    p = field.p
    r = np.abs(y)
    ups = field(field.alpha * y, y=y)
    model = 1 + bubble_U(r) / p + field.V(r) / p ** 2 + field.W(r) * field._w2 / p
    return ups / (field.tau * p) - model


def weight_integral_bound(field, delta=None):
    """Closed-form bound on the integral of the weight: (pi/delta)(1 + 1/k)."""
    d = field.delta if delta is None else delta
    return np.pi / d * (1.0 + 1.0 / field.k)
