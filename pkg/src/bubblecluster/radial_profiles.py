"""Radial building blocks: the Liouville bubble, its kernel functions and the
first and second order correction profiles.

The correction profiles solve the radial problems

    v'' + v'/r + e^U v = e^U f(U, ...)

on (0, inf) with v'(0) = 0.  In the variable t = log r the operator loses its
singular coefficient and the equation becomes

    v_tt + q(t) v = q(t) f,    q(t) = r^2 e^U = 2 / cosh(t)^2,

which is integrated with an explicit high order Runge-Kutta method from a
series start deep inside the core.  Every solution grows like C log r at
infinity; the coefficient C and the additive constant are extracted by a
least-squares fit on the outer decade of the integration interval.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicHermiteSpline

LOG8 = np.log(8.0)
C1_EXACT = 12.0 * (1.0 - np.log(2.0))
_FIT_SLACK = 1.0


# ---------------------------------------------------------------------------
# bubble and kernels
# ---------------------------------------------------------------------------

def bubble_U(r):
    """Standard bubble U(r) = log(8 / (1 + r^2)^2)."""
    r = np.asarray(r, dtype=float)
    return LOG8 - 2.0 * np.log1p(r * r)


def bubble_expU(r):
    """e^U(r) = 8 / (1 + r^2)^2, evaluated without forming U."""
    r = np.asarray(r, dtype=float)
    return 8.0 / (1.0 + r * r) ** 2


def bubble_dU(r):
    """Radial derivative U'(r) = -4 r / (1 + r^2)."""
    r = np.asarray(r, dtype=float)
    return -4.0 * r / (1.0 + r * r)


def bubble_U_t(t):
    """Bubble in the logarithmic variable, stable for large |t|."""
    t = np.asarray(t, dtype=float)
    # log(1 + e^{2t}) = logaddexp(0, 2t)
    return LOG8 - 2.0 * np.logaddexp(0.0, 2.0 * t)


def kernel_Z(i, y):
    """Kernel functions of the linearized Liouville operator.

    Parameters
    ----------
    i : {0, 1, 2}
        0 gives the radial dilation mode (|y|^2 - 1)/(|y|^2 + 1); 1 and 2
        the translation modes 4 y_i / (|y|^2 + 1).
    y : array_like
        Points, either complex or with a trailing axis of length 2.
    """
    y = _as_complex(y)
    r2 = np.abs(y) ** 2
    if i == 0:
        return (r2 - 1.0) / (r2 + 1.0)
    if i == 1:
        return 4.0 * y.real / (r2 + 1.0)
    if i == 2:
        return 4.0 * y.imag / (r2 + 1.0)
    raise ValueError(f"kernel index must be 0, 1 or 2, got {i}")


def kernel_Z_laplacian(i, y):
    """Analytic Laplacian of ``kernel_Z(i, .)``."""
    y = _as_complex(y)
    r2 = np.abs(y) ** 2
    d = 1.0 + r2
    if i == 0:
        # Z0 = 1 - 2/(1+r^2)
        return 8.0 * (1.0 - r2) / d ** 3
    if i in (1, 2):
        # Delta(y_i g(r)) = y_i (g'' + 3 g'/r) with g = 4/(1+r^2)
        comp = y.real if i == 1 else y.imag
        return comp * _lap_factor(r2)
    raise ValueError(f"kernel index must be 0, 1 or 2, got {i}")


def _lap_factor(r2):
    # g(r) = 4/(1+r^2): g' = -8r/d^2, g'' = -8/d^2 + 32 r^2/d^3
    # Delta(x g) = x (g'' + 3 g'/r) = x(-32/d^2 + 32 r^2/d^3)
    d = 1.0 + r2
    return -32.0 / d ** 2 + 32.0 * r2 / d ** 3


def rhs_f(order, u, v=None):
    """Right-hand sides of the correction equations.

    order 1: u^2/2; order 2: u v - u^3/2 - (v - u^2/2)^2 / 2.
    """
    u = np.asarray(u, dtype=float)
    if order == 1:
        return 0.5 * u * u
    if order == 2:
        if v is None:
            raise ValueError("second order right-hand side needs v")
        v = np.asarray(v, dtype=float)
        return u * v - 0.5 * u ** 3 - 0.5 * (v - 0.5 * u * u) ** 2
    raise ValueError(f"order must be 1 or 2, got {order}")


def _as_complex(y):
    y = np.asarray(y)
    if np.iscomplexobj(y):
        return y
    y = np.asarray(y, dtype=float)
    if y.ndim >= 1 and y.shape[-1] == 2:
        return y[..., 0] + 1j * y[..., 1]
    return y.astype(complex)


# ---------------------------------------------------------------------------
# correction profiles
# ---------------------------------------------------------------------------

# far-field basis on the fit window; the leading pair is (log r, 1) and the
# remaining columns absorb the algebraic tail (the second order source grows
# like log^4 r) so the leading coefficients are clean at r_max ~ 1e4
def _tail_basis(t):
    ir2 = np.exp(-2.0 * t)
    return np.stack([t, np.ones_like(t), t ** 4 * ir2, t ** 3 * ir2, t * t * ir2, t * ir2, ir2],
                    axis=-1)


def _tail_basis_dt(t):
    ir2 = np.exp(-2.0 * t)
    return np.stack([np.ones_like(t), np.zeros_like(t), (4 * t ** 3 - 2 * t ** 4) * ir2,
                     (3 * t * t - 2 * t ** 3) * ir2,
                     (2 * t - 2 * t * t) * ir2, (1 - 2 * t) * ir2, -2.0 * ir2], axis=-1)


@dataclass(frozen=True)
class RadialProfile:
    """Sampled radial correction profile with far-field asymptotics.

    Attributes
    ----------
    radii, values, slopes : ndarray
        Nodes (radii[0] = 0), profile values and r-derivatives.
    log_coeff, far_const : float
        Fitted coefficients of ``log r`` and ``1`` at infinity.
    order : {"V", "W"}
    c0 : float
        Value at the origin of the base solution.
    offset : float
        Multiple of the dilation kernel Z0 added on top of the base
        solution.  ``far_const`` already includes it.
    """

    radii: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    log_coeff: float
    far_const: float
    order: str
    c0: float
    tol: float
    r_max: float
    offset: float = 0.0
    tail: np.ndarray = field(default_factory=lambda: np.zeros(5))
    series_v2: float = 0.0
    t_nodes: np.ndarray = field(default=None, repr=False)
    vt_nodes: np.ndarray = field(default=None, repr=False)
    vtt_nodes: np.ndarray = field(default=None, repr=False)
    fit_residual: float = 0.0

    def __post_init__(self):
        spl = CubicHermiteSpline(self.t_nodes, self._base(self.values[1:]), self.vt_nodes)
        dspl = CubicHermiteSpline(self.t_nodes, self.vt_nodes, self.vtt_nodes)
        object.__setattr__(self, "_spline", spl)
        object.__setattr__(self, "_dspline", dspl)

    def _base(self, vals):
        # node values minus the offset contribution
        return vals - self.offset * kernel_Z(0, self.radii[1:])

    @property
    def base_far_const(self):
        return self.far_const - self.offset

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        out = self._eval_base(r)
        if self.offset:
            r2 = r * r
            out = out + self.offset * (r2 - 1.0) / (r2 + 1.0)
        return out

    def _eval_base(self, r):
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        t0, t1 = self.t_nodes[0], self.t_nodes[-1]
        with np.errstate(divide="ignore"):
            t = np.log(r)
        lo = t < t0
        hi = t > t1
        mid = ~(lo | hi)
        out[lo] = self.c0 + self.series_v2 * r[lo] ** 2
        out[mid] = self._spline(t[mid])
        if np.any(hi):
            th = t[hi]
            coef = np.concatenate([[self.log_coeff, self.base_far_const], self.tail])
            out[hi] = _tail_basis(th) @ coef
        return out[0] if scalar else out

    def at_log_radius(self, t):
        """Profile value at r = e^t; usable where e^t overflows."""
        t = np.asarray(t, dtype=float)
        t1 = self.t_nodes[-1]
        if np.all(t <= t1):
            return self(np.exp(t))
        coef = np.concatenate([[self.log_coeff, self.base_far_const], self.tail])
        out = _tail_basis(np.atleast_1d(t)) @ coef
        # Z0 tends to 1 at infinity
        out = out + self.offset * np.tanh(np.atleast_1d(t))
        low = np.atleast_1d(t) <= t1
        if np.any(low):
            out[low] = self(np.exp(np.atleast_1d(t)[low]))
        return out[0] if t.ndim == 0 else out

    def derivative(self, r):
        """d/dr of the profile."""
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty_like(r)
        t0, t1 = self.t_nodes[0], self.t_nodes[-1]
        with np.errstate(divide="ignore"):
            t = np.log(r)
        lo = t < t0
        hi = t > t1
        mid = ~(lo | hi)
        out[lo] = 2.0 * self.series_v2 * r[lo]
        out[mid] = self._dspline(t[mid]) / r[mid]
        if np.any(hi):
            coef = np.concatenate([[self.log_coeff, self.base_far_const], self.tail])
            out[hi] = (_tail_basis_dt(t[hi]) @ coef) / r[hi]
        if self.offset:
            out = out + self.offset * 4.0 * r / (1.0 + r * r) ** 2
        return out[0] if scalar else out

    def with_offset(self, c):
        """Return the profile plus ``c`` times Z0 (replacing any offset)."""
        return _replace_offset(self, c)

    def ode_residual(self, v_profile=None):
        """Max residual of the ODE at the interior nodes.

        Works in the logarithmic variable: v_tt + q (v - f), with v_tt from
        an eighth order central difference of the stored nodal v_t.  This is
        r^2 times the residual in the radial variable.
        """
        w = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
        t = self.t_nodes
        h = t[1] - t[0]
        vt = self.vt_nodes
        n = len(t)
        vtt = sum(w[j] * vt[j:n - 8 + j] for j in range(9)) / h
        ti = t[4:n - 4]
        v = self._base(self.values[1:])[4:n - 4]
        U = bubble_U_t(ti)
        q = 2.0 / np.cosh(ti) ** 2
        if self.order == "V":
            f = rhs_f(1, U)
        else:
            if v_profile is None:
                raise ValueError("W residual needs the V profile")
            f = rhs_f(2, U, v_profile(np.exp(ti)))
        return float(np.max(np.abs(vtt + q * (v - f))))

    def to_csv(self, path):
        """Write (r, value) samples plus a JSON sidecar next to ``path``."""
        np.savetxt(path, np.column_stack([self.radii, self.values]), delimiter=",",
                   header="r,value", comments="", fmt="%.17g")
        with open(str(path) + ".json", "w", encoding="utf-8") as fh:
            json.dump(self.sidecar(), fh, indent=2, sort_keys=True)

    def sidecar(self):
        return {"order": self.order, "log_coeff": self.log_coeff,
                "far_const": self.far_const, "tol": self.tol,
                "r_max": self.r_max, "c0": self.c0, "offset": self.offset}


def _replace_offset(prof, c):
    z0 = np.concatenate([[-1.0], kernel_Z(0, prof.radii[1:])])
    vals = prof.values + (c - prof.offset) * z0
    slopes = prof.slopes + (c - prof.offset) * 4.0 * prof.radii / (1.0 + prof.radii ** 2) ** 2
    return RadialProfile(
        radii=prof.radii, values=vals, slopes=slopes, log_coeff=prof.log_coeff,
        far_const=prof.far_const + (c - prof.offset), order=prof.order, c0=prof.c0,
        tol=prof.tol, r_max=prof.r_max, offset=c, tail=prof.tail,
        series_v2=prof.series_v2, t_nodes=prof.t_nodes, vt_nodes=prof.vt_nodes,
        vtt_nodes=prof.vtt_nodes,
        fit_residual=prof.fit_residual)


def solve_correction_profile(order, r_max=1e4, tol=1e-10, v_profile=None, c0=0.0,
                             offset=0.0, t_start=-20.0, n_nodes=8001, max_step=0.02):
    """Build V (order 1) or W (order 2) by integrating the radial ODE.

    Parameters
    ----------
    order : {1, 2}
    r_max : float
        Outer radius of the integration; the far field is fitted on
        [r_max/10, r_max].  Must be at least 1e3.
    tol : float
        Target for the ODE residual and for the far-field fit.
    v_profile : RadialProfile, optional
        The first order profile, required for ``order=2``.
    c0 : float
        Value at the origin (normalization of the base solution).
    offset : float
        Multiple of Z0 added afterwards.

    Returns
    -------
    RadialProfile
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if order == 2 and v_profile is None:
        raise ValueError("order 2 needs the first order profile")
    if r_max < 1e3:
        raise ValueError("r_max must be at least 1e3")
    if tol <= 0:
        raise ValueError("tol must be positive")

    # the first order profile is integrated alongside W (instead of being
    # interpolated) so the second order source is smooth to machine precision
    if order == 2:
        cv, offv = v_profile.c0, v_profile.offset
    else:
        cv, offv = c0, 0.0

    def v_total(t, vb):
        r2 = np.exp(2.0 * t)
        return vb + offv * (r2 - 1.0) / (r2 + 1.0)

    def rhs(t, y):
        q = 2.0 / np.cosh(t) ** 2
        U = bubble_U_t(t)
        out = [y[1], q * (rhs_f(1, U) - y[0])]
        if order == 2:
            out += [y[3], q * (rhs_f(2, U, v_total(t, y[0])) - y[2])]
        return out

    # v = c0 + v2 r^2 + O(r^4) with 4 v2 + 8 (c0 - f(0)) = 0
    r0 = np.exp(t_start)
    v2v = 2.0 * (rhs_f(1, LOG8) - cv)
    y0 = [cv + v2v * r0 ** 2, 2.0 * v2v * r0 ** 2]
    v2 = v2v
    if order == 2:
        v2 = 2.0 * (rhs_f(2, LOG8, cv - offv) - c0)
        y0 += [c0 + v2 * r0 ** 2, 2.0 * v2 * r0 ** 2]
    t_end = np.log(r_max)
    sol = solve_ivp(rhs, (t_start, t_end), y0,
                    method="DOP853", rtol=min(1e-3 * tol, 1e-13), atol=1e-3 * tol,
                    dense_output=True, max_step=max_step)
    if not sol.success:
        raise RuntimeError(f"profile integration failed: {sol.message}")

    j = 0 if order == 1 else 2
    t_nodes = np.linspace(t_start, t_end, n_nodes)
    yy = sol.sol(t_nodes)
    y = yy[j:j + 2]
    vtt = np.asarray(rhs(t_nodes, yy)[j + 1])

    tw = np.linspace(t_end - np.log(10.0), t_end, 400)
    B = _tail_basis(tw)
    yw = sol.sol(tw)[j]
    coef, *_ = np.linalg.lstsq(B, yw, rcond=None)
    fit_res = float(np.max(np.abs(B @ coef - yw)))
    if fit_res > max(tol, 1e-3 / r_max) * _FIT_SLACK:
        raise RuntimeError(f"far-field fit residual {fit_res:.3e} too large; increase r_max")

    radii = np.concatenate([[0.0], np.exp(t_nodes)])
    values = np.concatenate([[c0], y[0]])
    slopes = np.concatenate([[0.0], y[1] / np.exp(t_nodes)])
    base = RadialProfile(
        radii=radii, values=values, slopes=slopes, log_coeff=float(coef[0]),
        far_const=float(coef[1]), order="V" if order == 1 else "W", c0=float(c0),
        tol=float(tol), r_max=float(r_max), offset=0.0, tail=np.array(coef[2:]),
        series_v2=float(v2), t_nodes=t_nodes, vt_nodes=y[1], vtt_nodes=vtt,
        fit_residual=fit_res)
    return base.with_offset(offset) if offset else base


def log_coefficient_by_integral(order, v_profile=None):
    """Independent quadrature for the log coefficient.

    Returns the integral over (0, inf) of r Z0(r) e^U f(U, ...) dr.
    """
    if order == 1:
        g = lambda r: r * kernel_Z(0, r) * bubble_expU(r) * rhs_f(1, bubble_U(r))
    elif order == 2:
        if v_profile is None:
            raise ValueError("order 2 needs the first order profile")
        g = lambda r: (r * kernel_Z(0, r) * bubble_expU(r)
                       * rhs_f(2, bubble_U(r), v_profile(r)))
    else:
        raise ValueError(f"order must be 1 or 2, got {order}")
    # split at the sign change r = 1 and at a few decades
    edges = [0.0, 1.0, 10.0, 100.0, 1e3, 1e4, np.inf]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, err = quad(lambda s: float(g(s)), a, b, epsabs=1e-14, epsrel=1e-13, limit=400)
        if not np.isfinite(val):
            raise RuntimeError("quadrature failed")
        total += val
    return total


def build_profiles(offset_v=0.0, offset_w=0.0, r_max=1e4, tol=1e-10):
    """Convenience: build the (V, W) pair with the given Z0 offsets.

    The offset of V changes the right-hand side of the W equation, so W is
    always rebuilt from the shifted V.
    """
    V = solve_correction_profile(1, r_max=r_max, tol=tol, offset=offset_v)
    W = solve_correction_profile(2, r_max=r_max, tol=tol, v_profile=V, offset=offset_w)
    return V, W


def far_field_normalized_profiles(r_max=1e4, tol=1e-10):
    """Profiles shifted so that both far-field constants vanish."""
    V0 = solve_correction_profile(1, r_max=r_max, tol=tol)
    V = V0.with_offset(-V0.far_const)
    W0 = solve_correction_profile(2, r_max=r_max, tol=tol, v_profile=V)
    return V, W0.with_offset(-W0.far_const)
