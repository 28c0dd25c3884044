"""k-symmetric planar domains, Green and Robin functions, and the H^1_0
projection (subtract the harmonic function with the same boundary values).

Points are complex numbers throughout.  Conventions::

    G(x, y) = -(1/2pi) log|x - y| + H(x, y),   G = 0 on the boundary,

so the regular part H is harmonic in x with H(x, y) = (1/2pi) log|x - y| on
the boundary.  On the disk of radius R this gives H(0, 0) = (1/2pi) log R.

Disks are handled by closed forms and FFT Poisson extension; other smooth
star-shaped domains by the method of fundamental solutions (charges on a
dilated copy of the boundary, least squares on boundary samples).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# harmonic extension tools
# ---------------------------------------------------------------------------

class FourierExtension:
    """Harmonic extension into the disk |w| < R of boundary data g(theta).

    The data is sampled at ``n`` equispaced angles and expanded in a
    trigonometric series; the extension is sum c_m (w/R)^m (real part).
    """

    def __init__(self, g, R=1.0, n=512, even=False):
        th = TWO_PI * np.arange(n) / n
        vals = np.asarray(g(R * np.exp(1j * th)), dtype=float)
        c = np.fft.rfft(vals) / n
        c[1:] *= 2.0
        if n % 2 == 0:
            c[-1] *= 0.5
        if even:
            c = c.real.astype(complex)
        self.R = float(R)
        self.coef = c
        # coefficient decay is the accuracy indicator
        self.tail = float(np.max(np.abs(c[-8:])))

    def __call__(self, w):
        w = np.asarray(w, dtype=complex) / self.R
        # Re(c_m e^{i m th}) extends to Re(c_m w^m); Horner in w
        c = self.coef
        acc = np.zeros_like(w)
        for cm in c[::-1]:
            acc = acc * w + cm
        return acc.real

    def gradient(self, w):
        """Complex gradient d/dx + i d/dy of the extension (as conj(F'))."""
        w = np.asarray(w, dtype=complex) / self.R
        c = self.coef
        m = np.arange(len(c))
        dc = (c * m)[1:]
        acc = np.zeros_like(w)
        for cm in dc[::-1]:
            acc = acc * w + cm
        return np.conj(acc / self.R)


class MFSHarmonic:
    """Method of fundamental solutions on a closed boundary polyline.

    Harmonic functions are represented as a constant plus a sum of
    logarithmic charges placed on the boundary dilated by ``dilation``
    (about the origin).  Coefficients come from least squares against the
    boundary samples.
    """

    def __init__(self, boundary, n_charges, dilation=1.5, n_samples=None):
        boundary = np.asarray(boundary, dtype=complex)
        n_samples = n_samples or max(4 * n_charges, len(boundary))
        # resample the boundary uniformly in arclength
        self.samples = _resample_closed(boundary, n_samples)
        self.charges = dilation * _resample_closed(boundary, n_charges)
        A = self._basis(self.samples)
        self._A = A
        self.cond = float(np.linalg.cond(A))
        if not np.isfinite(self.cond) or self.cond > 1e17:
            raise np.linalg.LinAlgError(f"collocation matrix ill-conditioned (cond={self.cond:.3e})")
        self._pinv = np.linalg.pinv(A)

    def _basis(self, x):
        x = np.asarray(x, dtype=complex).reshape(-1)
        return np.column_stack([np.ones(len(x)), np.log(np.abs(x[:, None] - self.charges[None, :]))])

    def fit(self, g):
        """Coefficients of the harmonic function with boundary values g."""
        vals = np.asarray(g(self.samples), dtype=float)
        coef = self._pinv @ vals
        resid = float(np.max(np.abs(self._A @ coef - vals)))
        return coef, resid

    def evaluate(self, coef, x):
        x = np.asarray(x, dtype=complex)
        return (self._basis(x) @ coef).reshape(x.shape)

    def gradient(self, coef, x):
        x = np.asarray(x, dtype=complex)
        d = x.reshape(-1)[:, None] - self.charges[None, :]
        g = (d / np.abs(d) ** 2) @ coef[1:]
        return g.reshape(x.shape)


def _resample_closed(pts, n):
    pts = np.asarray(pts, dtype=complex)
    closed = np.concatenate([pts, pts[:1]])
    seg = np.abs(np.diff(closed))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = np.linspace(0.0, s[-1], n, endpoint=False)
    return np.interp(t, s, closed.real) + 1j * np.interp(t, s, closed.imag)


# ---------------------------------------------------------------------------
# domain model
# ---------------------------------------------------------------------------

@dataclass
class DomainModel:
    """A bounded k-symmetric domain containing the origin.

    Use :func:`disk` or :func:`custom_domain` to construct.
    """

    kind: str
    k_sym: int
    radius: float = 1.0
    boundary: np.ndarray = field(default=None, repr=False)
    robin_00: float = 0.0
    mfs: MFSHarmonic = field(default=None, repr=False)

    @property
    def is_disk(self):
        return self.kind == "disk"

    def contains(self, x):
        x = np.asarray(x, dtype=complex)
        if self.is_disk:
            return np.abs(x) < self.radius
        th = np.angle(x)
        return np.abs(x) < self.boundary_radius(th)

    def boundary_radius(self, theta):
        """Radial function of the (star-shaped) boundary."""
        if self.is_disk:
            return np.full(np.shape(theta), self.radius)
        b = self.boundary
        ang = np.angle(b)
        order = np.argsort(ang)
        a = ang[order]
        r = np.abs(b)[order]
        a = np.concatenate([a[-1:] - TWO_PI, a, a[:1] + TWO_PI])
        r = np.concatenate([r[-1:], r, r[:1]])
        return np.interp(np.mod(np.asarray(theta) + np.pi, TWO_PI) - np.pi, a, r)

    def to_json(self):
        d = {"kind": self.kind, "k_sym": self.k_sym}
        if self.is_disk:
            d["R"] = self.radius
        else:
            d["boundary"] = [[float(z.real), float(z.imag)] for z in self.boundary]
        return d


def disk(R=1.0, k_sym=4):
    """Disk of radius R centred at the origin."""
    if R <= 0:
        raise ValueError("radius must be positive")
    return DomainModel(kind="disk", k_sym=int(k_sym), radius=float(R),
                       robin_00=float(np.log(R) / TWO_PI))


def custom_domain(boundary, k_sym, n_charges=None, tol=1e-3, check_symmetry=True):
    """Domain bounded by a closed polyline (complex points, counterclockwise).

    The boundary must be star-shaped about the origin and invariant under
    conjugation and rotation by 2 pi / k_sym up to ``tol`` relative to the
    polyline spacing.
    """
    b = np.asarray(boundary)
    if not np.iscomplexobj(b):
        b = b[:, 0] + 1j * b[:, 1]
    b = b.astype(complex)
    if check_symmetry:
        _check_symmetry(b, k_sym, tol)
    n_charges = n_charges or 16 * int(k_sym)
    mfs = MFSHarmonic(b, n_charges)
    dom = DomainModel(kind="custom", k_sym=int(k_sym), radius=float(np.max(np.abs(b))),
                      boundary=b, mfs=mfs)
    dom.robin_00 = float(green(dom, 0.0, 0.0)["H"])
    return dom


def star_domain(radius_fn, k_sym, n=1024, **kw):
    """Custom domain with boundary r = radius_fn(theta)."""
    th = TWO_PI * np.arange(n) / n
    return custom_domain(radius_fn(th) * np.exp(1j * th), k_sym, **kw)


def _check_symmetry(b, k, tol):
    h = np.max(np.abs(np.diff(np.concatenate([b, b[:1]]))))
    rot = np.exp(2j * np.pi / k)
    for img in (np.conj(b), rot * b):
        d = np.min(np.abs(img[:, None] - b[None, :]), axis=1)
        if np.max(d) > h * (1.0 + tol):
            raise ValueError("boundary is not k-symmetric to polyline tolerance")


def domain_from_json(obj, k_sym=None):
    """Build a domain from a dict or a path to a JSON file."""
    if isinstance(obj, (str, bytes)) or hasattr(obj, "__fspath__"):
        with open(obj, encoding="utf-8") as fh:
            obj = json.load(fh)
    k = int(obj.get("k_sym", k_sym or 4))
    if obj["kind"] == "disk":
        return disk(float(obj.get("R", 1.0)), k)
    if obj["kind"] == "custom":
        return custom_domain(np.asarray(obj["boundary"], dtype=float), k)
    raise ValueError(f"unknown domain kind {obj['kind']!r}")


# ---------------------------------------------------------------------------
# Green function
# ---------------------------------------------------------------------------

def green(dom, x, y):
    """Green function G(x, y) and its regular part H(x, y)."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if dom.is_disk:
        R2 = dom.radius ** 2
        num = np.abs(x) ** 2 * np.abs(y) ** 2 - 2.0 * R2 * (x * np.conj(y)).real + R2 * R2
        H = np.log(num / R2) / (2.0 * TWO_PI)
    else:
        H = np.empty(np.broadcast(x, y).shape)
        xb, yb = np.broadcast_arrays(x, y)
        for idx in np.ndindex(H.shape if H.shape else (1,)):
            xi = xb[idx] if H.shape else xb
            yi = yb[idx] if H.shape else yb
            coef, _ = dom.mfs.fit(lambda s: np.log(np.abs(s - yi)) / TWO_PI)
            val = dom.mfs.evaluate(coef, xi)
            if H.shape:
                H[idx] = val
            else:
                H = val
    with np.errstate(divide="ignore"):
        G = -np.log(np.abs(x - y)) / TWO_PI + H
    return {"G": G, "H": H}


def image_domain(dom):
    """Image of the domain under w = x^k (as a domain with k_sym = 1)."""
    k = dom.k_sym
    if dom.is_disk:
        return disk(dom.radius ** k, 1)
    th = np.linspace(0.0, TWO_PI / k, 64 * k, endpoint=False)
    pts = dom.boundary_radius(th) * np.exp(1j * th)
    return custom_domain(pts ** k, 1, check_symmetry=False)


def robin_ksym_identity_check(dom, x, image=None):
    """|H_{image}(x^k, 0) - k H(x, 0)| for the domain and its k-th power image."""
    k = dom.k_sym
    x = np.asarray(x, dtype=complex)
    image = image or image_domain(dom)
    lhs = green(image, x ** k, 0.0)["H"]
    rhs = k * green(dom, x, 0.0)["H"]
    return np.abs(lhs - rhs)


# ---------------------------------------------------------------------------
# projection
# ---------------------------------------------------------------------------

class Projected:
    """Evaluator for P(phi) = phi - h."""

    def __init__(self, value, harmonic, boundary_residual):
        self._value = value
        self.harmonic = harmonic
        self.boundary_residual = boundary_residual

    def __call__(self, x):
        return self._value(x) - self.harmonic(x)


def project(dom, value, mode=None, n=512):
    """Project a field onto H^1_0(dom).

    Parameters
    ----------
    dom : DomainModel
    value : callable
        Field values at complex points (must extend continuously to the
        boundary).  The Laplacian is unchanged by the projection.
    mode : {"exact_disk", "collocation"}, optional
        Defaults to ``exact_disk`` on disks.

    Returns
    -------
    Projected
        Callable, with ``harmonic`` (the subtracted h) and
        ``boundary_residual`` (max |P phi| on boundary check points).
    """
    mode = mode or ("exact_disk" if dom.is_disk else "collocation")
    if mode == "exact_disk":
        if not dom.is_disk:
            raise ValueError("exact_disk projection needs a disk domain")
        h = FourierExtension(value, dom.radius, n)
        chk = dom.radius * np.exp(1j * (TWO_PI * (np.arange(4 * n) + 0.5) / (4 * n)))
    elif mode == "collocation":
        mfs = dom.mfs if dom.mfs is not None else MFSHarmonic(
            dom.radius * np.exp(1j * TWO_PI * np.arange(n) / n), 16 * dom.k_sym)
        coef, _ = mfs.fit(value)
        h = lambda x: mfs.evaluate(coef, x)
        chk = mfs.samples
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    resid = float(np.max(np.abs(value(chk) - h(chk))))
    return Projected(value, h, resid)


# ---------------------------------------------------------------------------
# closed forms on disks for the fields of the ansatz
# ---------------------------------------------------------------------------

def _ring_root(a, b):
    """Smaller root c of c^2 - S c + 1 = 0 with S = (1 + a^2 + b^2)/a.

    On the unit circle 1 + a^2 + b^2 - 2 a Re w = (a/c) |1 - c w|^2.
    """
    S = (1.0 + a * a + b * b) / a
    # stable form of (S - sqrt(S^2 - 4)) / 2
    return 2.0 / (S + np.sqrt(S * S - 4.0))


def ring_bubble_harmonic(w, a, b, R, k):
    """Harmonic h with h = -2 log(|w - a|^2 + b^2) on |w| = R^k.

    For the ring bubble U2 = log(8 k^2 b^2) - 2 log(|w - a|^2 + b^2) the
    projection onto the disk of radius R is U2 - log(8 k^2 b^2) - h.
    """
    Rk = R ** k
    a1, b1 = a / Rk, b / Rk
    c = _ring_root(a1, b1)
    w1 = np.asarray(w, dtype=complex) / Rk
    return -2.0 * (2.0 * np.log(Rk) + np.log(a1 / c) + np.log(np.abs(1.0 - c * w1) ** 2))


def ring_translation_harmonic(w, a, b, R, k):
    """Harmonic part of the ring translation kernel on the disk of radius R.

    The kernel 4 b Re(w - a) / (|w - a|^2 + b^2) is b times the
    a-derivative of the ring bubble, so its harmonic part is b times the
    a-derivative of ``ring_bubble_harmonic``.
    """
    Rk = R ** k
    a1, b1 = a / Rk, b / Rk
    c = _ring_root(a1, b1)
    S = (1.0 + a1 * a1 + b1 * b1) / a1
    dS = (a1 * a1 - 1.0 - b1 * b1) / (a1 * a1)
    dc = c / (2.0 * c - S) * dS
    w1 = np.asarray(w, dtype=complex) / Rk
    dlog = 1.0 / a1 - dc / c - 2.0 * dc * (w1 / (1.0 - c * w1)).real
    return -2.0 * b1 * dlog
