"""Scaling parameters of the two-bubble cluster.

The ansatz depends on an amplitude tau, the concentration scale alpha of the
positive bubble at the origin, the scale beta of the k negative bubbles, the
radius rho of the ring carrying them and the free ratio eta of the two
amplitudes.  For fixed (k, p, eta) the first four solve a system of four
equations which becomes linear after taking logarithms, so everything here
works with (log tau, log alpha, log beta, log rho) and never forms the huge
powers (p tau)^p explicitly.

Also collected here: the closed-form limit constants of the cluster branch,
the admissibility conditions on eta, and a small utility comparing the large
power (1 + a/p + b/p^2 + c/p^3)^p with its exponential expansion.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import bisect

from .radial_profiles import C1_EXACT

LOG8 = np.log(8.0)


# ---------------------------------------------------------------------------
# limit constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LimitConstants:
    k: float
    eta_inf: float
    t_k: float
    a_k: float
    b_k: float
    r_k: float
    E_total: float
    E_plus: float
    E_minus: float

    def to_dict(self):
        return asdict(self)


def limit_constants(k):
    """Closed-form limits of the cluster branch for symmetry order ``k``.

    ``k`` may be real (used when maximizing the total energy in k).
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    k = float(k)
    lg = np.log((k - 1.0) / 2.0)
    s = (k + 1.0) ** 2
    E_plus = 8 * np.pi * np.e * ((k - 1) / 2) ** (8 * k / s)
    E_minus = 8 * np.pi * np.e * k * (2 / (k - 1)) ** (2 * (k - 1) ** 2 / s)
    return LimitConstants(
        k=k,
        eta_inf=2.0 / (k - 1.0),
        t_k=np.sqrt(np.e) * (2.0 / (k - 1.0)) ** (-4.0 * k / s),
        a_k=0.25 * (1.0 + 8.0 * k / s * lg),
        b_k=(1.0 + 2.0 * (k - 1) ** 2 / s * lg) / (4.0 * k),
        r_k=(k - 1.0) / s * lg,
        E_total=total_energy(k),
        E_plus=E_plus,
        E_minus=E_minus,
    )


def total_energy(k):
    """E(k) = 8 pi e ((k+1)/(k-1))^2 ((k-1)/2)^(8k/(k+1)^2), real k > 1."""
    k = np.asarray(k, dtype=float)
    return 8 * np.pi * np.e * ((k + 1) / (k - 1)) ** 2 * ((k - 1) / 2) ** (8 * k / (k + 1) ** 2)


def k0_objective(k):
    """1/2 - ((k-1)/(k+1)) log((k-1)/2); its root bounds the admissible k."""
    return 0.5 - (k - 1.0) / (k + 1.0) * np.log((k - 1.0) / 2.0)


def find_k0(tol=1e-12):
    """Root of ``k0_objective`` in (3, 6) by bisection."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return bisect(k0_objective, 3.0, 6.0, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

def _den(k, eta):
    return (k * eta - 1.0) * (eta + 1.0)


def check_admissible(k, eta):
    """Evaluate the four conditions on eta.

    Returns
    -------
    dict
        ``ok``: all strict inequalities hold; ``margins``: the four signed
        margins (eta window, ring-vs-bubble, origin, mixed); ``epsilon``:
        the explicit exponential rate, only when ``ok``.
    """
    if k < 2 or eta <= 0:
        raise ValueError("need k >= 2 and eta > 0")
    lg = np.log(eta)
    m_window = min(eta - 2.0 / k, 1.0 - eta)
    m_cond = 0.5 + lg / (eta + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        m_alpha = 0.5 + k * eta ** 2 * lg / _den(k, eta)
        m_k = 0.5 + (k + 1) * eta * lg / (2.0 * _den(k, eta))
    margins = [float(m_window), float(m_cond), float(m_alpha), float(m_k)]
    ok = all(np.isfinite(m) and m > 0 for m in margins)
    eps = 0.25 * min(1.0, m_cond / k, m_alpha) if ok else None
    return {"ok": ok, "margins": margins, "epsilon": eps}


# ---------------------------------------------------------------------------
# the parameter system
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BubbleParams:
    """Solved parameters.  The logarithms are the primary data."""

    k: int
    p: float
    eta: float
    log_tau: float
    log_alpha: float
    log_beta: float
    log_rho: float
    robin_00: float = 0.0
    c1: float = C1_EXACT
    c2: float = 0.0

    @property
    def tau(self):
        return float(np.exp(self.log_tau))

    @property
    def alpha(self):
        return float(np.exp(self.log_alpha))

    @property
    def beta(self):
        return float(np.exp(self.log_beta))

    @property
    def rho(self):
        return float(np.exp(self.log_rho))

    @property
    def logs(self):
        return np.array([self.log_tau, self.log_alpha, self.log_beta, self.log_rho])

    def residuals(self):
        return parameter_residuals(self.k, self.p, self.eta, self.logs,
                                   self.robin_00, self.c1, self.c2)

    def to_dict(self):
        d = asdict(self)
        d.update(tau=self.tau, alpha=self.alpha, beta=self.beta, rho=self.rho)
        return d


def _amplitude(p, c1, c2):
    return 4.0 - c1 / p - c2 / p ** 2


def _terms(k, p, eta, x, robin_00, c1, c2):
    """Signed terms of the four log-form equations (each row sums to 0)."""
    lt, la, lb, lr = x
    A = _amplitude(p, c1, c2)
    L = np.log(p)
    le = np.log(eta)
    H = robin_00
    return [
        [lt, -2.0 * la, -p * L, -p * lt],
        [lt, le, 2.0 * np.log(k), (2 * k - 2) * lr, -2 * k * lb, -p * L, -p * lt, -p * le],
        [A * k * eta * lr, -A * la, -LOG8, 2 * np.pi * A * (1 - k * eta) * H, -p],
        [A * lr / eta, -A * k * lb, -LOG8, 2 * np.pi * A * (k - 1.0 / eta) * H, -p],
    ]


def parameter_residuals(k, p, eta, x, robin_00=0.0, c1=C1_EXACT, c2=0.0):
    """Relative residuals of the four log-form equations.

    Each residual is |sum of terms| / (1 + sum of |terms|), which is the
    meaningful accuracy measure when individual terms are of size p log p.
    """
    out = []
    for row in _terms(k, p, eta, x, robin_00, c1, c2):
        row = np.asarray(row, dtype=float)
        out.append(abs(np.sum(row)) / (1.0 + np.sum(np.abs(row))))
    return np.array(out)


def _raw(k, p, eta, x, robin_00, c1, c2):
    return np.array([np.sum(r) for r in _terms(k, p, eta, x, robin_00, c1, c2)])


def _jacobian(k, p, eta, c1, c2):
    A = _amplitude(p, c1, c2)
    return np.array([
        [1.0 - p, -2.0, 0.0, 0.0],
        [1.0 - p, 0.0, -2.0 * k, 2.0 * k - 2.0],
        [0.0, -A, 0.0, A * k * eta],
        [0.0, 0.0, -A * k, A / eta],
    ])


def asymptotic_parameters(k, p, eta, robin_00=0.0, c1=C1_EXACT):
    """Leading-order closed forms, used as Newton seed.

    The amplitude factor 4 - C1/p - C2/p^2 is expanded to first order, which
    decouples the ring radius:

        log rho = (2 (p-1) log eta - 4 log k + h3 - h4)
                  / (4 k eta - 4/eta + 4k - 4)

    with h3, h4 the Robin contributions; the other logs follow by back
    substitution.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    L = np.log(p)
    le = np.log(eta)
    c = c1 / 4.0 + LOG8
    h3 = -8 * np.pi * (1 - k * eta) * robin_00
    h4 = -8 * np.pi * (k - 1.0 / eta) * robin_00
    lr = (2 * (p - 1) * le - 4 * np.log(k) + h3 - h4) / (4 * k * eta - 4 / eta + 4 * k - 4)
    lt = (p + c - 2 * p * L + h3 - 4 * k * eta * lr) / (2.0 * (p - 1))
    la = -0.5 * (p * L + (p - 1) * lt)
    lb = ((2 * k - 2) * lr - p * L - (p - 1) * (lt + le) + 2 * np.log(k)) / (2.0 * k)
    return BubbleParams(k=k, p=float(p), eta=float(eta), log_tau=lt, log_alpha=la,
                        log_beta=lb, log_rho=lr, robin_00=robin_00, c1=c1, c2=0.0)


def limit_rates(k, eta):
    """Exponential rates of alpha, beta, rho and the limit of tau p for a
    fixed eta (first-order closed forms)."""
    le = np.log(eta)
    d = _den(k, eta)
    return {
        "tau_p": np.sqrt(np.e) * eta ** (-k * eta ** 2 / d),
        "alpha": 0.25 * (1 - 2 * k * eta ** 2 * le / d),
        "beta": (1 - 2 * le / d) / (4.0 * k),
        "rho": -eta * le / (2.0 * d),
    }


def solve_parameter_system(k, p, eta, robin_00=0.0, c1=C1_EXACT, c2=0.0, seed=None,
                           tol=1e-13, max_iter=20):
    """Solve for (tau, alpha, beta, rho) by Newton in the log variables.

    Parameters
    ----------
    k : int
    p : float
    eta : float
        Must be admissible for k.
    robin_00 : float
        Regular part of the Green function at the origin.
    c1, c2 : float
        Log coefficients of the correction profiles.
    seed : BubbleParams, optional
        Defaults to ``asymptotic_parameters``.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    adm = check_admissible(k, eta)
    if not adm["ok"]:
        raise ValueError(f"eta={eta} is not admissible for k={k}: margins {adm['margins']}")
    if seed is None:
        seed = asymptotic_parameters(k, p, eta, robin_00, c1)
    x = seed.logs.copy()
    J = _jacobian(k, p, eta, c1, c2)
    hist = []
    for _ in range(max_iter):
        F = _raw(k, p, eta, x, robin_00, c1, c2)
        rel = parameter_residuals(k, p, eta, x, robin_00, c1, c2)
        hist.append(float(rel.max()))
        if rel.max() <= tol:
            break
        dx = np.linalg.solve(J, -F)
        x = x + dx
        if not np.all(np.isfinite(x)):
            raise RuntimeError("Newton diverged in the parameter system")
    else:
        raise RuntimeError(f"parameter Newton did not converge: history {hist}")
    return BubbleParams(k=k, p=float(p), eta=float(eta), log_tau=x[0], log_alpha=x[1],
                        log_beta=x[2], log_rho=x[3], robin_00=robin_00, c1=c1, c2=c2)


def richardson_limit(ps, values):
    """Extrapolate values(p) = c0 + c1 log(p)/p to p = infinity.

    Least squares over all supplied points; exact for two points.
    """
    ps = np.asarray(ps, dtype=float)
    values = np.asarray(values, dtype=float)
    B = np.column_stack([np.ones_like(ps), np.log(ps) / ps])
    coef, *_ = np.linalg.lstsq(B, values, rcond=None)
    return float(coef[0])


# ---------------------------------------------------------------------------
# large power versus exponential
# ---------------------------------------------------------------------------

def taylor_check(a, b, c, p, C=4.0):
    """Compare (1 + a/p + b/p^2 + c/p^3)^p with its two-term expansion.

    Returns
    -------
    dict with ``exact``, ``expansion`` and ``bound_const``; the latter is the
    remainder normalized by e^a (1 + a^6 + b^6 + c^6) / p^3.
    """
    if not (-(1.0 - 1.0 / C) * p <= a <= C and abs(b) + abs(c) <= C * p):
        raise ValueError("(a, b, c) outside the admissible box for this p")
    x = a / p + b / p ** 2 + c / p ** 3
    if x <= -1.0:
        raise ValueError("base of the power is not positive")
    exact = np.exp(p * np.log1p(x))
    s = b - a * a / 2.0
    expansion = np.exp(a) * (1.0 + s / p + (c - a * b + a ** 3 / 3.0 + 0.5 * s * s) / p ** 2)
    norm = np.exp(a) * (1.0 + a ** 6 + b ** 6 + c ** 6)
    return {"exact": float(exact), "expansion": float(expansion),
            "bound_const": float(abs(exact - expansion) * p ** 3 / norm)}


def sample_taylor_triples(n, p, rng, C=4.0, floor=1e-3):
    """Random triples in the admissible box for ``taylor_check``.

    Magnitudes are log-uniform between ``floor`` and the box edge, so every
    scale of the box is sampled; the normalized remainder peaks at O(1)
    values, which a uniform draw over a box of size p almost never visits.
    """
    lo = (1.0 - 1.0 / C) * p
    w_neg = np.log(lo / floor) / (np.log(lo / floor) + np.log(C / floor))
    neg = rng.uniform(size=n) < w_neg
    mag = np.exp(rng.uniform(np.log(floor), np.log(np.where(neg, lo, C))))
    a = np.where(neg, -mag, mag)
    tot = np.exp(rng.uniform(np.log(floor), np.log(C * p * (1.0 - 1e-12)), size=n))
    share = rng.uniform(size=n)
    b = share * tot * rng.choice([-1.0, 1.0], size=n)
    c = (1.0 - share) * tot * rng.choice([-1.0, 1.0], size=n)
    return a, b, c
