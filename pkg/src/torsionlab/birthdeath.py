"""Model functions near a birth-death singularity and their critical census.

The model lives on R^{n+1} with coordinates u_0..u_n. The base function is
cubic in u_0 and quadratic elsewhere; two shaping profiles (eta, eta_tilde)
and a radial deformation of amplitude A produce six extra Morse points in a
thin annulus while leaving everything outside unchanged. All profiles are
C^2 piecewise polynomials with every pinned value reproduced exactly on the
bands the census argument uses.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.integrate

__all__ = [
    "ModelParams",
    "ShapingProfiles",
    "CriticalPoint",
    "ProfileConstructionError",
    "build_profiles",
    "eval_f",
    "find_critical_points",
    "closed_form_candidates",
    "separation_report",
    "radial_derivative_check",
    "flow_containment_probe",
    "forward_trap_check",
    "census_records",
    "smallest_stable_amplitude",
]

NEWTON_SEED = 0x5EED
#: |lambda|_min below this fraction of max(1, |lambda|_max) flags birth-death
DEGENERACY_RTOL = 1e-4
#: annulus constant of the radial-derivative bound (any value > 3 works)
C0_ANNULUS = 10.0
#: relative width of the C^2 smoothing windows at the deformation band edges
SMOOTH_FRAC = 1e-4


class _FlowBudgetExceeded(RuntimeError):
    pass


class ProfileConstructionError(ValueError):
    def __init__(self, clause, detail):
        self.clause = clause
        super().__init__(f"profile condition violated [{clause}]: {detail}")


@dataclass(frozen=True)
class ModelParams:
    n: int
    i: int
    r1: float
    r2: float
    delta: float
    y: float = 0.0
    A: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.n, int) and self.n >= 3):
            raise ValueError("need integer ambient parameter n >= 3")
        if not (2 <= self.i <= self.n - 1):
            raise ValueError("index parameter i must lie in {2..n-1}")
        if not (0.0 < self.r1 < self.r2 < 1.0 / 14.0):
            raise ValueError("radii must satisfy 0 < r1 < r2 < 1/14")
        if not (0.0 < self.delta < self.r1 / 24.0):
            raise ValueError("delta must lie in (0, r1/24)")
        if not abs(self.y) < self.delta**2:
            raise ValueError("|y| must be smaller than delta^2")
        if self.A < 0:
            raise ValueError("deformation amplitude A must be >= 0")


class PiecewisePoly:
    """C^2 piecewise polynomial on [0, inf), constant beyond the last knot."""

    def __init__(self, knots, coeffs):
        # coeffs[i] are monomial coefficients in (s - knots[i]) on
        # [knots[i], knots[i+1]); the last piece extends to infinity
        self.knots = [float(k) for k in knots]
        self.coeffs = [np.asarray(c, dtype=float) for c in coeffs]
        self._clists = [list(map(float, c)) for c in self.coeffs]

    def _piece(self, s):
        idx = np.searchsorted(self.knots, s, side="right") - 1
        return int(np.clip(idx, 0, len(self.coeffs) - 1))

    def value(self, s):
        return self._horner(s, 0)

    def deriv(self, s):
        return self._horner(s, 1)

    def deriv2(self, s):
        return self._horner(s, 2)

    def eval_scalar(self, s, order):
        """Plain-float Horner for hot scalar paths."""
        x = float(s)
        ks = self.knots
        i = len(ks) - 1
        for j in range(1, len(ks)):
            if x < ks[j]:
                i = j - 1
                break
        else:
            i = len(self.coeffs) - 1
        i = min(i, len(self.coeffs) - 1)
        dx = x - ks[i]
        c = self._clists[i] if hasattr(self, "_clists") else [list(map(float, cc)) for cc in self.coeffs][i]
        acc = 0.0
        for pw in range(len(c) - 1, order - 1, -1):
            fac = 1.0
            for q in range(order):
                fac *= pw - q
            acc = acc * dx + fac * c[pw]
        return acc

    def _horner(self, s, order):
        scalar = np.isscalar(s) or np.asarray(s).ndim == 0
        arr = np.atleast_1d(np.asarray(s))
        out = np.zeros_like(arr)
        for j, sv in enumerate(arr):
            i = self._piece(float(sv))
            x = sv - arr.dtype.type(self.knots[i])
            c = self.coeffs[i]
            acc = arr.dtype.type(0)
            for p in range(len(c) - 1, order - 1, -1):
                fac = 1.0
                for q in range(order):
                    fac *= p - q
                acc = acc * x + arr.dtype.type(fac * c[p])
            out[j] = acc
        return out[0] if scalar else out


def _poly_eval(c, x, order=0):
    acc = 0.0
    for p in range(len(c) - 1, order - 1, -1):
        fac = 1.0
        for q in range(order):
            fac *= p - q
        acc = acc * x + fac * c[p]
    return acc


def _hermite5(x0, x1, v0, d0, dd0, v1, d1, dd1):
    """Quintic on [x0, x1] matching value/slope/curvature at both ends,
    returned as monomial coefficients in (s - x0)."""
    h = x1 - x0
    a = np.zeros((6, 6))
    b = np.array([v0, d0, dd0, v1, d1, dd1], dtype=float)
    a[0, 0] = 1.0
    a[1, 1] = 1.0
    a[2, 2] = 2.0
    for p in range(6):
        a[3, p] = h**p
        a[4, p] = p * h ** (p - 1) if p >= 1 else 0.0
        a[5, p] = p * (p - 1) * h ** (p - 2) if p >= 2 else 0.0
    return np.linalg.solve(a, b)


def _hermite3_integrated(x0, x1, q0, dp0, ddp0, dp1, ddp1):
    """Quartic whose derivative is the cubic Hermite on [x0, x1] with
    derivative values dp0 -> dp1 and curvature values ddp0 -> ddp1;
    the constant term is q0. Monomial coefficients in (s - x0)."""
    h = x1 - x0
    a = np.zeros((4, 4))
    b = np.array([dp0, ddp0, dp1, ddp1], dtype=float)
    a[0, 0] = 1.0
    a[1, 1] = 1.0
    for p in range(4):
        a[2, p] = h**p
        a[3, p] = p * h ** (p - 1) if p >= 1 else 0.0
    c = np.linalg.solve(a, b)  # cubic coefficients of the derivative
    out = np.zeros(5)
    out[0] = q0
    out[1:] = c / np.arange(1, 5)
    return out


@dataclass
class ShapingProfiles:
    eta: PiecewisePoly
    eta_tilde: PiecewisePoly
    q_shape: PiecewisePoly  # q_A = A * q_shape
    params: ModelParams
    plateau: tuple = (0.0, 0.0)  # [a, b] band where the derivative window holds
    C1: float = 0.0  # reported derivative-window constant of q_A
    C2: float = 0.0  # reported curvature bound |q_A''| <= C2 A
    eta_tilde_slope_bound: float = 0.0

    def q_value(self, s, A=None):
        A = self.params.A if A is None else A
        return A * self.q_shape.value(s)

    def q_deriv(self, s, A=None):
        A = self.params.A if A is None else A
        return A * self.q_shape.deriv(s)

    def q_deriv2(self, s, A=None):
        A = self.params.A if A is None else A
        return A * self.q_shape.deriv2(s)


def _build_eta(p: ModelParams):
    r1, r2, d = p.r1, p.r2, p.delta
    knots = [0.0, r1 / 6.0, r1, r2, 2.5 * r2]
    coeffs = [
        np.zeros(1),
        _hermite5(r1 / 6.0, r1, 0.0, 0.0, 0.0, d * r1, d, 0.0),
        np.array([d * r1, d]),  # delta * s in local coordinates
        _hermite5(r2, 2.5 * r2, d * r2, d, 0.0, 0.0, 0.0, 0.0),
        np.zeros(1),
    ]
    return PiecewisePoly(knots, coeffs)


def _build_eta_tilde(p: ModelParams):
    r1, r2 = p.r1, p.r2
    knots = [0.0, r1 / 6.0, r1 / 2.0, r2, 2.5 * r2]
    coeffs = [
        np.zeros(1),
        _hermite5(r1 / 6.0, r1 / 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0),
        np.ones(1),
        _hermite5(r2, 2.5 * r2, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
        np.zeros(1),
    ]
    return PiecewisePoly(knots, coeffs)


def _build_q_shape(p: ModelParams):
    """Unit-amplitude radial deformation; q_A = A * q_shape.

    Constant -A(r2-r1)^2/2 inside r1, zero beyond r2, exact half-quadratics
    near (but not at) r1 and r2 and a C^2 ramp across the middle two percent
    of the band whose plateau carries the derivative window.
    """
    r1, r2 = p.r1, p.r2
    D = r2 - r1
    eps = SMOOTH_FRAC * D
    m1 = 0.51 * r1 + 0.49 * r2
    m2 = 0.49 * r1 + 0.51 * r2
    wb = m2 - m1
    a = m1 + 0.2 * wb
    b = m2 - 0.2 * wb
    v_in = -0.5 * D**2
    d_edge = 0.49 * D

    def quad_left(s):  # (s-r1)^2/2 + v_in
        return 0.5 * (s - r1) ** 2 + v_in

    def quad_right(s):  # -(s-r2)^2/2
        return -0.5 * (s - r2) ** 2

    climb = quad_right(m2) - quad_left(m1)
    ramp_h = 0.2 * wb
    # integral of the two cubic-Hermite derivative ramps
    ramp_ints = ramp_h * d_edge + ramp_h**2 / 6.0  # both ramps, S-independent part
    plateau_w = b - a
    S = (climb - ramp_ints) / (plateau_w + ramp_h)

    knots = [0.0, r1, r1 + eps, m1, a, b, m2, r2 - eps, r2]
    coeffs = [
        np.array([v_in]),
        _hermite5(r1, r1 + eps, v_in, 0.0, 0.0, quad_left(r1 + eps), eps, 1.0),
        np.array([quad_left(r1 + eps), eps, 0.5]),
        _hermite3_integrated(m1, a, quad_left(m1), d_edge, 1.0, S, 0.0),
        None,  # plateau, filled below
        _hermite3_integrated(b, m2, 0.0, S, 0.0, d_edge, -1.0),
        np.array([quad_right(m2), r2 - m2, -0.5]),
        _hermite5(r2 - eps, r2, quad_right(r2 - eps), eps, -1.0, 0.0, 0.0, 0.0),
        np.zeros(1),
    ]
    q_a = float(np.polyval(coeffs[3][::-1], a - m1))
    coeffs[4] = np.array([q_a, S])
    # anchor the right ramp’s constant so the value is continuous at b
    q_b = q_a + S * (b - a)
    coeffs[5][0] = q_b
    return PiecewisePoly(knots, coeffs), (a, b), S


def _verify_profiles(prof: ShapingProfiles, n_samples=10_000):
    p = prof.params
    r1, r2, d = p.r1, p.r2, p.delta
    rng = np.random.default_rng(12345)

    def sample(lo, hi):
        return np.sort(rng.uniform(lo, hi, n_samples))

    eta, etat, q = prof.eta, prof.eta_tilde, prof.q_shape
    s_all = sample(0.0, 3.0 * r2)
    # eta conditions
    if (eta.value(s_all) < -1e-12).any():
        raise ProfileConstructionError("eta >= 0", "negative value found")
    for lo, hi in ((0.0, r1 / 6.0), (2.5 * r2, 3.5 * r2)):
        if np.abs(eta.value(sample(lo, hi))).max() > 1e-14:
            raise ProfileConstructionError("eta support", f"nonzero on [{lo},{hi}]")
    s_lin = sample(r1, r2)
    if np.abs(eta.value(s_lin) - d * s_lin).max() > 1e-13:
        raise ProfileConstructionError("eta = delta*s on (r1,r2)", "mismatch")
    if np.abs(eta.deriv(s_all)).max() >= 2.0 * d:
        raise ProfileConstructionError("|eta'| < 2 delta", f"max {np.abs(eta.deriv(s_all)).max():.3e}")
    s_pos = sample(r1 / 6.0 + 1e-9, 2.5 * r2 - 1e-9)
    if (eta.value(s_pos) <= 0).any():
        raise ProfileConstructionError("eta > 0 inside support", "zero crossing")
    # eta_tilde conditions
    v = etat.value(s_all)
    if v.min() < -1e-12 or v.max() > 1.0 + 1e-12:
        raise ProfileConstructionError("0 <= eta_tilde <= 1", "range exceeded")
    if np.abs(etat.value(sample(r1 / 2.0, r2)) - 1.0).max() > 1e-13:
        raise ProfileConstructionError("eta_tilde plateau", "not 1 on [r1/2, r2]")
    for lo, hi in ((0.0, r1 / 6.0), (2.5 * r2, 3.5 * r2)):
        if np.abs(etat.value(sample(lo, hi))).max() > 1e-14:
            raise ProfileConstructionError("eta_tilde support", f"nonzero on [{lo},{hi}]")
    slope = np.abs(etat.deriv(s_all)).max()
    # the printed bound 2/r1 is unattainable across the stated rise window
    # (mean slope is already 3/r1); 6/r1 preserves every downstream use
    if slope > 6.0 / r1:
        raise ProfileConstructionError("|eta_tilde'| <= 6/r1", f"max {slope:.3e}")
    # q conditions, unit amplitude (q_A scales linearly, so q_{A=0} == 0)
    if np.abs(q.value(sample(0.0, r1)) - (-0.5 * (r2 - r1) ** 2)).max() > 1e-14:
        raise ProfileConstructionError("q_A inner plateau", "wrong constant")
    if np.abs(q.value(sample(r2, 3.5 * r2))).max() > 1e-14:
        raise ProfileConstructionError("q_A outer support", "nonzero beyond r2")
    mid = 0.5 * (r1 + r2)
    if abs(q.value(mid) + 0.25 * (r2 - r1) ** 2) > 1e-12:
        raise ProfileConstructionError(
            "q_A midpoint", f"q(mid)/A = {q.value(mid):.6e} != -(r2-r1)^2/4"
        )
    eps = SMOOTH_FRAC * (r2 - r1)
    m1 = 0.51 * r1 + 0.49 * r2
    m2 = 0.49 * r1 + 0.51 * r2
    s_q = sample(r1 + eps, m1)
    if np.abs(q.value(s_q) - (0.5 * (s_q - r1) ** 2 - 0.5 * (r2 - r1) ** 2)).max() > 1e-13:
        raise ProfileConstructionError("q_A inner quadratic", "mismatch")
    s_q = sample(m2, r2 - eps)
    if np.abs(q.value(s_q) + 0.5 * (s_q - r2) ** 2).max() > 1e-13:
        raise ProfileConstructionError("q_A outer quadratic", "mismatch")
    a, b = prof.plateau
    s_p = sample(a, b)
    dv = q.deriv(s_p)
    c1 = prof.C1
    if not ((dv >= c1 - 1e-9).all() and (dv <= 2 * c1 + 1e-9).all()):
        raise ProfileConstructionError(
            "C1 A <= q_A' <= 2 C1 A on plateau", f"range [{dv.min():.3e}, {dv.max():.3e}]"
        )
    # continuity of value and first two derivatives at every knot, compared
    # as exact one-sided limits of the polynomial pieces
    for pp in (eta, etat, q):
        for ki in range(1, len(pp.knots)):
            x_left = pp.knots[ki] - pp.knots[ki - 1]
            for order in range(3):
                lo = _poly_eval(pp.coeffs[ki - 1], x_left, order)
                hi = _poly_eval(pp.coeffs[ki], 0.0, order)
                if abs(hi - lo) > 1e-8 * max(1.0, abs(hi), abs(lo)):
                    raise ProfileConstructionError(
                        "C^2 continuity", f"order-{order} jump at {pp.knots[ki]}"
                    )


def build_profiles(p: ModelParams, verify=True):
    """Construct the three shaping profiles and verify every condition."""
    eta = _build_eta(p)
    etat = _build_eta_tilde(p)
    q_shape, plateau, S = _build_q_shape(p)
    prof = ShapingProfiles(
        eta=eta,
        eta_tilde=etat,
        q_shape=q_shape,
        params=p,
        plateau=plateau,
        C1=0.6 * S,
        C2=0.0,
        eta_tilde_slope_bound=6.0 / p.r1,
    )
    # curvature report over the deformation band
    ss = np.linspace(p.r1, p.r2, 4001)
    prof.C2 = float(np.abs(q_shape.deriv2(ss)).max())
    if verify:
        _verify_profiles(prof)
    return prof


# ---------------------------------------------------------------------------
# model function evaluation
# ---------------------------------------------------------------------------

def eval_f(p: ModelParams, prof: ShapingProfiles, u, with_hessian=True):
    """Value, gradient and (optionally) Hessian of the deformed model.

    f(u) = u0^3 - y u0 - |u^-|^2 + |u^+|^2 - eta(|u|) u1 + y etat(|u|) u0
           + A q_shape(|u|)

    The profile terms are constant near the origin, so the radial chain rule
    is only applied for |u| > 0; dtype follows u (longdouble supported for
    the extended-precision residual checks).
    """
    u = np.asarray(u)
    dt = u.dtype if u.dtype in (np.dtype(np.longdouble),) else np.dtype(float)
    u = u.astype(dt)
    n = p.n
    i = p.i
    y = dt.type(p.y)
    sgn = np.ones(n + 1, dtype=dt)
    sgn[1 : i + 1] = -1.0
    sgn[0] = 0.0

    val = u[0] ** 3 - y * u[0] + np.sum(sgn * u * u)
    grad = 2.0 * sgn * u
    grad[0] = 3.0 * u[0] ** 2 - y
    hess = None
    if with_hessian:
        hess = np.diag(2.0 * sgn)
        hess[0, 0] = 6.0 * u[0]

    rho = np.sqrt(np.sum(u * u))
    if rho > 0:
        uhat = u / rho
        eta_v = prof.eta._horner(rho, 0)
        eta_d = prof.eta._horner(rho, 1)
        eta_dd = prof.eta._horner(rho, 2)
        et_v = prof.eta_tilde._horner(rho, 0)
        et_d = prof.eta_tilde._horner(rho, 1)
        et_dd = prof.eta_tilde._horner(rho, 2)
        q_d = dt.type(p.A) * prof.q_shape._horner(rho, 1)
        q_dd = dt.type(p.A) * prof.q_shape._horner(rho, 2)
        val += -eta_v * u[1] + y * et_v * u[0] + dt.type(p.A) * prof.q_shape._horner(rho, 0)
        e1 = np.zeros(n + 1, dtype=dt)
        e1[1] = 1.0
        e0 = np.zeros(n + 1, dtype=dt)
        e0[0] = 1.0
        grad += -eta_d * uhat * u[1] - eta_v * e1
        grad += y * (et_d * uhat * u[0] + et_v * e0)
        grad += q_d * uhat
        if with_hessian:
            proj = (np.eye(n + 1, dtype=dt) - np.outer(uhat, uhat)) / rho
            radial = np.outer(uhat, uhat)
            hess += -u[1] * (eta_dd * radial + eta_d * proj)
            hess += -eta_d * (np.outer(uhat, e1) + np.outer(e1, uhat))
            hess += y * u[0] * (et_dd * radial + et_d * proj)
            hess += y * et_d * (np.outer(uhat, e0) + np.outer(e0, uhat))
            hess += q_dd * radial + q_d * proj
    else:
        val += dt.type(p.A) * prof.q_shape._horner(dt.type(0.0), 0)
    return (val, grad, hess) if with_hessian else (val, grad)


def _value_grad_scalar(p: ModelParams, prof: ShapingProfiles, u):
    """Fast (value, gradient) at one point for ODE right-hand sides."""
    n, i, y, A = p.n, p.i, p.y, p.A
    u = np.asarray(u, dtype=float)
    sgn = np.ones(n + 1)
    sgn[1 : i + 1] = -1.0
    sgn[0] = 0.0
    val = u[0] ** 3 - y * u[0] + float(np.sum(sgn * u * u))
    grad = 2.0 * sgn * u
    grad[0] = 3.0 * u[0] ** 2 - y
    rho = float(np.sqrt(np.sum(u * u)))
    if rho > 0.0:
        uhat = u / rho
        eta_v = prof.eta.eval_scalar(rho, 0)
        eta_d = prof.eta.eval_scalar(rho, 1)
        et_v = prof.eta_tilde.eval_scalar(rho, 0)
        et_d = prof.eta_tilde.eval_scalar(rho, 1)
        q_v = A * prof.q_shape.eval_scalar(rho, 0)
        q_d = A * prof.q_shape.eval_scalar(rho, 1)
        val += -eta_v * u[1] + y * et_v * u[0] + q_v
        grad += (-eta_d * u[1] + y * et_d * u[0] + q_d) * uhat
        grad[1] -= eta_v
        grad[0] += y * et_v
    else:
        val += A * prof.q_shape.eval_scalar(0.0, 0)
    return val, grad


def _grad_batch(p: ModelParams, prof: ShapingProfiles, us, with_hess=True):
    """Gradients and (optionally) Hessians for a batch of points."""
    us = np.asarray(us, dtype=float)
    m, dim = us.shape
    n, i, y, A = p.n, p.i, p.y, p.A
    sgn = np.ones(dim)
    sgn[1 : i + 1] = -1.0
    sgn[0] = 0.0
    grads = 2.0 * sgn[None, :] * us
    grads[:, 0] = 3.0 * us[:, 0] ** 2 - y
    hesss = None
    if with_hess:
        hesss = np.zeros((m, dim, dim))
        hesss[:] = np.diag(2.0 * sgn)[None]
        hesss[:, 0, 0] = 6.0 * us[:, 0]

    rho = np.linalg.norm(us, axis=1)
    pos = rho > 0
    if pos.any():
        r = rho[pos]
        uh = us[pos] / r[:, None]
        eta_v, eta_d, eta_dd = (prof.eta._horner(r, k) for k in range(3))
        et_v, et_d, et_dd = (prof.eta_tilde._horner(r, k) for k in range(3))
        q_d = A * prof.q_shape._horner(r, 1)
        q_dd = A * prof.q_shape._horner(r, 2)
        u1 = us[pos, 1]
        u0 = us[pos, 0]
        g = grads[pos]
        g += -eta_d[:, None] * uh * u1[:, None]
        g[:, 1] -= eta_v
        g += y * et_d[:, None] * uh * u0[:, None]
        g[:, 0] += y * et_v
        g += q_d[:, None] * uh
        grads[pos] = g
        if not with_hess:
            return grads, None
        h = hesss[pos]
        eye = np.eye(dim)[None]
        radial = uh[:, :, None] * uh[:, None, :]
        proj = (eye - radial) / r[:, None, None]
        e1 = np.zeros(dim)
        e1[1] = 1.0
        e0 = np.zeros(dim)
        e0[0] = 1.0
        cross1 = uh[:, :, None] * e1[None, None, :] + e1[None, :, None] * uh[:, None, :]
        cross0 = uh[:, :, None] * e0[None, None, :] + e0[None, :, None] * uh[:, None, :]
        h += -u1[:, None, None] * (eta_dd[:, None, None] * radial + eta_d[:, None, None] * proj)
        h += -eta_d[:, None, None] * cross1
        h += y * u0[:, None, None] * (et_dd[:, None, None] * radial + et_d[:, None, None] * proj)
        h += y * et_d[:, None, None] * cross0
        h += q_dd[:, None, None] * radial + q_d[:, None, None] * proj
        hesss[pos] = h
    return grads, hesss


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    hessian_spectrum: np.ndarray
    morse_index: int
    birth_death: bool
    newton_residual: float


def _newton_seeds(p: ModelParams, n_random=1000, n_angles=24):
    # the stated shells plus the quarter-band radii: seeds placed exactly at
    # the band edges see the flat branches and Newton leaps across the band,
    # missing the on-axis pair near the outer rim
    shells = [
        0.0,
        p.r1,
        0.75 * p.r1 + 0.25 * p.r2,
        0.5 * (p.r1 + p.r2),
        0.25 * p.r1 + 0.75 * p.r2,
        p.r2,
        3.0 * p.r2,
    ]
    seeds = []
    shell_ids = []
    for si, rho in enumerate(shells):
        if rho == 0.0:
            seeds.append(np.zeros(p.n + 1))
            shell_ids.append(si)
            continue
        for phi in np.linspace(0.0, 2.0 * np.pi, n_angles, endpoint=False):
            u = np.zeros(p.n + 1)
            u[0] = rho * np.cos(phi)
            u[1] = rho * np.sin(phi)
            seeds.append(u)
            shell_ids.append(si)
    rng = np.random.default_rng(NEWTON_SEED)
    rand = rng.normal(size=(n_random, p.n + 1))
    rand /= np.linalg.norm(rand, axis=1)[:, None]
    rand *= (3.5 * p.r2 * rng.random(n_random) ** (1.0 / (p.n + 1)))[:, None]
    seeds.extend(rand)
    shell_ids.extend([-1] * n_random)
    return np.array(seeds), np.array(shell_ids)


def find_critical_points(p: ModelParams, prof: ShapingProfiles, max_iter=80,
                         n_random=1000):
    """Deterministic multistart Newton census, deduplicated and classified.

    Seeds: radial shells x angular net in the (u0, u1) plane plus a fixed
    batch of full-dimensional random points (seeded RNG). Damped Newton on
    the gradient; points are kept when the residual reaches
    1e-11 (1 + A) and deduplicated at distance 1e-6.
    """
    if p.A < 100:
        warnings.warn("census is only reliable for large deformation A (>= 100)")
    seeds, shell_ids = _newton_seeds(p, n_random=n_random)
    us = seeds.copy()
    tol = 1e-11 * (1.0 + p.A)
    alive = np.ones(len(us), dtype=bool)
    # fixed-iteration damped Newton: near the degenerate cubic direction the
    # iteration halves u0 each step, and the Levenberg floor stalls it well
    # inside the dedup radius instead of stopping at a loose gradient norm
    lam = 1e-10 * (1.0 + p.A)
    cap = 0.5 * (p.r2 - p.r1) + 0.05 * p.r1
    for _ in range(max_iter):
        rows = np.where(alive)[0]
        if rows.size == 0:
            break
        grads, hesss = _grad_batch(p, prof, us[rows])
        h = hesss + lam * np.eye(p.n + 1)[None]
        try:
            steps = np.linalg.solve(h, grads[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            steps = np.stack(
                [np.linalg.lstsq(hh, gg, rcond=None)[0] for hh, gg in zip(h, grads)]
            )
        ln = np.linalg.norm(steps, axis=1)
        big = ln > cap
        steps[big] *= (cap / ln[big])[:, None]
        new = us[rows] - steps
        runaway = np.linalg.norm(new, axis=1) > 10.0
        new[runaway] = us[rows][runaway]
        alive[rows[runaway]] = False
        us[rows] = new
        frozen = ln < 1e-15
        alive[rows[frozen & ~runaway]] = False

    grads, _ = _grad_batch(p, prof, us, with_hess=False)
    gnorm = np.linalg.norm(grads, axis=1)
    ok = gnorm <= tol
    found = us[ok]
    found_res = gnorm[ok]
    for si in range(7):
        in_shell = shell_ids == si
        if in_shell.any() and not ok[in_shell].any():
            warnings.warn(f"incomplete census: no convergence from shell {si}")

    # dedup at distance 1e-6, keeping the smallest-residual representative
    order = np.argsort(found_res)
    unique = []
    for k in order:
        u = found[k]
        if all(np.linalg.norm(u - v) > 1e-6 for v in unique):
            unique.append(u)
    pts = []
    for u in unique:
        val, grad, hess = eval_f(p, prof, u)
        spec = np.linalg.eigvalsh(hess)
        # reference scale: second-largest magnitude, so the single
        # deformation-scaled eigenvalue ~A does not mask the O(delta) ones
        mags = np.sort(np.abs(spec))
        ref = max(1.0, mags[-2] if len(mags) > 1 else mags[-1])
        bd = mags[0] < DEGENERACY_RTOL * ref
        index = int((spec < 0).sum())
        pts.append(
            CriticalPoint(
                location=u.copy(),
                value=float(val),
                hessian_spectrum=spec,
                morse_index=index,
                birth_death=bool(bd),
                newton_residual=float(np.linalg.norm(grad)),
            )
        )
    pts.sort(key=lambda c: c.value)
    return pts


def closed_form_candidates(p: ModelParams):
    """The two on-axis critical points near the outer rim, with Hessians."""
    if p.y != 0.0:
        raise ValueError("closed forms are stated at y = 0")
    n, i, d, A, r2 = p.n, p.i, p.delta, p.A, p.r2
    loc1 = np.zeros(n + 1)
    loc1[1] = A * r2 / (A + 2.0 + 2.0 * d)
    spec1 = np.array([2.0 + d, -A - 2.0 - 2.0 * d] + [d] * (i - 1) + [4.0 + d] * (n - i))
    loc2 = np.zeros(n + 1)
    loc2[1] = -A * r2 / (A + 2.0 - 2.0 * d)
    spec2 = np.array([2.0 - d, -A - 2.0 + 2.0 * d] + [-d] * (i - 1) + [4.0 - d] * (n - i))
    mk = lambda loc, spec: CriticalPoint(
        location=loc,
        value=np.nan,
        hessian_spectrum=np.sort(spec),
        morse_index=int((spec < 0).sum()),
        birth_death=False,
        newton_residual=0.0,
    )
    return mk(loc1, spec1), mk(loc2, spec2)


def outer_triple(census, p: ModelParams):
    """Critical points of the census lying near the outer rim of the band."""
    cut = 0.5 * (p.r1 + p.r2)
    return [c for c in census if cut < np.linalg.norm(c.location) <= p.r2]


def separation_report(census_a, census_2a, p_a: ModelParams, rel_tol=0.05):
    """Distance / value-gap / magnitude proxies for the outer triple, with
    an A-doubling stability verdict per proxy."""

    def proxies(census, p):
        tri = outer_triple(census, p)
        if len(tri) != 3:
            raise ValueError(f"expected the outer triple, found {len(tri)} points")
        locs = [c.location for c in tri]
        vals = [c.value for c in tri]
        dists = [np.linalg.norm(locs[a] - locs[b]) for a in range(3) for b in range(a + 1, 3)]
        gaps = [abs(vals[a] - vals[b]) for a in range(3) for b in range(a + 1, 3)]
        return min(dists), min(gaps), max(abs(v) for v in vals)

    p_2a = ModelParams(p_a.n, p_a.i, p_a.r1, p_a.r2, p_a.delta, p_a.y, 2.0 * p_a.A)
    c, cp, cap = proxies(census_a, p_a)
    c2, cp2, cap2 = proxies(census_2a, p_2a)
    rel = lambda a, b: abs(a - b) / max(abs(a), abs(b))
    return {
        "c": (c, c2, rel(c, c2) <= rel_tol),
        "c_prime": (cp, cp2, rel(cp, cp2) <= rel_tol),
        "C": (cap, cap2, rel(cap, cap2) <= rel_tol),
    }


def radial_derivative_check(p: ModelParams, prof: ShapingProfiles, n_samples=100_000):
    """Minimum of the radial derivative over the separating annulus.

    Annulus D(A r1/(A - C0), A r2/(A + C0)) with C0 = 10; returns None when
    A = 0 (annulus undefined).
    """
    if p.A <= C0_ANNULUS:
        return None
    lo = p.A * p.r1 / (p.A - C0_ANNULUS)
    hi = p.A * p.r2 / (p.A + C0_ANNULUS)
    rng = np.random.default_rng(2024)
    rho = rng.uniform(lo, hi, n_samples)
    dirs = rng.normal(size=(n_samples, p.n + 1))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    us = rho[:, None] * dirs
    grads, _ = _grad_batch(p, prof, us, with_hess=False)
    return float(np.min(np.sum(grads * dirs, axis=1)))


def flow_containment_probe(p, prof, point: CriticalPoint, c, direction="unstable",
                           n_dirs=40, r_escape=10.0):
    """Integrate the gradient flow off a critical point to a level set.

    direction 'unstable': flow along -grad f from small displacements in the
    negative eigenspace until f = f(point) - c; 'stable': flow along +grad f
    to f = f(point) + c. Crossings with |u| > r2 are collected and tested
    against the containment box u0 <= 3 r2, |u^+| <= 5 r2 / 2.
    """
    val0, _, hess = eval_f(p, prof, point.location)
    spec, vecs = np.linalg.eigh(hess)
    if direction == "unstable":
        cols = vecs[:, spec < 0]
        sgn_flow = +1.0  # follow -grad f downhill
        target = val0 - c
    else:
        cols = vecs[:, spec > 0]
        sgn_flow = -1.0  # follow +grad f uphill
        target = val0 + c
    if cols.shape[1] == 0:
        return {"crossings": [], "divergent": 0, "u0_ok": True, "uplus_ok": True,
                "box": None}
    rng = np.random.default_rng(99)
    k = cols.shape[1]
    dirs = rng.normal(size=(n_dirs, k))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    eps = 2e-3 * p.r2

    # arc-length parametrization: unit-speed gradient flow keeps the solver
    # step scale geometric, and f is strictly monotone along it so the level
    # event fires exactly once
    def rhs(t, u):
        _, g = _value_grad_scalar(p, prof, u)
        gn = np.linalg.norm(g)
        return sgn_flow * (-g) / max(gn, 1e-30)

    def level(t, u):
        v, _ = _value_grad_scalar(p, prof, u)
        return v - target

    level.terminal = True
    level.direction = -sgn_flow

    def escape(t, u):
        return np.linalg.norm(u) - r_escape

    escape.terminal = True

    # trajectories that asymptote a connecting orbit into another critical
    # point never reach the level; stop them when the gradient collapses
    captol = 1e-12 * (1.0 + p.A)

    def captured(t, u):
        _, g = _value_grad_scalar(p, prof, u)
        return float(np.linalg.norm(g)) - captol

    captured.terminal = True
    captured.direction = -1.0

    crossings, divergent, stalled = [], 0, 0
    span = 4.0 * r_escape  # generous arc-length budget
    for d in dirs:
        u0 = point.location + eps * (cols @ d)
        budget = [6000]

        def rhs_budgeted(t, u):
            budget[0] -= 1
            if budget[0] < 0:
                raise _FlowBudgetExceeded
            return rhs(t, u)

        try:
            sol = scipy.integrate.solve_ivp(
                rhs_budgeted, (0.0, span), u0, events=(level, escape, captured),
                rtol=1e-8, atol=1e-12,
            )
        except _FlowBudgetExceeded:
            stalled += 1
            continue
        if sol.t_events[0].size:
            crossings.append(sol.y_events[0][0])
        elif sol.t_events[1].size:
            divergent += 1
        else:
            stalled += 1
    outside = [u for u in crossings if np.linalg.norm(u) > p.r2]
    i = p.i
    u0_ok = all(u[0] <= 3.0 * p.r2 + 1e-9 for u in outside)
    uplus_key = (lambda u: np.linalg.norm(u[i + 1 :])) if direction == "unstable" else (
        lambda u: np.linalg.norm(u[1 : i + 1])
    )
    uplus_ok = all(uplus_key(u) <= 2.5 * p.r2 + 1e-9 for u in outside)
    box = None
    if outside:
        arr = np.array(outside)
        box = np.stack([arr.min(axis=0), arr.max(axis=0)])
    return {
        "crossings": outside,
        "divergent": divergent,
        "stalled": stalled,
        "u0_ok": u0_ok,
        "uplus_ok": uplus_ok,
        "box": box,
    }


def forward_trap_check(p, prof, n_traj=16, t_end=50.0):
    """Forward -grad flow started inside the inner separating ball stays in.

    Consequence of the positive radial derivative on the annulus; verified
    by direct integration from random interior points.
    """
    if p.A <= C0_ANNULUS:
        raise ValueError("check needs A > C0")
    r_in = p.A * p.r2 / (p.A + C0_ANNULUS)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(n_traj):
        d = rng.normal(size=p.n + 1)
        d /= np.linalg.norm(d)
        u0 = 0.97 * r_in * d * rng.random() ** (1.0 / (p.n + 1))

        def rhs(t, u):
            _, g = _value_grad_scalar(p, prof, u)
            return -g

        sol = scipy.integrate.solve_ivp(rhs, (0.0, t_end), u0, rtol=1e-8, atol=1e-12,
                                        max_step=1.0)
        worst = max(worst, float(np.linalg.norm(sol.y, axis=0).max()))
    return {"max_radius": worst, "bound": r_in, "contained": worst <= r_in + 1e-9}


def census_records(census):
    """JSON-ready records for a census."""
    return [
        {
            "location": [float(x) for x in c.location],
            "value": c.value,
            "index": c.morse_index,
            "birth_death": c.birth_death,
            "hessian_spectrum": [float(x) for x in c.hessian_spectrum],
            "newton_residual": c.newton_residual,
        }
        for c in census
    ]


def smallest_stable_amplitude(p: ModelParams, lo=100.0, hi=2000.0, steps=8,
                              n_random=300):
    """Bisect the smallest amplitude at which the census counts stabilize.

    Counts must be 7 / 8 / 6 for y = 0 / +delta^2/2 / -delta^2/2. Returns
    the bisected threshold (the open question of an explicit largeness
    bound is answered empirically).
    """

    def counts_ok(A):
        for y, want in ((0.0, 7), (0.5 * p.delta**2, 8), (-0.5 * p.delta**2, 6)):
            pp = ModelParams(p.n, p.i, p.r1, p.r2, p.delta, y, A)
            prof = build_profiles(pp, verify=False)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                if len(find_critical_points(pp, prof, n_random=n_random)) != want:
                    return False
        return True

    if not counts_ok(hi):
        raise RuntimeError("census not stable even at the upper amplitude")
    if counts_ok(lo):
        return lo
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if counts_ok(mid):
            hi = mid
        else:
            lo = mid
    return hi
