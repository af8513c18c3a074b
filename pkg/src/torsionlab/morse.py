"""Thom-Smale complexes on flat circles and 2-tori with unitary coefficients.

Critical points come from seeded Newton on the periodic chart; flow lines
between index-adjacent pairs are found by shooting along one-dimensional
unstable (or time-reversed stable) eigendirections, with signs fixed by
comparing the transported unstable frame against arrival data and the
coefficient transport given by the winding of the connecting trajectory.
The resulting complex feeds the scalar-torsion machinery; suspension and
ball-removal bookkeeping live here too, as does the twisted-circle
comparison of combinatorial against zeta-regularized analytic torsion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.integrate
import scipy.sparse as sp
import scipy.sparse.linalg as spla

import mpmath

from .graded import GradedComplex, cohomology_dims, euler_chars, finite_torsion

__all__ = [
    "ManifoldModel",
    "MorseComplexData",
    "circle_model",
    "torus_model",
    "fiber_criticals",
    "flow_lines",
    "build_complex",
    "suspend",
    "gaussian_normalization_probe",
    "ball_removed_ranks",
    "zeta_log_det_twisted_circle",
    "cheeger_muller_compare",
]


@dataclass
class ManifoldModel:
    kind: str  # 'circle' | 'torus2d'
    value: callable
    grad: callable
    hess: callable
    holonomy: list  # one unitary per fundamental-group generator

    def __post_init__(self):
        if self.kind not in ("circle", "torus2d"):
            raise ValueError("kind must be 'circle' or 'torus2d'")
        self.holonomy = [np.atleast_2d(np.asarray(u, dtype=complex)) for u in self.holonomy]
        need = 1 if self.kind == "circle" else 2
        if len(self.holonomy) != need:
            raise ValueError(f"{self.kind} needs {need} holonomy generators")
        for u in self.holonomy:
            if np.abs(u @ u.conj().T - np.eye(len(u))).max() > 1e-12:
                raise ValueError("holonomy matrices must be unitary")
        if len(self.holonomy) == 2:
            a, b = self.holonomy
            if np.abs(a @ b - b @ a).max() > 1e-12:
                raise ValueError("torus holonomies must commute")

    @property
    def dim(self):
        return 1 if self.kind == "circle" else 2

    @property
    def rep_rank(self):
        return self.holonomy[0].shape[0]


def circle_model(freq=1, rep=None, tilt=0.0):
    """f(s) = cos(freq s) + tilt sin(s) on the unit circle."""
    rep = [np.eye(1, dtype=complex)] if rep is None else [rep]

    def value(u):
        return np.cos(freq * u[0]) + tilt * np.sin(u[0])

    def grad(u):
        return np.array([-freq * np.sin(freq * u[0]) + tilt * np.cos(u[0])])

    def hess(u):
        return np.array([[-freq * freq * np.cos(freq * u[0]) - tilt * np.sin(u[0])]])

    return ManifoldModel("circle", value, grad, hess, rep)


def torus_model(rep=None, tilt=(0.0, 0.0)):
    """Product height f = cos x + cos y (+ tilts) on the flat 2-torus."""
    if rep is None:
        rep = [np.eye(1, dtype=complex), np.eye(1, dtype=complex)]

    def value(u):
        return np.cos(u[0]) + np.cos(u[1]) + tilt[0] * np.sin(u[0]) + tilt[1] * np.sin(u[1])

    def grad(u):
        return np.array(
            [-np.sin(u[0]) + tilt[0] * np.cos(u[0]), -np.sin(u[1]) + tilt[1] * np.cos(u[1])]
        )

    def hess(u):
        return np.diag(
            [-np.cos(u[0]) - tilt[0] * np.sin(u[0]), -np.cos(u[1]) - tilt[1] * np.sin(u[1])]
        )

    return ManifoldModel("torus2d", value, grad, hess, rep)


@dataclass
class Critical:
    location: np.ndarray
    value: float
    index: int
    frame: np.ndarray  # oriented unstable frame, columns


@dataclass
class MorseComplexData:
    criticals: list
    flows: dict  # (i_p, i_q) -> list of (sign, winding tuple, transport matrix)
    complex: GradedComplex


def fiber_criticals(model: ManifoldModel):
    """All critical points on the periodic chart, classified by index."""
    d = model.dim
    if d == 1:
        seeds = np.linspace(0, 2 * np.pi, 256, endpoint=False)[:, None]
    else:
        g = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        seeds = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    found = []
    for u0 in seeds:
        u = u0.astype(float).copy()
        ok = False
        for _ in range(60):
            g = model.grad(u)
            h = model.hess(u)
            try:
                step = np.linalg.solve(h, g)
            except np.linalg.LinAlgError:
                break
            if np.linalg.norm(step) > 1.0:
                step *= 1.0 / np.linalg.norm(step)
            u = u - step
            if np.linalg.norm(model.grad(u)) < 1e-12:
                ok = True
                break
        if not ok:
            continue
        u = np.mod(u, 2 * np.pi)
        if any(
            np.linalg.norm(np.mod(u - c.location + np.pi, 2 * np.pi) - np.pi) < 1e-6
            for c in found
        ):
            continue
        hmat = model.hess(u)
        spec, vecs = np.linalg.eigh(hmat)
        # cubic stalls of Newton park 1e-4 away from a degenerate zero with
        # curvature ~ 1e-8; the cut must sit well above that
        if np.abs(spec).min() < 1e-6 * max(1.0, np.abs(spec).max()):
            raise ValueError("degenerate critical point: model is not Morse")
        idx = int((spec < 0).sum())
        frame = vecs[:, spec < 0]
        # deterministic orientation: first sizable entry positive, columns
        # ordered by dominant coordinate
        cols = []
        for j in range(frame.shape[1]):
            v = frame[:, j]
            lead = np.argmax(np.abs(v))
            cols.append((lead, v * np.sign(v[lead])))
        cols.sort(key=lambda t: t[0])
        frame = np.stack([c[1] for c in cols], axis=1) if cols else frame
        found.append(Critical(u, float(model.value(u)), idx, frame))
    found.sort(key=lambda c: (c.index, c.value, tuple(np.round(c.location, 9))))
    return found


def _shoot(model, start, direction, targets, sign_time, tol=1e-10, skip=None):
    """Integrate sign_time * (-grad f) from start + eps*direction until a
    target critical point is approached within 1e-4. Returns (target index,
    arrival velocity direction, unwrapped displacement). The source point
    itself is skipped (the flow leaves its own detection ball)."""
    eps = 1e-6

    def rhs(t, u):
        return sign_time * (-model.grad(u))

    u0 = start + eps * direction
    events = []

    def make_event(c):
        def ev(t, u):
            return np.linalg.norm(np.mod(u - c.location + np.pi, 2 * np.pi) - np.pi) - 1e-4

        ev.terminal = True
        return ev

    def never(t, u):
        return 1.0

    for c in targets:
        events.append(never if c is skip else make_event(c))
    sol = scipy.integrate.solve_ivp(
        rhs, (0.0, 1e4), u0, events=events, rtol=tol, atol=1e-12, max_step=1.0
    )
    hit = [i for i, te in enumerate(sol.t_events) if te.size]
    if not hit:
        return None
    i_target = hit[0]
    u_end = sol.y_events[i_target][0]
    vel = rhs(0.0, u_end)
    nv = np.linalg.norm(vel)
    vel = vel / nv if nv > 0 else vel
    disp = u_end - start  # unwrapped chart displacement
    return i_target, vel, disp


def flow_lines(model: ManifoldModel, criticals, p: Critical, q: Critical):
    """Signed, transported flow lines from p to q (ind p = ind q + 1).

    For a one-dimensional unstable manifold we shoot forward from p; when
    instead the stable manifold of q is one-dimensional (the top-index case
    on the torus) we shoot backward from q and reverse. The sign compares
    the chosen unstable frame of p against (-velocity) wedged with the
    frame of q at arrival; transport is the holonomy of the winding.
    """
    if p.index != q.index + 1:
        raise ValueError("flow lines need index difference one")
    d = model.dim
    out = []
    if p.index == 1:
        # forward shooting along the 1-d unstable line of p
        line = p.frame[:, 0]
        for s0 in (+1.0, -1.0):
            res = _shoot(model, p.location, s0 * line, criticals, sign_time=+1.0, skip=p)
            if res is None:
                raise RuntimeError("flow line escaped; model not Thom-Smale")
            i_t, vel, disp = res
            target = criticals[i_t]
            if np.linalg.norm(np.mod(target.location - q.location + np.pi, 2 * np.pi) - np.pi) > 1e-8:
                if target.index == p.index or abs(target.value - p.value) < 1e-12:
                    raise RuntimeError(f"non-transversal flow near {target.location}")
                continue
            n = _orientation_sign(p, q, -vel)
            wind = _winding(p.location, q.location, disp)
            out.append((n, wind, _transport(model, wind)))
    elif q.index == d - 1:
        # backward shooting along the 1-d stable line of q
        h = model.hess(q.location)
        spec, vecs = np.linalg.eigh(h)
        stable = vecs[:, spec > 0]
        line = stable[:, 0]
        for s0 in (+1.0, -1.0):
            res = _shoot(model, q.location, s0 * line, criticals, sign_time=-1.0, skip=q)
            if res is None:
                raise RuntimeError("flow line escaped; model not Thom-Smale")
            i_t, vel, disp = res
            target = criticals[i_t]
            if np.linalg.norm(np.mod(target.location - p.location + np.pi, 2 * np.pi) - np.pi) > 1e-8:
                continue
            # arrival velocity at q of the forward trajectory is the
            # negative of the start direction of the backward one
            arrive = -s0 * line
            n = _orientation_sign(p, q, -np.asarray(arrive))
            wind = _winding(p.location, q.location, -disp)
            out.append((n, wind, _transport(model, wind)))
    else:  # pragma: no cover - not reachable for circle/torus models
        raise NotImplementedError("only 1-d unstable or stable shooting is shipped")
    return out


def _orientation_sign(p: Critical, q: Critical, minus_vel):
    """Compare the frame of W^u(p) against (-velocity, frame of W^u(q)).

    Both frames span the same ind(p)-dimensional subspace along the line
    (flat charts, so no transport is needed); the sign is that of the Gram
    determinant det(V^T U).
    """
    v = np.asarray(minus_vel, dtype=float)
    cols = [v] + [q.frame[:, j] for j in range(q.frame.shape[1])]
    mv = np.stack(cols, axis=1)
    mu = p.frame
    s = np.linalg.det(mv.T @ mu)
    if abs(s) < 1e-8:
        raise RuntimeError("degenerate orientation comparison (non-transversal)")
    return 1 if s > 0 else -1


def _winding(p_loc, q_loc, disp):
    """Integer winding of the unwrapped displacement against chart delta."""
    w = (np.asarray(disp) - (np.asarray(q_loc) - np.asarray(p_loc))) / (2 * np.pi)
    return tuple(int(round(x)) for x in w)


def _transport(model: ManifoldModel, winding):
    m = model.rep_rank
    t = np.eye(m, dtype=complex)
    for u, w in zip(model.holonomy, winding):
        t = t @ np.linalg.matrix_power(u, w)
    return t


def build_complex(model: ManifoldModel):
    """Assemble the Thom-Smale cochain complex with unitary coefficients."""
    criticals = fiber_criticals(model)
    d = model.dim
    m = model.rep_rank
    pos = {id(c): i for i, c in enumerate(criticals)}
    by_index = {k: [c for c in criticals if c.index == k] for k in range(d + 1)}
    ranks = tuple(m * len(by_index[k]) for k in range(d + 1))
    flows = {}
    diffs = []
    for k in range(d):
        rows = by_index[k + 1]
        cols = by_index[k]
        mat = np.zeros((m * len(rows), m * len(cols)), dtype=complex)
        for ip, pcrit in enumerate(rows):
            for iq, qcrit in enumerate(cols):
                lines = flow_lines(model, criticals, pcrit, qcrit)
                flows[(pos[id(pcrit)], pos[id(qcrit)])] = lines
                block = np.zeros((m, m), dtype=complex)
                for n, wind, tau in lines:
                    block += n * tau
                mat[ip * m : (ip + 1) * m, iq * m : (iq + 1) * m] = block
        diffs.append(mat)
    cpx = GradedComplex(ranks, diffs)
    return MorseComplexData(criticals=criticals, flows=flows, complex=cpx)


# ---------------------------------------------------------------------------
# suspension bookkeeping
# ---------------------------------------------------------------------------

def suspend(data, N: int, T: float = 1.0):
    """Shift every degree by the even suspension rank N.

    Returns the suspended complex, the Euler bookkeeping and the two
    candidate Gaussian normalization factors attached to the suspension
    representative (the stated (2 pi T)^{N/2} one and the probability one).
    """
    if N % 2 != 0 or N < 2:
        raise ValueError("suspension rank must be even and >= 2")
    cpx = data.complex if isinstance(data, MorseComplexData) else data
    ranks = (0,) * N + tuple(cpx.ranks)
    diffs = [np.zeros((ranks[k + 1], ranks[k]), dtype=complex) for k in range(N - 1)]
    diffs.append(np.zeros((cpx.ranks[0], 0), dtype=complex))
    diffs.extend([d.copy() for d in cpx.diffs])
    metrics = [np.zeros((0, 0), dtype=complex)] * N + [g.copy() for g in cpx.metrics]
    sus = GradedComplex(ranks, diffs, metrics)
    e0, e1 = euler_chars(cpx), euler_chars(sus)
    return {
        "complex": sus,
        "chi": e1.chi,
        "chi_prime": e1.chi_prime,
        "chi_prime_shift_ok": e1.chi_prime == e0.chi_prime + N * e0.chi,
        "torsion": finite_torsion(sus),
        "normalization_stated": (2.0 * np.pi * T) ** (N / 2.0),
        "normalization_probability": (2.0 * T / np.pi) ** (N / 2.0),
    }


def gaussian_normalization_probe(N: int, T: float, T2: float, n_quad=20_000):
    """Integrate the suspension Gaussian over the unstable plane under both
    normalizations and report which one is deformation-independent.

    The representative is exp(-2 T |x|^2) dx on R^N; the stated
    normalization divides by (2 pi T)^{N/2}, the probability one multiplies
    by (2 T / pi)^{N/2}.
    """
    if N % 2 != 0 or N < 2:
        raise ValueError("N must be even and >= 2")

    def raw_integral(t):
        # radial quadrature of exp(-2 t |x|^2) over R^N
        surface = 2.0 * np.pi ** (N / 2.0) / math.gamma(N / 2.0)
        rr = np.linspace(0.0, 12.0 / np.sqrt(t), n_quad)
        integrand = rr ** (N - 1) * np.exp(-2.0 * t * rr * rr)
        return surface * np.trapezoid(integrand, rr)

    out = {}
    for name, norm in (
        ("stated", lambda t: raw_integral(t) / (2.0 * np.pi * t) ** (N / 2.0)),
        ("probability", lambda t: raw_integral(t) * (2.0 * t / np.pi) ** (N / 2.0)),
    ):
        v1, v2 = norm(T), norm(T2)
        out[name] = {
            "value_T": v1,
            "value_T2": v2,
            "ratio": v1 / v2,
            "T_independent": abs(v1 / v2 - 1.0) < 1e-6,
        }
    out["T_independent_choice"] = (
        "probability" if out["probability"]["T_independent"] else "stated"
    )
    return out


def ball_removed_ranks(model: ManifoldModel, N: int, remove_ball=True, pair_index=0,
                       coupling=2.0):
    """Cohomology ranks of the suspended complex with one ball removed.

    Removing the ball adds an index-1 generator block plus a cancelling
    block pair at degrees (N + pair_index, N + pair_index + 1) coupled by
    an invertible multiple of the identity.
    """
    data = build_complex(model)
    sus = suspend(data, N)["complex"]
    if not remove_ball:
        return cohomology_dims(sus)
    m = model.rep_rank
    top = len(sus.ranks) - 1
    deg_lo = N + pair_index
    if deg_lo + 1 > top:
        raise ValueError("pair degree exceeds the suspended range")
    ranks = list(sus.ranks)
    ranks[1] += m
    ranks[deg_lo] += m
    ranks[deg_lo + 1] += m
    diffs = []
    for k in range(top):
        d_old = sus.diffs[k]
        d = np.zeros((ranks[k + 1], ranks[k]), dtype=complex)
        d[: d_old.shape[0], : d_old.shape[1]] = d_old
        if k == deg_lo:
            d[d_old.shape[0] :, d_old.shape[1] :] = coupling * np.eye(m)
        diffs.append(d)
    modified = GradedComplex(tuple(ranks), diffs)
    return cohomology_dims(modified)


# ---------------------------------------------------------------------------
# twisted-circle comparison
# ---------------------------------------------------------------------------

def zeta_log_det_twisted_circle(theta, prec=40):
    """log of the zeta-regularized determinant of the twisted circle
    Laplacian, eigenvalues (n + theta / 2 pi)^2 over the integers.

    Computed as -d/ds [zeta_H(2s, a) + zeta_H(2s, 1 - a)] at s = 0 with the
    Hurwitz zeta, by high-precision numerical differentiation; no closed
    form is consulted.
    """
    alpha = (theta / (2.0 * np.pi)) % 1.0
    if alpha == 0.0:
        raise ValueError("twist must stay away from 0 mod 2 pi (acyclic case)")
    with mpmath.workdps(prec):
        a = mpmath.mpf(alpha)

        def zsum(s):
            return mpmath.zeta(2 * s, a) + mpmath.zeta(2 * s, 1 - a)

        dz = mpmath.diff(zsum, 0)
        return float(-dz)


def _twisted_circle_discrete_eigs(theta, n_grid, k):
    """Lowest k eigenvalues of the discrete twisted 0-form Laplacian."""
    h = 2.0 * np.pi / n_grid
    i = np.arange(n_grid)
    rows = np.concatenate([i, i, i])
    cols = np.concatenate([i, (i + 1) % n_grid, (i - 1) % n_grid])
    off = np.full(n_grid, -1.0 / h**2, dtype=complex)
    off_up = off.copy()
    off_dn = off.copy()
    off_up[n_grid - 1] *= np.exp(1j * theta)
    off_dn[0] *= np.exp(-1j * theta)
    data = np.concatenate([np.full(n_grid, 2.0 / h**2, dtype=complex), off_up, off_dn])
    mat = sp.coo_matrix((data, (rows, cols)), shape=(n_grid, n_grid)).tocsc()
    v0 = np.full(n_grid, 1.0 / np.sqrt(n_grid))
    w = spla.eigsh(mat, k=k, sigma=-1e-6, which="LM", v0=v0,
                   return_eigenvectors=False)
    return np.sort(w.real)


def cheeger_muller_compare(theta, n_grid=2000, k_resolved=16):
    """Combinatorial vs analytic torsion of the theta-twisted circle.

    combinatorial: Thom-Smale complex of the height circle with holonomy
    e^{i theta}. analytic exact: from the zeta oracle. analytic fem: the
    lowest k_resolved zeta-free discrete eigenvalues replace their exact
    counterparts inside the zeta determinant.
    """
    if abs(np.exp(1j * theta) - 1.0) < 1e-10:
        raise ValueError("theta = 0 mod 2 pi is not acyclic")
    rep = np.array([[np.exp(1j * theta)]])
    comb = finite_torsion(build_complex(circle_model(freq=1, rep=rep)).complex)
    logdet = zeta_log_det_twisted_circle(theta)
    analytic_exact = -0.5 * logdet
    alpha = (theta / (2.0 * np.pi)) % 1.0
    ns = np.arange(-k_resolved - 2, k_resolved + 3)
    exact_eigs = np.sort((ns + alpha) ** 2)[:k_resolved]
    disc_eigs = _twisted_circle_discrete_eigs(theta, n_grid, k_resolved)
    logdet_fem = logdet + float(np.sum(np.log(disc_eigs) - np.log(exact_eigs)))
    analytic_fem = -0.5 * logdet_fem
    return {
        "combinatorial": comb,
        "analytic_exact": analytic_exact,
        "analytic_fem": analytic_fem,
        "gap_comb_exact": abs(comb - analytic_exact),
        "gap_fem_exact": abs(analytic_fem - analytic_exact),
    }
