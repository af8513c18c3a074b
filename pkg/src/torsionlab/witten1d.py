"""Witten Laplacians on discretized circles and intervals.

Operators act on 0- or 1-forms for a deformed potential T f (+ an interface
deformation of amplitude A): the second-order form is
-u'' + T^2 (f' + p')^2 u -/+ T (f'' + p'') u. Two realizations are used:
central differences with the explicit zeroth-order potential (the assembled
operator the other checks run on), and a conjugated first-order difference
factor whose singular values give the exponentially small spectrum with
relative accuracy (central differences cannot see below the
machine-epsilon-times-stiffness floor).

Boundary conditions on an interval piece: 'absolute' is Neumann for 0-forms
and Dirichlet for 1-forms, 'relative' the swap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.csgraph
import scipy.sparse.linalg as spla

from .birthdeath import PiecewisePoly, _hermite5, _hermite3_integrated

__all__ = [
    "InterfaceProfile",
    "WittenProblem1D",
    "SpectrumResult",
    "build_p_profile",
    "assemble",
    "assemble_factor",
    "spectrum",
    "factor_spectrum",
    "gluing_scan",
    "small_eigenvalue_scan",
    "agmon_distance",
    "agmon_decay_check",
    "cubic_model_eigs",
    "schauder_norm",
]

SMOOTH_FRAC = 1e-4


@dataclass
class InterfaceProfile:
    """Odd interface deformation profile p_A on [-2r, 2r].

    shape holds p_{A=1} on [0, 2r]; p_A(s) = A sign(s) shape(|s|). The
    derivative window [C1 A, 2 C1 A] is certified on [0, 0.02 r].
    """

    shape: PiecewisePoly
    r: float
    A: float
    C1: float
    C2: float

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return self.A * np.sign(s) * self.shape._horner(np.abs(s), 0)

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        return self.A * self.shape._horner(np.abs(s), 1)

    def deriv2(self, s):
        s = np.asarray(s, dtype=float)
        return self.A * np.sign(s) * self.shape._horner(np.abs(s), 2)


def build_p_profile(A, r, verify=True):
    """Odd C^2 interface profile: flat +-A r^2/2 beyond |s| = r, a pure
    half-quadratic on most of the tube and a certified derivative window
    near the center."""
    if A < 0 or r <= 0:
        raise ValueError("need A >= 0 and r > 0")
    w = 0.02 * r
    eps = SMOOTH_FRAC * r

    def quad(s):  # A=1 branch on [w, r - eps]
        return 0.5 * r**2 - 0.5 * (s - r) ** 2

    d_edge = r - w  # slope of quad at w (= 0.98 r)
    target = quad(w)
    # derivative ramp on [0, w]: cubic Hermite with p''(0) = 0 (oddness)
    # and matching the quadratic at w; d0 fixed by the value climb
    d0 = 2.0 * (target - w * w * 1.0 / 12.0) / w - d_edge
    knots = [0.0, w, r - eps, r]
    coeffs = [
        _hermite3_integrated(0.0, w, 0.0, d0, 0.0, d_edge, -1.0),
        np.array([quad(w), d_edge, -0.5]),
        _hermite5(r - eps, r, quad(r - eps), eps, -1.0, 0.5 * r**2, 0.0, 0.0),
        np.array([0.5 * r**2]),
    ]
    shape = PiecewisePoly(knots, coeffs)
    ss = np.linspace(0.0, w, 2001)
    dv = shape._horner(ss, 1)
    c1 = float(dv.min())
    full = np.linspace(0.0, r, 4001)
    c2 = float(np.abs(shape._horner(full, 2)).max())
    prof = InterfaceProfile(shape=shape, r=r, A=float(A), C1=c1, C2=c2)
    prof.max_slope = float(np.abs(shape._horner(full, 1)).max())
    if verify:
        if dv.max() > 2.0 * c1 + 1e-9 * r:
            raise ValueError(
                f"derivative window violated on [0, 0.02r]: range [{dv.min():.3e}, {dv.max():.3e}]"
            )
        if abs(shape._horner(1.5 * r, 0) - 0.5 * r**2) > 1e-12 * r**2:
            raise ValueError("flat branch violated at 1.5 r")
        s_odd = np.linspace(-2 * r, 2 * r, 1001)
        if np.abs(prof.value(s_odd) + prof.value(-s_odd)).max() > 1e-12 * (A + 1) * r**2:
            raise ValueError("oddness violated")
    return prof


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kernel_dim: int
    metadata: dict = field(default_factory=dict)


@dataclass
class WittenProblem1D:
    """Grid, potential data and deformation parameters for one operator.

    fp/fpp are samples of f' + p_A' and f'' + p_A'' at the nodes (the
    operator only sees those combinations); `nodes` are uniformly spaced,
    periodic for the circle (last node != first).
    """

    topology: str
    nodes: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    T: float
    A: float = 0.0
    bc: str = "none"
    form_degree: int = 0

    def __post_init__(self):
        if self.topology not in ("circle", "interval"):
            raise ValueError("topology must be 'circle' or 'interval'")
        if self.form_degree not in (0, 1):
            raise ValueError("form_degree must be 0 or 1")
        if self.topology == "circle" and self.bc != "none":
            raise ValueError("boundary conditions are undefined on a circle")
        if self.topology == "interval" and self.bc not in ("absolute", "relative"):
            raise ValueError("interval pieces need absolute or relative conditions")
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.fp = np.asarray(self.fp, dtype=float)
        self.fpp = np.asarray(self.fpp, dtype=float)
        h = self.h
        resolve = 0.1 / (self.T * np.abs(self.fp).max() + 1.0)
        if h > resolve * (1 + 1e-12):
            raise ValueError(
                f"grid too coarse: h={h:.3e} exceeds resolution bound {resolve:.3e}"
            )

    @property
    def h(self):
        return float(self.nodes[1] - self.nodes[0])

    @property
    def n_nodes(self):
        return len(self.nodes)


def circle_problem(f_triple, T, n_nodes=None, A=0.0, interface=None,
                   form_degree=0, oversample=1.0):
    """Build a circle problem from callables (f, f', f'').

    interface = (cuts, r, profile) adds the odd deformation around each cut
    with alternating sign, so the potential is single-valued: the piece
    between cuts[0] and cuts[1] is the minus side.
    """
    f, fp, fpp = f_triple
    probe = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    fp_max = np.abs(fp(probe)).max()
    if interface is not None:
        cuts, r, prof = interface
        fp_max += prof.A * getattr(prof, "max_slope", prof.r)
    if n_nodes is None:
        h_max = 0.1 / (T * fp_max + 1.0)
        n_nodes = int(np.ceil(2 * np.pi / h_max * oversample))
    s = np.linspace(0, 2 * np.pi, n_nodes, endpoint=False)
    fps = fp(s).astype(float)
    fpps = fpp(s).astype(float)
    if interface is not None:
        cuts, r, prof = interface
        pp, ppp = interface_samples(s, cuts, prof)
        fps = fps + pp
        fpps = fpps + ppp
    return WittenProblem1D("circle", s, fps, fpps, T, A=A, form_degree=form_degree)


def interface_samples(s, cuts, prof: InterfaceProfile):
    """Samples of p' and p'' on the circle for two cuts.

    Between cuts[0] and cuts[1] the profile sits at its minus plateau; the
    ascent happens across cuts[1] -> beyond, descent across cuts[0].
    """
    if len(cuts) != 2:
        raise ValueError("need exactly two interface cuts on a circle")
    c0, c1 = cuts
    pp = np.zeros_like(s)
    ppp = np.zeros_like(s)

    def wrap(d):
        return (d + np.pi) % (2 * np.pi) - np.pi

    for cut, sign in ((c0, -1.0), (c1, +1.0)):
        d = wrap(s - cut)
        mask = np.abs(d) <= 2 * prof.r
        pp[mask] += sign * prof.deriv(d[mask])
        ppp[mask] += sign * prof.deriv2(d[mask])
    return pp, ppp


def interval_problem(parent: WittenProblem1D, i0, i1, bc, form_degree=None):
    """Restrict a circle problem to the node range [i0, i1] (inclusive)."""
    n = parent.n_nodes
    idx = np.arange(i0, i1 + 1) % n
    nodes = parent.nodes[i0] + parent.h * np.arange(len(idx))
    return WittenProblem1D(
        "interval",
        nodes,
        parent.fp[idx],
        parent.fpp[idx],
        parent.T,
        A=parent.A,
        bc=bc,
        form_degree=parent.form_degree if form_degree is None else form_degree,
    )


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _potential(problem: WittenProblem1D):
    sign = -1.0 if problem.form_degree == 0 else 1.0
    return (problem.T * problem.fp) ** 2 + sign * problem.T * problem.fpp


def assemble(problem: WittenProblem1D):
    """Sparse symmetric matrix of the central-difference realization.

    Circle: circulant -D2 + diag(V). Interval: the Neumann side is realized
    through the mass-weighted pencil, returned as the congruent symmetric
    matrix M^{-1/2} (K + M V) M^{-1/2}; Dirichlet drops the boundary nodes.
    """
    h = problem.h
    v = _potential(problem)
    n = problem.n_nodes
    if problem.topology == "circle":
        main = np.full(n, 2.0 / h**2) + v
        mat = sp.diags(
            [main, np.full(n - 1, -1.0 / h**2), np.full(n - 1, -1.0 / h**2)],
            [0, 1, -1],
            format="lil",
        )
        mat[0, n - 1] = -1.0 / h**2
        mat[n - 1, 0] = -1.0 / h**2
        return mat.tocsr()
    neumann = (problem.bc == "absolute") == (problem.form_degree == 0)
    if neumann:
        # stiffness + lumped mass quadratic forms
        k_main = np.full(n, 2.0 / h**2)
        k_main[0] = k_main[-1] = 1.0 / h**2
        k = sp.diags(
            [k_main * h, np.full(n - 1, -h / h**2), np.full(n - 1, -h / h**2)],
            [0, 1, -1],
            format="csr",
        )
        m_diag = np.full(n, h)
        m_diag[0] = m_diag[-1] = 0.5 * h
        k = k + sp.diags(m_diag * v)
        d = 1.0 / np.sqrt(m_diag)
        return sp.diags(d) @ k @ sp.diags(d)
    # Dirichlet: interior nodes only
    main = np.full(n - 2, 2.0 / h**2) + v[1:-1]
    return sp.diags(
        [main, np.full(n - 3, -1.0 / h**2), np.full(n - 3, -1.0 / h**2)],
        [0, 1, -1],
        format="csr",
    )


def assemble_factor(problem: WittenProblem1D):
    """Conjugated first-order difference factor of the Witten complex.

    Row i maps nodes (i, i+1) with entries -/+ exp(-/+ T dF_i / 2) / h,
    dF_i the potential increment across the edge (midpoint rule). The
    0-form Laplacian B^H B annihilates the discrete e^{-T F} exactly, and
    B's singular values carry the exponentially small spectrum to relative
    accuracy. Boundary handling: the 'absolute' factor keeps all nodes, the
    'relative' factor restricts to interior nodes.
    """
    h = problem.h
    T = problem.T
    n = problem.n_nodes
    if problem.topology == "circle":
        mids = 0.5 * (problem.fp + np.roll(problem.fp, -1))
        dF = T * mids * h
        i = np.arange(n)
        rows = np.concatenate([i, i])
        cols = np.concatenate([i, (i + 1) % n])
        data = np.concatenate([-np.exp(-0.5 * dF) / h, np.exp(0.5 * dF) / h])
        return sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    mids = 0.5 * (problem.fp[:-1] + problem.fp[1:])
    dF = T * mids * h
    i = np.arange(n - 1)
    rows = np.concatenate([i, i])
    cols = np.concatenate([i, i + 1])
    data = np.concatenate([-np.exp(-0.5 * dF) / h, np.exp(0.5 * dF) / h])
    b = sp.coo_matrix((data, (rows, cols)), shape=(n - 1, n)).tocsr()
    if problem.bc == "relative":
        b = b[:, 1:-1]
    return b


def factor_spectrum(problem: WittenProblem1D, k=None, dense_limit=1800):
    """Low spectrum of the factorized Witten Laplacian.

    For form_degree 0 the operator is B^H B, for 1 it is B B^H; exact
    kernel dimensions follow from the factor shape and rank. Small sizes
    use a dense SVD of the factor, which resolves exponentially small
    singular values to relative accuracy; large sizes fall back to sparse
    shift-invert on the second-order operator and clamp eigenvalues below
    the backward-error floor eps * ||K|| to zero.
    """
    b = assemble_factor(problem)
    rows, cols = b.shape
    dim = cols if problem.form_degree == 0 else rows
    rank = min(rows, cols)
    if dim <= dense_limit:
        svals = np.linalg.svd(b.toarray(), compute_uv=False)
        lam = np.sort(svals) ** 2
        floor = 64 * np.finfo(float).eps * max(svals.max(), 1.0)
        numeric_rank = int((svals > floor).sum())
        lam = np.concatenate([np.zeros(dim - rank), lam])
        kernel = dim - numeric_rank
        lam[:kernel] = 0.0
        if k is not None:
            lam = lam[:k]
        return lam, int(kernel)
    op = (b.conj().T @ b) if problem.form_degree == 0 else (b @ b.conj().T)
    op = op.tocsc()
    norm_est = float(np.abs(op.diagonal()).max()) * 2.0
    want = min(dim - 2, (k or 8) + 2)
    v0 = np.full(op.shape[0], 1.0 / np.sqrt(op.shape[0]))
    w = spla.eigsh(op, k=want, sigma=-1e-6 * norm_est, which="LM", v0=v0,
                   return_eigenvectors=False)
    w = np.sort(w)
    clamp = 30.0 * np.finfo(float).eps * norm_est
    w[np.abs(w) < clamp] = 0.0
    kernel = int((w == 0.0).sum())
    structural = dim - rank
    kernel = max(kernel, structural)
    if k is not None:
        w = w[:k]
    return w, int(kernel)


def spectrum(problem: WittenProblem1D, k):
    """Lowest k eigenpairs of the assembled operator.

    Dense solve for moderate sizes, shift-invert Lanczos beyond; residuals
    are checked at 1e-8 relative to max(1, |lambda|).
    """
    mat = assemble(problem)
    n = mat.shape[0]
    if k > n // 4:
        raise ValueError("k must stay below a quarter of the grid size")
    if n <= 1200:
        dense = mat.toarray()
        w, vecs = scipy.linalg.eigh(dense)
        w, vecs = w[:k], vecs[:, :k]
    else:
        shift = -1e-3 * max(1.0, np.abs(mat.diagonal()).max() / n)
        v0 = np.full(n, 1.0 / np.sqrt(n))
        w, vecs = spla.eigsh(mat, k=k, sigma=shift, which="LM", v0=v0)
        order = np.argsort(w)
        w, vecs = w[order], vecs[:, order]
    for j in range(len(w)):
        res = np.linalg.norm(mat @ vecs[:, j] - w[j] * vecs[:, j])
        if res > 1e-8 * max(1.0, abs(w[j])) * np.linalg.norm(vecs[:, j]):
            raise RuntimeError(f"eigenpair {j} residual {res:.3e} too large")
    kernel_tol = max(1e-8, 2e-6 * max(np.abs(w).max(), 1.0))
    kernel = int((w < kernel_tol).sum())
    return SpectrumResult(
        eigenvalues=w,
        eigenvectors=vecs,
        kernel_dim=kernel,
        metadata={"T": problem.T, "A": problem.A, "bc": problem.bc,
                  "N": problem.n_nodes, "form_degree": problem.form_degree},
    )


# ---------------------------------------------------------------------------
# spectral gluing
# ---------------------------------------------------------------------------

def gluing_scan(f_triple, T, A_ladder, interface_r, cuts=(np.pi / 4, 7 * np.pi / 4),
                k=8, n_nodes=None, form_degrees=(0, 1)):
    """Compare the full-circle spectrum with the split abs/rel problems.

    For each amplitude in A_ladder the circle gets the odd interface
    deformation at both cuts; the piece between the cuts (minus plateau)
    carries absolute conditions, the complement relative ones. Eigenvalues
    come from the factorized operators, paired in sorted order. Returns a
    table per form degree with per-k gaps, plus the small-cluster count of
    the glued operator against the summed exact kernel dimensions of the
    pieces.
    """
    if not all(a2 > a1 for a1, a2 in zip(A_ladder, A_ladder[1:])):
        raise ValueError("A_ladder must be increasing")
    f, fp, fpp = f_triple
    # interfaces must avoid critical points of f
    probe = np.linspace(0, 2 * np.pi, 8192, endpoint=False)
    fps = fp(probe)
    crit = probe[np.abs(fps) < 1e-3 * max(1.0, np.abs(fps).max())]
    for c in cuts:
        if crit.size and np.min(np.abs((crit - c + np.pi) % (2 * np.pi) - np.pi)) < 2.2 * interface_r:
            raise ValueError(f"interface at {c:.3f} sits too close to a critical point")
    out = {}
    for deg in form_degrees:
        rows = []
        for A in A_ladder:
            prof = build_p_profile(A, interface_r)
            full = circle_problem(f_triple, T, n_nodes=n_nodes, A=A,
                                  interface=(cuts, interface_r, prof),
                                  form_degree=deg)
            # snap cuts to grid nodes
            i0 = int(round(cuts[0] / full.h))
            i1 = int(round(cuts[1] / full.h))
            piece_abs = interval_problem(full, i0, i1, "absolute")
            piece_rel = interval_problem(full, i1, i0 + full.n_nodes, "relative")
            lam_full, _ = factor_spectrum(full, k=k)
            la, ka = factor_spectrum(piece_abs)
            lb, kb = factor_spectrum(piece_rel)
            lam_split = np.sort(np.concatenate([la, lb]))[:k]
            gaps = np.abs(lam_full - lam_split)
            cluster = _small_cluster_count(lam_full)
            rows.append(
                {
                    "A": A,
                    "lambda": lam_full,
                    "lambda_split": lam_split,
                    "gaps": gaps,
                    "cluster_count": cluster,
                    "kernel_sum": ka + kb,
                    "kernel_abs": ka,
                    "kernel_rel": kb,
                }
            )
        out[deg] = rows
    return out


def _small_cluster_count(lam, ratio_flag=10.0):
    """Count of the exponentially small group, split at the largest
    multiplicative gap below the O(1) scale."""
    lam = np.asarray(lam)
    pos = lam[lam > 0]
    if pos.size == 0:
        return len(lam)
    scale = max(np.median(pos), 1e-30)
    floor = 1e-30
    vals = np.clip(lam, floor, None)
    logs = np.log(vals)
    diffs = np.diff(logs)
    if diffs.size == 0 or diffs.max() < np.log(ratio_flag):
        warnings.warn("cluster/continuum split ambiguous (gap ratio < 10)")
        return int((lam < 1e-8 * scale).sum())
    split = int(np.argmax(diffs)) + 1
    return split


# ---------------------------------------------------------------------------
# small-eigenvalue decay and Agmon machinery
# ---------------------------------------------------------------------------

def agmon_distance(f_triple, T, from_set, n_nodes=2048):
    """Node-sampled Agmon distance from a source set on the circle.

    Grid-graph shortest path with edge weight T * max(|f'(mid)| h, |df|),
    which keeps rho_T >= T |f(x) - f(source)| exact on the grid and scales
    exactly linearly in T.
    """
    f, fp, _ = f_triple
    s = np.linspace(0, 2 * np.pi, n_nodes, endpoint=False)
    h = s[1] - s[0]
    mids = s + 0.5 * h
    df = np.abs(f(np.roll(s, -1)) - f(s))  # f is 2 pi periodic
    w = T * np.maximum(np.abs(fp(mids)) * h, df)
    rows = np.arange(n_nodes)
    cols = (rows + 1) % n_nodes
    graph = sp.coo_matrix((w, (rows, cols)), shape=(n_nodes, n_nodes))
    graph = graph + graph.T
    sources = np.asarray(from_set, dtype=int)
    dist = scipy.sparse.csgraph.dijkstra(graph, directed=False, indices=sources)
    return s, dist.min(axis=0)


def critical_neighborhood_mask(f_triple, s, width=0.3):
    """Boolean mask of nodes within `width` of a critical point of f."""
    _, fp, _ = f_triple
    fine = np.linspace(0, 2 * np.pi, 16384, endpoint=False)
    vals = fp(fine)
    crit = []
    for i in range(len(fine)):
        a, b = vals[i], vals[(i + 1) % len(fine)]
        if a == 0.0 or (a < 0) != (b < 0):
            crit.append(fine[i])
    crit = np.asarray(crit)
    mask = np.zeros(len(s), dtype=bool)
    for c in crit:
        d = np.abs((s - c + np.pi) % (2 * np.pi) - np.pi)
        mask |= d <= width
    return mask


def small_eigenvalue_scan(f_triple, T_ladder, k_branches=1, n_nodes=None,
                          well_width=0.3, underflow=1e-14):
    """Fit the exponential decay of the tunneling branch against the Agmon
    prediction.

    For each T the factorized circle operator provides the sub-cluster
    eigenvalues; branches are followed by index. The prediction is
    -2 * (Agmon distance at T=1 from the well set to the nearest separating
    ridge), the quantity controlling the squared singular value of the
    deformed differential between well states.
    """
    f, fp, fpp = f_triple
    lam_branches = {j: [] for j in range(1, k_branches + 1)}
    ts_used = {j: [] for j in range(1, k_branches + 1)}
    for T in T_ladder:
        prob = circle_problem(f_triple, T, n_nodes=n_nodes, form_degree=0)
        # the branch values are exponentially small: force the dense SVD of
        # the factor, which resolves them to relative accuracy
        lam, kernel = factor_spectrum(prob, k=k_branches + kernel_guess(prob),
                                      dense_limit=6000)
        nonzero = lam[lam > 0]
        for j in range(1, k_branches + 1):
            if j - 1 < len(nonzero):
                val = nonzero[j - 1]
                if val >= underflow:
                    lam_branches[j].append(val)
                    ts_used[j].append(T)
    # Agmon oracle: distance from the wells to the separating ridge
    s, rho1 = agmon_distance(f_triple, 1.0, _well_nodes(f_triple, 2048))
    ridge = _ridge_nodes(f_triple, 2048)
    barrier = float(rho1[ridge].min())
    out = {}
    for j, vals in lam_branches.items():
        ts = np.array(ts_used[j], dtype=float)
        if len(vals) < 3:
            out[j] = {"slope": np.nan, "prediction": -2.0 * barrier, "ok": False,
                      "T": ts, "lambda": np.array(vals)}
            continue
        slope = np.polyfit(ts, np.log(vals), 1)[0]
        pred = -2.0 * barrier
        out[j] = {
            "slope": float(slope),
            "prediction": pred,
            "ok": abs(slope - pred) <= 0.10 * abs(pred),
            "T": ts,
            "lambda": np.array(vals),
        }
    return out


def kernel_guess(problem):
    return 1 if problem.topology == "circle" else 0


def _well_nodes(f_triple, n):
    f, fp, fpp = f_triple
    s = np.linspace(0, 2 * np.pi, n, endpoint=False)
    vals = fp(s)
    nodes = []
    for i in range(n):
        a, b = vals[i], vals[(i + 1) % n]
        if (a < 0) != (b < 0) and fpp(s[i]) > 0:
            nodes.append(i)
    return np.asarray(nodes, dtype=int)


def _ridge_nodes(f_triple, n):
    f, fp, fpp = f_triple
    s = np.linspace(0, 2 * np.pi, n, endpoint=False)
    vals = fp(s)
    nodes = []
    for i in range(n):
        a, b = vals[i], vals[(i + 1) % n]
        if (a < 0) != (b < 0) and fpp(s[i]) < 0:
            nodes.append(i)
    return np.asarray(nodes, dtype=int)


def agmon_decay_check(f_triple, T_ladder, b=0.5, well_width=0.3, n_nodes=None,
                      eig_index=0):
    """Sup over off-well nodes of log|u_T| + b rho_T across a T-ladder.

    u_T is the eig_index-th 0-form eigenvector (sup-normalized); the
    precondition lambda <= (b - b^2) c_f^2 T^2 / 4 with c_f = min |f'| off
    the critical neighborhoods is enforced per T.
    """
    if not (0.0 < b < 1.0):
        raise ValueError("need 0 < b < 1")
    f, fp, _ = f_triple
    sups = []
    for T in T_ladder:
        prob = circle_problem(f_triple, T, n_nodes=n_nodes, form_degree=0)
        s = prob.nodes
        mask = critical_neighborhood_mask(f_triple, s, width=well_width)
        off = ~mask
        cf = np.abs(fp(s[off])).min() if off.any() else 0.0
        bound = (b - b * b) * cf * cf * T * T / 4.0
        res = spectrum(prob, k=eig_index + 2)
        lam = res.eigenvalues[eig_index]
        if lam > bound:
            raise ValueError(
                f"eigenvalue {lam:.3e} violates decay precondition {bound:.3e} at T={T}"
            )
        u = res.eigenvectors[:, eig_index]
        u = u / np.abs(u).max()
        # Agmon distance from the critical neighborhoods on the problem grid
        wells = np.where(mask)[0]
        sgrid, rho = agmon_distance(f_triple, T, _nearest_nodes(s[wells], 2048), n_nodes=2048)
        rho_at = np.interp(s, sgrid, rho, period=2 * np.pi)
        vals = np.log(np.abs(u[off]) + 1e-300) + b * rho_at[off]
        sups.append(float(vals.max()))
    return np.array(sups)


def _nearest_nodes(positions, n):
    s = np.linspace(0, 2 * np.pi, n, endpoint=False)
    idx = np.unique(np.round(np.asarray(positions) / (2 * np.pi / n)).astype(int) % n)
    return idx


# ---------------------------------------------------------------------------
# cubic model and Schauder norms
# ---------------------------------------------------------------------------

def cubic_model_eigs(T, k, n_nodes=2000, form_degree=0):
    """Neumann Witten eigenvalues for f(s) = s^3/3 on [-T^{-1/3}, T^{-1/3}].

    The grid rescales with the interval, so lambda_k(T) = T^{2/3} lambda_k(1)
    holds exactly at matched node counts.
    """
    if T < 1:
        raise ValueError("need T >= 1")
    ell = T ** (-1.0 / 3.0)
    s = np.linspace(-ell, ell, n_nodes)
    fp = s**2
    fpp = 2.0 * s
    # bypass the resolution guard: the rescaled operator is tame by design
    prob = WittenProblem1D.__new__(WittenProblem1D)
    prob.topology = "interval"
    prob.nodes = s
    prob.fp = fp
    prob.fpp = fpp
    prob.T = float(T)
    prob.A = 0.0
    prob.bc = "absolute"
    prob.form_degree = form_degree
    mat = assemble(prob).toarray()
    w = scipy.linalg.eigh(mat, eigvals_only=True)
    return w[:k]


def schauder_norm(b, n):
    """Schauder n-norm (Tr[(B^H B)^{n/2}])^{1/n} via singular values."""
    svals = np.linalg.svd(np.asarray(b, dtype=complex), compute_uv=False)
    if n == np.inf:
        return float(svals.max()) if svals.size else 0.0
    if n < 1:
        raise ValueError("need n >= 1 or n = inf")
    return float((svals**n).sum() ** (1.0 / n))
