"""Finite Z-graded cochain complexes with Hermitian metrics.

A complex is a family of degree spaces C^0, ..., C^n, differentials
d_k : C^k -> C^{k+1} with d_{k+1} d_k = 0, and a positive Gram matrix per
degree. On top of that we build metric adjoints, Hodge Laplacians, Euler
characteristics and the scalar torsion in two independent ways (alternating
log-determinant and the deformation-parameter integral).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate
import scipy.linalg

__all__ = [
    "GradedComplex",
    "complex_to_json",
    "complex_from_json",
    "EulerData",
    "IndeterminateKernelError",
    "InvalidMetricError",
    "h_scalar",
    "h_prime",
    "adjoints",
    "laplacian",
    "laplacian_spectrum",
    "cohomology_dims",
    "euler_chars",
    "euler_chars_cohomology",
    "finite_torsion",
    "finite_torsion_integral",
    "torsion_integrand",
]

#: eigenvalues below KERNEL_RTOL * max(spec) count as kernel
KERNEL_RTOL = 1e-10
#: eigenvalue inside [0.1, 10] x threshold is refused as ambiguous
AMBIGUITY_BAND = (0.1, 10.0)


class InvalidMetricError(ValueError):
    """Gram matrix is singular, non-Hermitian or not positive definite."""


class IndeterminateKernelError(ValueError):
    """An eigenvalue sits inside the kernel-detection ambiguity band."""


def h_scalar(a):
    """The odd entire function a * exp(a^2)."""
    a = np.asarray(a, dtype=complex)
    return a * np.exp(a * a)


def h_prime(a):
    """Derivative (1 + 2 a^2) * exp(a^2) of h_scalar."""
    a = np.asarray(a, dtype=complex)
    return (1.0 + 2.0 * a * a) * np.exp(a * a)


def _as_matrix(m, rows, cols, name):
    arr = np.asarray(m, dtype=complex)
    if arr.shape != (rows, cols):
        raise ValueError(f"{name}: expected shape {(rows, cols)}, got {arr.shape}")
    return arr


@dataclass(frozen=True)
class EulerData:
    """chi = sum (-1)^k rank_k and chi' = sum (-1)^k k rank_k."""

    chi: int
    chi_prime: int


@dataclass
class GradedComplex:
    """Z-graded complex with differentials and per-degree Gram matrices.

    ranks[k] is dim C^k; diffs[k] is the matrix of d_k with shape
    (ranks[k+1], ranks[k]); metrics[k] is the Hermitian positive Gram
    matrix of C^k. Validation of d^2 = 0 and metric positivity happens at
    construction.
    """

    ranks: tuple
    diffs: list = field(default_factory=list)
    metrics: list = field(default_factory=list)
    d2_tol: float = 1e-9

    def __post_init__(self):
        self.ranks = tuple(int(r) for r in self.ranks)
        if any(r < 0 for r in self.ranks):
            raise ValueError("ranks must be non-negative")
        n = len(self.ranks)
        if len(self.diffs) != max(n - 1, 0):
            raise ValueError(f"expected {n - 1} differentials, got {len(self.diffs)}")
        self.diffs = [
            _as_matrix(d, self.ranks[k + 1], self.ranks[k], f"d_{k}")
            for k, d in enumerate(self.diffs)
        ]
        if not self.metrics:
            self.metrics = [np.eye(r, dtype=complex) for r in self.ranks]
        if len(self.metrics) != n:
            raise ValueError(f"expected {n} metrics, got {len(self.metrics)}")
        self.metrics = [
            _as_matrix(g, self.ranks[k], self.ranks[k], f"G_{k}")
            for k, g in enumerate(self.metrics)
        ]
        for k, g in enumerate(self.metrics):
            if g.size == 0:
                continue
            if not np.allclose(g, g.conj().T, atol=1e-12, rtol=1e-12):
                raise InvalidMetricError(f"G_{k} is not Hermitian")
            w = np.linalg.eigvalsh(0.5 * (g + g.conj().T))
            if w.min() <= 0:
                raise InvalidMetricError(f"G_{k} is not positive definite")
        def absmax(a):
            return float(np.abs(a).max()) if a.size else 0.0

        for k in range(len(self.diffs) - 1):
            prod = self.diffs[k + 1] @ self.diffs[k]
            scale = max(1.0, absmax(self.diffs[k]) * absmax(self.diffs[k + 1]))
            if absmax(prod) > self.d2_tol * scale:
                raise ValueError(f"d_{k + 1} d_{k} != 0 (max entry {absmax(prod):.3e})")

    # -- convenience ----------------------------------------------------
    @property
    def top_degree(self):
        return len(self.ranks) - 1

    @property
    def total_rank(self):
        return int(sum(self.ranks))

    def offsets(self):
        """Start index of each degree block inside the total space."""
        return np.concatenate([[0], np.cumsum(self.ranks)]).astype(int)

    def with_metrics(self, metrics):
        return GradedComplex(self.ranks, [d.copy() for d in self.diffs], list(metrics))

    def full_differential(self):
        """Differential as one matrix on the direct sum of all degrees."""
        N = self.total_rank
        off = self.offsets()
        v = np.zeros((N, N), dtype=complex)
        for k, d in enumerate(self.diffs):
            v[off[k + 1] : off[k + 2], off[k] : off[k + 1]] = d
        return v

    def full_metric(self):
        return scipy.linalg.block_diag(*[g for g in self.metrics]) if self.ranks else np.zeros((0, 0))

    def degree_weights(self):
        """Vector with entry k on the degree-k block."""
        return np.concatenate(
            [np.full(r, k, dtype=float) for k, r in enumerate(self.ranks)]
        ) if self.total_rank else np.zeros(0)

    def sign_weights(self):
        """Vector with entry (-1)^k on the degree-k block."""
        return np.concatenate(
            [np.full(r, (-1.0) ** k) for k, r in enumerate(self.ranks)]
        ) if self.total_rank else np.zeros(0)


def adjoints(c: GradedComplex):
    """Metric adjoints d*_k = G_k^{-1} d_k^H G_{k+1} for every degree."""
    out = []
    for k, d in enumerate(c.diffs):
        gk, gk1 = c.metrics[k], c.metrics[k + 1]
        try:
            out.append(np.linalg.solve(gk, d.conj().T @ gk1))
        except np.linalg.LinAlgError as exc:  # pragma: no cover - guarded at init
            raise InvalidMetricError(f"G_{k} is singular") from exc
    return out


def laplacian(c: GradedComplex, k: int):
    """Hodge Laplacian d*_k d_k + d_{k-1} d*_{k-1} in degree k.

    Self-adjoint with respect to G_k, not the standard inner product.
    """
    adj = adjoints(c)
    r = c.ranks[k]
    lap = np.zeros((r, r), dtype=complex)
    if k < len(c.diffs):
        lap += adj[k] @ c.diffs[k]
    if k > 0:
        lap += c.diffs[k - 1] @ adj[k - 1]
    return lap


def _laplacian_pencil(c: GradedComplex, k: int):
    """Hermitian pencil (M_k, G_k) with G_k^{-1} M_k = Laplacian_k."""
    r = c.ranks[k]
    m = np.zeros((r, r), dtype=complex)
    if k < len(c.diffs):
        m += c.diffs[k].conj().T @ c.metrics[k + 1] @ c.diffs[k]
    if k > 0:
        dm = c.diffs[k - 1]
        inner = np.linalg.solve(c.metrics[k - 1], dm.conj().T @ c.metrics[k])
        m += c.metrics[k] @ dm @ inner
    return 0.5 * (m + m.conj().T), c.metrics[k]


def laplacian_spectrum(c: GradedComplex, k: int):
    """Real spectrum of the degree-k Laplacian (ascending)."""
    if c.ranks[k] == 0:
        return np.zeros(0)
    m, g = _laplacian_pencil(c, k)
    return scipy.linalg.eigh(m, g, eigvals_only=True)


def _kernel_threshold(spec):
    top = spec.max() if spec.size else 0.0
    return KERNEL_RTOL * (top if top > 0 else 1.0)


def _split_spectrum(spec, check_band=True):
    """Split Laplacian spectrum into (kernel count, nonzero part)."""
    thr = _kernel_threshold(spec)
    if check_band:
        lo, hi = AMBIGUITY_BAND[0] * thr, AMBIGUITY_BAND[1] * thr
        bad = spec[(spec > lo) & (spec < hi)]
        if bad.size:
            raise IndeterminateKernelError(
                f"eigenvalue {bad[0]:.3e} inside ambiguity band [{lo:.3e}, {hi:.3e}]"
            )
    ker = int((spec <= thr).sum())
    return ker, np.clip(spec[spec > thr], 0.0, None)


def cohomology_dims(c: GradedComplex, check_band=False):
    """dim H^k as the kernel dimension of the degree-k Laplacian."""
    dims = []
    for k in range(len(c.ranks)):
        spec = laplacian_spectrum(c, k)
        ker, _ = _split_spectrum(spec, check_band=check_band)
        dims.append(ker)
    return dims


def euler_chars(c: GradedComplex):
    """Euler data of the complex itself (chi, chi')."""
    chi = sum((-1) ** k * r for k, r in enumerate(c.ranks))
    chi_p = sum((-1) ** k * k * r for k, r in enumerate(c.ranks))
    return EulerData(int(chi), int(chi_p))


def euler_chars_cohomology(c: GradedComplex):
    """Euler data of the cohomology (chi(H), chi'(H))."""
    h = cohomology_dims(c)
    chi = sum((-1) ** k * r for k, r in enumerate(h))
    chi_p = sum((-1) ** k * k * r for k, r in enumerate(h))
    return EulerData(int(chi), int(chi_p))


def finite_torsion(c: GradedComplex):
    """Scalar torsion (1/2) sum_k (-1)^k k log det' Laplacian_k.

    det' drops the kernel part of the spectrum; an eigenvalue inside the
    ambiguity band raises IndeterminateKernelError.
    """
    total = 0.0
    for k in range(len(c.ranks)):
        if k == 0 or c.ranks[k] == 0:
            continue
        spec = laplacian_spectrum(c, k)
        _, nonzero = _split_spectrum(spec, check_band=True)
        if nonzero.size:
            total += 0.5 * (-1.0) ** k * k * np.log(nonzero).sum()
    return float(total)


def torsion_integrand(c: GradedComplex, t):
    """Deformation integrand of the scalar torsion at parameter t.

    This is -Tr_s[(N - n/2) h'(X_t)]/(2t) plus the counterterm
    (chi'(H) + (chi'(E) - n/2 chi(H)) h'(sqrt(-t)/2))/(2t), where
    X_t = (t v* - v)/2 so that X_t^2 = -(t/4) Laplacian. Everything is
    evaluated spectrally; t may be an array.
    """
    t = np.asarray(t, dtype=float)
    n = c.top_degree
    e = euler_chars(c)
    eh = euler_chars_cohomology(c)
    spectral = np.zeros_like(t)
    for k in range(len(c.ranks)):
        if c.ranks[k] == 0:
            continue
        spec = laplacian_spectrum(c, k)
        lam = spec[:, None]
        hp = (1.0 - 0.5 * t[None, :] * lam) * np.exp(-0.25 * t[None, :] * lam)
        spectral += (-1.0) ** k * (k - 0.5 * n) * hp.sum(axis=0)
    counter = eh.chi_prime + (e.chi_prime - 0.5 * n * eh.chi) * np.real(
        h_prime(0.5j * np.sqrt(t))
    )
    return (-spectral + counter) / (2.0 * t)


def finite_torsion_integral(c: GradedComplex, t_max=None):
    """Scalar torsion as the integral of torsion_integrand over (0, inf).

    Only well defined (convergent at both ends) when the complex is acyclic;
    agreement with finite_torsion is the dual-route check.
    """
    h = cohomology_dims(c)
    if any(h):
        raise ValueError("integral form requires an acyclic complex")
    nonzeros = [
        _split_spectrum(laplacian_spectrum(c, k))[1]
        for k in range(len(c.ranks)) if c.ranks[k]
    ]
    lam_min = min((nz.min() for nz in nonzeros if nz.size), default=1.0)
    if t_max is None:
        t_max = max(200.0, 200.0 / lam_min)
    val, _ = scipy.integrate.quad(
        lambda t: float(torsion_integrand(c, np.array([t]))[0]),
        0.0,
        t_max,
        limit=400,
    )
    return float(val)


def complex_to_json(c: GradedComplex):
    """JSON-ready dict for a graded complex (ranks, differentials, metrics)."""

    def mat(m):
        return {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}

    return {
        "ranks": list(c.ranks),
        "differentials": [mat(d) for d in c.diffs],
        "metrics": [mat(g) for g in c.metrics],
    }


def complex_from_json(obj):
    def mat(entry, rows, cols):
        m = np.asarray(entry["re"], dtype=float) + 1j * np.asarray(entry["im"], dtype=float)
        return m.reshape(rows, cols)

    ranks = [int(r) for r in obj["ranks"]]
    diffs = [
        mat(d, ranks[k + 1], ranks[k]) for k, d in enumerate(obj["differentials"])
    ]
    metrics = [mat(g, ranks[k], ranks[k]) for k, g in enumerate(obj["metrics"])]
    return GradedComplex(tuple(ranks), diffs, metrics)
