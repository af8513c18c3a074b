import numpy as np
import pytest

from torsionlab import forms as F
from torsionlab.graded import GradedComplex, finite_torsion

from util import anomaly_family, random_complex, random_flat_family


def test_family_validation():
    fib = GradedComplex((1, 1), [np.array([[1.0]])])
    fam = F.constant_family(fib, 8)
    assert fam.n_samples == 8
    with pytest.raises(ValueError, match="8 base samples"):
        F.constant_family(fib, 4)
    # grading violation
    bad = np.array([[1.0, 0.1], [0.0, 1.0]], dtype=complex)
    with pytest.raises(ValueError, match="grading"):
        F.SuperconnectionFamily([fib] * 8, [bad] * 8)
    # flatness violation: conjugate v without moving the transports
    fib2 = GradedComplex((1, 1), [np.array([[2.0]])])
    fibs = [fib if j % 2 == 0 else fib2 for j in range(8)]
    with pytest.raises(ValueError, match="flatness"):
        F.SuperconnectionFamily(fibs, [np.eye(2, dtype=complex)] * 8)


def test_adjoint_superconnection_unitary_case():
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(1, 1)) + 1j * rng.normal(size=(1, 1)))
    fib = GradedComplex((1, 1), [np.array([[1.5]], dtype=complex)])
    p = np.kron(np.eye(2), q)  # block scalar unitary on both degrees
    fam = F.constant_family(fib, 8, transport=p)
    adj = F.adjoint_superconnection(fam)
    v = fib.full_differential()
    assert np.allclose(adj["vstar"][0], v.conj().T)
    assert np.allclose(adj["transports_adjoint"][0], p)
    assert np.allclose(adj["X0"][0], 0.5 * (v.conj().T - v))
    assert np.allclose(adj["W"][0], 0.0)


def test_adjoint_transport_pairing_random():
    rng = np.random.default_rng(1)
    fam = random_flat_family(rng, m=16)
    adj = F.adjoint_superconnection(fam)
    m = fam.n_samples
    for j in range(m):
        g_j = fam.fibers[j].full_metric()
        g_j1 = fam.fibers[(j + 1) % m].full_metric()
        p = fam.transports[j]
        pp = adj["transports_adjoint"][j]
        res = p.conj().T @ g_j1 @ pp - g_j
        assert np.abs(res).max() < 1e-9


def test_h_form_degree0_vanishes_and_unitary_flat_case():
    rng = np.random.default_rng(2)
    fam = random_flat_family(rng, m=16)
    h = F.h_form(fam)
    # odd supertrace parity: the degree-0 part vanishes identically
    assert np.abs(h.degree0).max() < 1e-12
    # v = 0, unitary transport, constant metric: degree-1 part vanishes
    fib = GradedComplex((2, 2), [np.zeros((2, 2))])
    fam0 = F.constant_family(fib, 8)
    h0 = F.h_form(fam0)
    assert np.abs(h0.degree1).max() < 1e-14


def test_h_form_discrete_closedness():
    rng = np.random.default_rng(3)
    for m in (16, 32):
        fam = random_flat_family(rng, m=m)
        h = F.h_form(fam)
        # d of the degree-0 part must vanish (the part is identically zero)
        assert np.abs(h.dS()).max() < 1e-10


def test_transgression_constant_path_zero():
    fam = anomaly_family(16)
    fib = fam.fibers[0]
    path = lambda l, j: [np.asarray(g) for g in fam.fibers[j].metrics]
    tg = F.transgression(fam, path, n_l=17)
    assert np.abs(tg.degree0).max() < 1e-14


def test_transgression_uniform_scaling_closed_form():
    fam = anomaly_family(16)
    fib = fam.fibers[0]
    consts = F.constant_family(fib, 16)
    path = lambda l, j: [np.exp(2 * l) * np.asarray(g) for g in fib.metrics]
    tg = F.transgression(consts, path, n_l=33)
    x0 = F._x0(fib)
    expected = np.sum(fib.sign_weights() * np.diag(F._h_prime_mat(x0)))
    assert abs(tg.degree0[0] - expected) < 1e-10


def test_transgression_identity_with_refinement():
    prev = None
    for m in (32, 64):
        fam = anomaly_family(m)

        def path(l, j, fam=fam):
            return [
                (1 - l) * np.eye(g.shape[0], dtype=complex) + l * np.asarray(g)
                for g in fam.fibers[j].metrics
            ]

        tg = F.transgression(fam, path, n_l=65)
        h1 = F.h_form(fam).degree1
        fam_id = F.SuperconnectionFamily(
            [GradedComplex(f.ranks, [d.copy() for d in f.diffs]) for f in fam.fibers],
            [t.copy() for t in fam.transports],
        )
        h0 = F.h_form(fam_id).degree1
        res = np.abs(h1 - h0 - tg.dS()).max()
        assert res <= 1e-6 + 40.0 / m**2
        if prev is not None:
            assert res < prev / 2.5
        prev = res


def test_torsion_form_constant_family_degree1_zero():
    fib = GradedComplex((1, 1), [np.array([[2.0]])])
    fam = F.constant_family(fib, 8)
    tl = F.torsion_form_TL(fam, tau=1e-3, t_max=60.0, n_t=150)
    assert np.abs(tl.degree1).max() < 1e-14


def test_torsion_form_point_base_matches_finite_torsion():
    rng = np.random.default_rng(4)
    done = 0
    while done < 3:
        fib = random_complex(rng, n_deg=3, max_piece=2, acyclic=True)
        if fib.total_rank == 0 or fib.total_rank > 6:
            continue
        from util import _min_nonzero_eig

        if _min_nonzero_eig(fib) < 0.5:
            continue
        fam = F.constant_family(fib, 8)
        vals = [
            F.torsion_form_TL(fam, tau, t_max=200.0, n_t=3000).degree0[0].real
            for tau in (4e-4, 2e-4)
        ]
        rich = 2 * vals[1] - vals[0]
        assert abs(rich - finite_torsion(fib)) <= 1e-4
        done += 1


def test_torsion_form_tail_guard():
    fib = GradedComplex((1, 1), [np.array([[0.05]])])  # tiny spectrum
    fam = F.constant_family(fib, 8)
    with pytest.raises(F.TailNotConvergedError):
        F.torsion_form_TL(fam, tau=1e-3, t_max=20.0, n_t=100)


def test_anomaly_constant_family_zero():
    fib = GradedComplex((1, 2, 1),
                        [np.array([[1.0], [1.0]]), np.array([[1.0, -1.0]])])
    fam = F.constant_family(fib, 8)
    out = F.anomaly_check(fam, tau=1e-3, t_max=80.0, n_t=120)
    assert out["max_residual"] < 1e-10


def test_anomaly_acyclic_family_converges():
    out64 = F.anomaly_check(anomaly_family(64), tau=1e-3, t_max=80.0, n_t=200)
    assert out64["max_residual"] <= 1e-4
    out128 = F.anomaly_check(anomaly_family(128), tau=1e-3, t_max=80.0, n_t=400)
    assert out64["max_residual"] / out128["max_residual"] >= 3.0


def test_metric_change_formula_cross_module():
    # finite_torsion(h1) - finite_torsion(h0) equals the degree-0
    # transgression on the constant family, for acyclic fibers
    rng = np.random.default_rng(5)
    done = 0
    while done < 3:
        fib = random_complex(rng, n_deg=3, max_piece=2, acyclic=True)
        if fib.total_rank == 0 or fib.total_rank > 6:
            continue
        from util import _min_nonzero_eig

        if _min_nonzero_eig(fib) < 0.5:
            continue
        fib0 = fib.with_metrics([np.eye(r, dtype=complex) for r in fib.ranks])
        fam = F.constant_family(fib0, 8)
        n = fib.top_degree

        def path_at(tau, fib=fib, n=n):
            def path(l, j):
                return [
                    tau ** (k - 0.5 * n)
                    * ((1 - l) * np.eye(g.shape[0], dtype=complex) + l * np.asarray(g))
                    for k, g in enumerate(fib.metrics)
                ]
            return path

        # the anomaly identity's metric-variation form pairs the torsion
        # difference with the rescaled metric path; extrapolate to tau -> 0
        t1 = F.transgression(fam, path_at(2e-4), n_l=129).degree0[0].real
        t2 = F.transgression(fam, path_at(1e-4), n_l=129).degree0[0].real
        rich = 2 * t2 - t1
        delta = finite_torsion(fib) - finite_torsion(fib0)
        assert abs(rich - delta) < 1e-6
        done += 1


def test_anomaly_with_harmonic_term():
    # family with nonzero cohomology and varying harmonic metric: the
    # Gauss-Manin term enters the identity and the residual stays tiny
    prof = lambda th: (np.exp(0.25 * np.sin(th)), 1.0)
    fam = F.circle_fiber_family(32, 10, harmonic_scale_profile=prof)
    out = F.anomaly_check(fam, tau=1e-3, t_max=150.0, n_t=150)
    assert out["max_residual"] <= 1e-8


def test_grr_trivial_cases():
    fam = F.circle_fiber_family(16, 10)
    r = F.grr_residual(fam, tau=1e-3, t_max=150.0, n_t=150)
    assert r["max_residual"] < 1e-12
    fam = F.circle_fiber_family(16, 10, fiber_twist=0.7)
    r = F.grr_residual(fam, tau=1e-3, t_max=8000.0, n_t=400)
    assert r["max_residual"] < 1e-12


def test_grr_varying_harmonic_metric():
    prof = lambda th: (np.exp(0.3 * np.sin(th)),) * 2
    fam = F.circle_fiber_family(64, 10, base_twist=1.3, harmonic_scale_profile=prof)
    r = F.grr_residual(fam, tau=1e-3, t_max=150.0, n_t=200)
    assert r["max_residual"] <= 1e-3


def test_grr_asymmetric_variation_matches_local_term():
    # the identity d T = local - h(GM): with only the degree-0 harmonic
    # metric varying, the residual must equal the reported local term
    prof = lambda th: (np.exp(0.3 * np.sin(th)), 1.0)
    fam = F.circle_fiber_family(32, 10, harmonic_scale_profile=prof)
    r = F.grr_residual(fam, tau=1e-3, t_max=150.0, n_t=150)
    assert r["max_local_term"] > 0.05  # genuinely nonzero local term
    assert np.abs(r["residual"] - r["local_term"]).max() < 1e-8
