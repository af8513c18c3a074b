import numpy as np
import pytest

from torsionlab import graded as G

from util import random_complex


def two_term(c, g0=1.0, g1=1.0):
    return G.GradedComplex(
        (1, 1),
        [np.array([[c]], dtype=complex)],
        [g0 * np.eye(1, dtype=complex), g1 * np.eye(1, dtype=complex)],
    )


def test_h_scalar_values():
    assert G.h_scalar(0) == 0
    assert G.h_prime(0) == 1
    assert np.isclose(G.h_scalar(1.0), np.e)


def test_d2_enforced():
    d0 = np.array([[1.0], [0.0]])
    d1 = np.array([[1.0, 0.0]])  # d1 d0 = 1 != 0
    with pytest.raises(ValueError, match="d_1 d_0"):
        G.GradedComplex((1, 2, 1), [d0, d1])


def test_metric_validation():
    with pytest.raises(G.InvalidMetricError):
        G.GradedComplex((1, 1), [np.eye(1)], [np.array([[-1.0]]), np.eye(1)])
    with pytest.raises(G.InvalidMetricError):
        G.GradedComplex((2, 0), [np.zeros((0, 2))], [np.array([[1.0, 1.0], [0.0, 1.0]]), np.zeros((0, 0))])


def test_adjoint_orthonormal_case():
    rng = np.random.default_rng(0)
    m = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
    c = G.GradedComplex((2, 3), [m])
    adj = G.adjoints(c)[0]
    assert np.allclose(adj, m.conj().T)


def test_adjoint_hand_example():
    c = two_term(2.0, g0=1.0, g1=4.0)
    assert np.isclose(G.adjoints(c)[0][0, 0], 8.0)


def test_adjoint_pairing_random():
    rng = np.random.default_rng(1)
    for _ in range(100):
        c = random_complex(rng)
        adj = G.adjoints(c)
        for k, d in enumerate(c.diffs):
            if d.size == 0:
                continue
            x = rng.normal(size=c.ranks[k]) + 1j * rng.normal(size=c.ranks[k])
            y = rng.normal(size=c.ranks[k + 1]) + 1j * rng.normal(size=c.ranks[k + 1])
            lhs = (d @ x).conj() @ c.metrics[k + 1] @ y
            rhs = x.conj() @ c.metrics[k] @ (adj[k] @ y)
            assert abs(lhs - rhs) < 1e-9 * (1 + abs(lhs))


def test_laplacian_zero_differential():
    c = G.GradedComplex((2, 3), [np.zeros((3, 2))])
    assert np.allclose(G.laplacian(c, 0), 0)
    assert np.allclose(G.laplacian(c, 1), 0)


def test_laplacian_two_term():
    c = two_term(3.0)
    assert np.isclose(G.laplacian(c, 0)[0, 0], 9.0)
    assert np.isclose(G.laplacian(c, 1)[0, 0], 9.0)


def test_laplacian_selfadjoint_and_nonnegative():
    rng = np.random.default_rng(2)
    for _ in range(50):
        c = random_complex(rng)
        for k in range(len(c.ranks)):
            if c.ranks[k] == 0:
                continue
            lap = G.laplacian(c, k)
            g = c.metrics[k]
            assert np.allclose(g @ lap, (g @ lap).conj().T, atol=1e-9)
            assert G.laplacian_spectrum(c, k).min() > -1e-9


def test_kernel_dim_matches_elimination_oracle():
    rng = np.random.default_rng(3)
    for _ in range(200):
        c = random_complex(rng, n_deg=4, max_piece=2)
        if c.total_rank > 12:
            continue
        dims = G.cohomology_dims(c)
        for k in range(len(c.ranks)):
            rk_out = np.linalg.matrix_rank(c.diffs[k]) if k < len(c.diffs) and c.diffs[k].size else 0
            rk_in = np.linalg.matrix_rank(c.diffs[k - 1]) if k > 0 and c.diffs[k - 1].size else 0
            assert dims[k] == c.ranks[k] - rk_out - rk_in


def test_euler_chars():
    c = two_term(2.0)
    e = G.euler_chars(c)
    assert (e.chi, e.chi_prime) == (0, -1)
    eh = G.euler_chars_cohomology(c)
    assert (eh.chi, eh.chi_prime) == (0, 0)
    c2 = G.GradedComplex((2, 1), [np.zeros((1, 2))])
    e2 = G.euler_chars(c2)
    assert (e2.chi, e2.chi_prime) == (1, -1)


def test_euler_poincare_random():
    rng = np.random.default_rng(4)
    for _ in range(50):
        c = random_complex(rng)
        assert G.euler_chars(c).chi == G.euler_chars_cohomology(c).chi


def test_torsion_zero_differential():
    c = G.GradedComplex((2, 1), [np.zeros((1, 2))])
    assert G.finite_torsion(c) == 0.0


def test_torsion_two_term_closed_form():
    c = two_term(2.0)
    assert np.isclose(G.finite_torsion(c), -np.log(2.0))


def test_torsion_metric_scaling_invariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        c = random_complex(rng)
        t0 = G.finite_torsion(c)
        c2 = c.with_metrics([3.7 * g for g in c.metrics])
        assert abs(G.finite_torsion(c2) - t0) <= 1e-10 * max(1.0, abs(t0))


def test_torsion_integral_route_agrees():
    rng = np.random.default_rng(6)
    done = 0
    while done < 12:
        c = random_complex(rng, n_deg=3, max_piece=2, acyclic=True)
        if c.total_rank == 0 or c.total_rank > 8:
            continue
        # keep spectra O(1) so the integral tail is short
        from util import _min_nonzero_eig
        if _min_nonzero_eig(c) < 0.05:
            continue
        closed = G.finite_torsion(c)
        integral = G.finite_torsion_integral(c)
        assert abs(integral - closed) <= 1e-6 * max(1.0, abs(closed))
        done += 1


def test_torsion_integral_requires_acyclic():
    c = G.GradedComplex((1, 1), [np.zeros((1, 1))])
    with pytest.raises(ValueError, match="acyclic"):
        G.finite_torsion_integral(c)


def test_ambiguity_band_raises():
    # one Laplacian eigenvalue placed inside the ambiguity band around the
    # kernel threshold of the top eigenvalue
    lam_top = 4.0
    thr = G.KERNEL_RTOL * lam_top
    bad = np.sqrt(thr)  # eigenvalue thr, inside (0.1 thr, 10 thr)
    d = np.array([[2.0, 0.0], [0.0, bad]], dtype=complex)
    c = G.GradedComplex((2, 2), [d])
    with pytest.raises(G.IndeterminateKernelError):
        G.finite_torsion(c)
