import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from swarm_init.errors import InvalidMatrix, InvalidProbability, NotPSD, Overflow
from swarm_init.numerics import (chi2_cdf, chi2_quantile, chi2_sf, jacobi_eigen, make_rng, mvn_factor,
                                 mvn_sample, pseudo_inverse, regularized_gamma, sym_eigen, sym_expm)


def random_sym(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


def test_sym_eigen_diagonal():
    w, q = sym_eigen(np.diag([3.0, 1.0, 2.0]))
    assert np.allclose(w, [1, 2, 3])
    assert np.allclose(np.abs(q), np.eye(3)[:, [1, 2, 0]])


@pytest.mark.parametrize("method", ["lapack", "jacobi"])
def test_sym_eigen_reconstructs(method, rng):
    a = random_sym(rng, 7)
    eig = sym_eigen(a, method=method)
    assert np.allclose(eig.reconstruct(), a, atol=1e-12)
    assert np.allclose(eig.vectors.T @ eig.vectors, np.eye(7), atol=1e-12)
    assert np.all(np.diff(eig.values) >= 0)


def test_jacobi_matches_lapack(rng):
    a = random_sym(rng, 12)
    assert np.allclose(jacobi_eigen(a).values, np.linalg.eigvalsh(a), atol=1e-12)


def test_sym_eigen_rejects_bad_input():
    with pytest.raises(InvalidMatrix):
        sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InvalidMatrix):
        sym_eigen(np.ones((2, 3)))
    with pytest.raises(InvalidMatrix):
        sym_eigen(np.array([[np.nan, 0.0], [0.0, 1.0]]))


def test_path_laplacian_spectrum():
    # P3 node Laplacian has eigenvalues 0, 1, 3
    L = np.array([[1, -1, 0], [-1, 2, -1], [0, -1, 1]], dtype=float)
    assert np.allclose(sym_eigen(L).values, [0, 1, 3], atol=1e-14)


def test_pseudo_inverse_penrose(rng):
    b = rng.standard_normal((6, 4))
    a = b @ b.T  # rank 4
    p = pseudo_inverse(a)
    assert np.allclose(a @ p @ a, a, atol=1e-10)
    assert np.allclose(p @ a @ p, p, atol=1e-10)
    assert np.allclose((a @ p).T, a @ p, atol=1e-10)
    assert np.allclose(p, np.linalg.pinv(a), atol=1e-10)


def test_pseudo_inverse_zero_and_negative():
    assert np.allclose(pseudo_inverse(np.zeros((3, 3))), 0)
    with pytest.raises(NotPSD):
        pseudo_inverse(np.diag([1.0, -1.0]))


def test_sym_expm(rng):
    from scipy.linalg import expm
    a = random_sym(rng, 5)
    assert np.allclose(sym_expm(a, -0.3), expm(-0.3 * a), atol=1e-12)
    assert np.allclose(sym_expm(a, 0.0), np.eye(5))
    with pytest.raises(Overflow):
        sym_expm(np.diag([1.0, 2.0]), 1e4)


def test_regularized_gamma_vs_scipy():
    from scipy.special import gammainc, gammaincc
    for a in (0.5, 1.0, 2.5, 10.0):
        for x in (0.01, 0.7, 3.0, 12.0, 60.0):
            p, q = regularized_gamma(a, x)
            assert math.isclose(p, gammainc(a, x), rel_tol=1e-12, abs_tol=1e-300)
            assert math.isclose(q, gammaincc(a, x), rel_tol=1e-10, abs_tol=1e-300)


def test_chi2_quantile_known_values():
    # d=2 has the closed form -2 ln(1-p)
    assert math.isclose(chi2_quantile(2, 0.99), 9.21034, rel_tol=1e-6)
    assert math.isclose(chi2_quantile(2, 0.99), -2 * math.log(0.01), rel_tol=1e-13)
    assert math.isclose(chi2_quantile(1, 0.95), 3.841459, rel_tol=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.floats(1e-6, 1 - 1e-9))
def test_chi2_roundtrip(dof, p):
    q = chi2_quantile(dof, p)
    assert math.isclose(q, stats.chi2.ppf(p, dof), rel_tol=1e-9)
    assert math.isclose(chi2_cdf(dof, q), p, rel_tol=1e-9, abs_tol=1e-14)


def test_chi2_sf_complement():
    assert math.isclose(chi2_cdf(3, 2.0) + chi2_sf(3, 2.0), 1.0, rel_tol=1e-14)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 2.0])
def test_chi2_quantile_rejects(p):
    with pytest.raises(InvalidProbability):
        chi2_quantile(2, p)


def test_mvn_sample_deterministic_and_moments():
    cov = np.array([[2.0, 0.6], [0.6, 1.0]])
    a = mvn_sample([1.0, -1.0], cov, 42, size=200_000)
    b = mvn_sample([1.0, -1.0], cov, 42, size=200_000)
    assert np.array_equal(a, b)
    assert np.allclose(a.mean(axis=0), [1.0, -1.0], atol=0.01)
    assert np.allclose(np.cov(a.T), cov, atol=0.02)


def test_mvn_singular_and_not_psd():
    f = mvn_factor(np.diag([1.0, 0.0]))
    assert np.allclose(f @ f.T, np.diag([1.0, 0.0]))
    with pytest.raises(NotPSD):
        mvn_factor(np.diag([1.0, -1.0]))
    assert mvn_sample(np.zeros(2), np.eye(2), make_rng(3)).shape == (2,)
