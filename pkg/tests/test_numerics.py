import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from podmci.errors import PreconditionError, SolverError
from podmci.numerics import SparseLU, is_orthonormal, least_squares_project, solve_sparse, svd


def test_svd_identity():
    res = svd(np.eye(2))
    np.testing.assert_allclose(res.singular_values, [1.0, 1.0])
    np.testing.assert_allclose(np.abs(res.U), np.eye(2), atol=1e-14)


def test_svd_diagonal():
    np.testing.assert_allclose(svd(np.diag([3.0, 1.0])).singular_values, [3.0, 1.0])


def test_svd_rank_one_outer_product():
    rng = np.random.default_rng(7)
    u = rng.normal(size=5)
    v = rng.normal(size=3)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    res = svd(np.outer(u, v))
    np.testing.assert_allclose(res.singular_values, [1.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(res.reconstruct(1), np.outer(u, v), atol=1e-12)


def test_svd_sign_convention():
    rng = np.random.default_rng(3)
    res = svd(rng.normal(size=(6, 4)))
    idx = np.argmax(np.abs(res.U), axis=0)
    assert np.all(res.U[idx, np.arange(4)] > 0)


def test_svd_rejects_bad_input():
    with pytest.raises(PreconditionError):
        svd(np.zeros((0, 3)))
    with pytest.raises(PreconditionError):
        svd(np.array([[np.nan, 1.0]]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
              elements=st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)))
def test_svd_invariants(A):
    res = svd(A)
    k = min(A.shape)
    assert res.U.shape == (A.shape[0], k) and res.V.shape == (A.shape[1], k)
    assert np.all(res.singular_values >= 0) and np.all(np.diff(res.singular_values) <= 1e-12 * max(1, res.singular_values[0]))
    np.testing.assert_allclose(res.U.T @ res.U, np.eye(k), atol=1e-10)
    np.testing.assert_allclose(res.V.T @ res.V, np.eye(k), atol=1e-10)
    scale = max(np.linalg.norm(A), 1e-300)
    assert np.linalg.norm(res.reconstruct() - A) <= 1e-10 * scale + 1e-300


def test_solve_identity_and_scaled():
    b = np.array([1.0, -2.0, 3.5])
    np.testing.assert_allclose(solve_sparse(sp.eye(3), b), b)
    np.testing.assert_allclose(solve_sparse(2.0 * sp.eye(2), np.array([4.0, 6.0])), [2.0, 3.0])


def test_solve_tridiagonal_matches_dense_oracle():
    A = sp.diags([[-1.0, -1.0], [2.0, 2.0, 2.0], [-1.0, -1.0]], [-1, 0, 1])
    x = solve_sparse(A, np.ones(3))
    np.testing.assert_allclose(x, [1.5, 2.0, 1.5], rtol=1e-13)
    np.testing.assert_allclose(x, np.linalg.solve(A.toarray(), np.ones(3)), rtol=1e-13)


def test_solve_singular_reports_failure():
    A = sp.csr_matrix(np.array([[1.0, 1.0], [1.0, 1.0]]))
    with pytest.raises(SolverError):
        solve_sparse(A, np.array([1.0, 0.0]))


def test_solve_preconditions():
    with pytest.raises(PreconditionError):
        solve_sparse(sp.eye(3), np.ones(2))
    with pytest.raises(PreconditionError):
        SparseLU(sp.eye(2), rel_tol=2.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10_000))
def test_solve_residual_contract(n, seed):
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=0.3, random_state=seed) + sp.diags(n + rng.random(n))
    b = rng.normal(size=n)
    x = solve_sparse(A.tocsr(), b, rel_tol=1e-10)
    assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)


def test_least_squares_project():
    Phi, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(6, 2)))
    a = np.array([0.3, -1.2])
    np.testing.assert_allclose(least_squares_project(Phi, Phi @ a), a, atol=1e-13)
    assert is_orthonormal(Phi)
    with pytest.raises(PreconditionError):
        least_squares_project(2.0 * Phi, np.ones(6))
