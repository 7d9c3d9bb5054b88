"""Dense and sparse linear algebra used throughout the package.

Dense factorizations are delegated to LAPACK through numpy, sparse direct
solves to SuperLU through scipy. The wrappers pin down the contracts the
rest of the code relies on: sign-normalized singular vectors, residual
checked sparse solves and an orthonormality guard on projections.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import PreconditionError, SolverError

__all__ = [
    "SvdResult",
    "svd",
    "solve_sparse",
    "SparseLU",
    "least_squares_project",
    "is_orthonormal",
]


@dataclass(frozen=True)
class SvdResult:
    """Thin singular value decomposition ``A = U @ diag(s) @ V.T``.

    Attributes
    ----------
    U : ndarray, shape (m, k)
        Left singular vectors, ``k = min(m, n)``.
    singular_values : ndarray, shape (k,)
        Non-negative, in descending order.
    V : ndarray, shape (n, k)
        Right singular vectors (columns, not rows).
    """

    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self, rank=None):
        k = len(self.singular_values) if rank is None else rank
        return (self.U[:, :k] * self.singular_values[:k]) @ self.V[:, :k].T


def svd(A):
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped so that its largest-magnitude entry
    is positive; the matching right singular vector is flipped with it.

    Parameters
    ----------
    A : array_like, shape (m, n)

    Returns
    -------
    SvdResult
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise PreconditionError(f"svd expects a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise PreconditionError("svd input contains non-finite entries")

    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            f"SVD of {A.shape[0]}x{A.shape[1]} matrix did not converge"
        ) from exc

    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    U = U * signs
    V = Vt.T * signs
    return SvdResult(U=U, singular_values=s, V=V)


class SparseLU:
    """Reusable sparse LU factorization with the residual contract of
    :func:`solve_sparse`.

    Useful when one operator is applied to many right-hand sides, e.g. the
    inner solves of power iteration.
    """

    def __init__(self, A, rel_tol=1e-10):
        A = sp.csc_matrix(A)
        if A.shape[0] != A.shape[1]:
            raise PreconditionError(f"operator must be square, got {A.shape}")
        if not 0.0 < rel_tol < 1.0:
            raise PreconditionError(f"rel_tol must lie in (0, 1), got {rel_tol}")
        self.A = A
        self.rel_tol = rel_tol
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise SolverError(f"sparse LU of {A.shape[0]}x{A.shape[1]} operator failed: {exc}") from exc

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.A.shape[0]:
            raise PreconditionError(
                f"right-hand side has length {b.shape[0]}, operator has {self.A.shape[0]} rows"
            )
        b_norm = np.linalg.norm(b)
        if b_norm == 0.0:
            return np.zeros_like(b)
        x = self._lu.solve(b)
        res = np.linalg.norm(self.A @ x - b)
        # one step of iterative refinement before giving up
        if res > self.rel_tol * b_norm:
            x = x + self._lu.solve(b - self.A @ x)
            res = np.linalg.norm(self.A @ x - b)
        if not np.isfinite(res) or res > self.rel_tol * b_norm:
            raise SolverError(
                f"sparse solve residual {res / b_norm:.3e} exceeds rel_tol {self.rel_tol:.1e}",
                residual=res / b_norm,
            )
        return x


def solve_sparse(A, b, rel_tol=1e-10):
    """Solve ``A x = b`` for a square sparse operator.

    Parameters
    ----------
    A : sparse matrix or array_like, shape (n, n)
    b : array_like, shape (n,)
    rel_tol : float
        Required relative residual, ``||A x - b|| <= rel_tol * ||b||``.

    Returns
    -------
    ndarray, shape (n,)

    Raises
    ------
    SolverError
        If the factorization breaks down or the residual is not met; the
        achieved relative residual is attached as ``exc.residual``.
    """
    return SparseLU(A, rel_tol=rel_tol).solve(b)


def is_orthonormal(Phi, tol=1e-8):
    Phi = np.asarray(Phi, dtype=float)
    gram = Phi.T @ Phi
    return bool(np.max(np.abs(gram - np.eye(gram.shape[0])), initial=0.0) <= tol)


def least_squares_project(Phi, y):
    """Coordinates of ``y`` in the column span of an orthonormal ``Phi``.

    For orthonormal columns the Moore-Penrose pseudoinverse is ``Phi.T``.
    ``y`` may be a vector or a matrix of column vectors.
    """
    Phi = np.asarray(Phi, dtype=float)
    if Phi.ndim != 2:
        raise PreconditionError("Phi must be a 2-D matrix")
    if not is_orthonormal(Phi, tol=1e-8):
        raise PreconditionError("Phi columns are not orthonormal to 1e-8")
    return Phi.T @ np.asarray(y, dtype=float)
