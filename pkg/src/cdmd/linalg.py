"""Dense matrix kernels shared by every DMD estimator.

Matrices are plain 2-D ``numpy.ndarray`` objects (float64 or complex128).
Every public function validates finiteness of its inputs and never mutates
them.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as spla

from .errors import (
    BranchCutError,
    FactorizationError,
    IllConditionedError,
    SingularPencilError,
)

EPS = np.finfo(float).eps
COND_CAP = 1.0 / np.sqrt(EPS)


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray

    def reconstruct(self):
        return (self.U * self.S) @ self.V.T


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray


def as_matrix(M, name="matrix", dtype=float):
    """Return ``M`` as a finite 2-D array, raising ``ValueError`` otherwise.

    ``dtype=None`` keeps complex input complex and converts anything else
    to float.
    """
    if dtype is None:
        dtype = complex if np.iscomplexobj(M) else float
    A = np.asarray(M, dtype=dtype)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return A


def _square(M, name, dtype=float):
    A = as_matrix(M, name, dtype)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def svd(M):
    """Thin SVD ``M = U diag(S) V^T`` with ``k = min(m, n)``."""
    A = as_matrix(M, "M")
    if A.size == 0:
        raise ValueError("svd of an empty matrix")
    try:
        U, S, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"SVD did not converge: {exc}") from exc
    return SvdFactors(U=U, S=S, V=Vt.T)


def default_rank_tol(shape):
    return max(shape) * EPS


def numerical_rank(S, shape, rank_tol=None):
    """Number of singular values above ``rank_tol * S_max``."""
    if rank_tol is None:
        rank_tol = default_rank_tol(shape)
    if len(S) == 0 or S[0] == 0.0:
        return 0
    return int(np.count_nonzero(S > rank_tol * S[0]))


def pinv(M, rank_tol=None):
    """Moore-Penrose pseudoinverse via SVD.

    Singular values below ``rank_tol * S_max`` are treated as zero. The
    default ``rank_tol`` is ``max(m, n) * eps``.
    """
    A = as_matrix(M, "M")
    f = svd(A)
    k = numerical_rank(f.S, A.shape, rank_tol)
    return (f.V[:, :k] / f.S[:k]) @ f.U[:, :k].T


def _sort_eigs(values):
    # descending modulus, then descending real part, then descending imag part;
    # keys rounded so that conjugate pairs and exact ties compare equal
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    q = lambda x: np.round(x / scale, 12)
    return np.lexsort((-q(values.imag), -q(values.real), -q(np.abs(values))))


def eig(A):
    """Eigenpairs of a square matrix with unit-norm vectors in a fixed order.

    Eigenvalues are sorted by descending modulus, ties broken by descending
    real part and then descending imaginary part.
    """
    M = _square(A, "A")
    # entries below eps^2 relative size are invisible to the backward error of
    # the QR algorithm but can derail LAPACK's balancing step; flush them
    M = np.where(np.abs(M) < EPS**2 * np.abs(M).max(initial=0.0), 0.0, M)
    try:
        w, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"eigendecomposition did not converge: {exc}") from exc
    w = w.astype(complex)
    V = V.astype(complex)
    order = _sort_eigs(w)
    w, V = w[order], V[:, order]
    V = V / np.linalg.norm(V, axis=0)
    return EigenPairs(values=w, vectors=V)


def _complex_schur(M, name):
    try:
        T, Z = spla.schur(M.astype(complex), output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise FactorizationError(f"Schur decomposition of {name} failed: {exc}") from exc
    return T, Z


def _is_symmetric(M):
    return np.isrealobj(M) and np.abs(M - M.T).max() <= 1e-14 * np.abs(M).max()


def _check_gap(t, s, C1, C2):
    gap = np.abs(t[:, None] + s[None, :])
    scale = max(np.linalg.norm(C1, 1) + np.linalg.norm(C2, 1), np.finfo(float).tiny)
    if gap.min() <= 100 * EPS * scale:
        raise SingularPencilError(
            f"C1 and -C2 share an eigenvalue (min |t_i + s_j| = {gap.min():.3e})"
        )
    return t[:, None] + s[None, :]


def _sylvester_symmetric(C1, C2, C3):
    # real Schur form of a symmetric matrix is diagonal
    try:
        t, U = np.linalg.eigh(0.5 * (C1 + C1.T))
        s, V = np.linalg.eigh(0.5 * (C2 + C2.T))
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"symmetric eigendecomposition failed: {exc}") from exc
    denom = _check_gap(t, s, C1, C2)
    return U @ ((U.T @ C3 @ V) / denom) @ V.T


def sylvester_solve(C1, C2, C3):
    """Solve ``C1 @ A + A @ C2 = C3`` for ``A``.

    Both coefficient matrices are reduced to complex Schur form,
    ``C1 = U T U^H`` and ``C2 = V S V^H``, and the transformed system
    ``T W + W S = U^H C3 V`` is solved one column at a time by upper
    triangular substitution (Bartels-Stewart). When both coefficients are
    symmetric their Schur forms are diagonal and the substitution reduces to
    an elementwise division.

    Raises
    ------
    SingularPencilError
        If some eigenvalue of ``C1`` equals minus an eigenvalue of ``C2``
        to working precision.
    """
    C1 = _square(C1, "C1", None)
    C2 = _square(C2, "C2", None)
    C3 = as_matrix(C3, "C3", None)
    p, q = C1.shape[0], C2.shape[0]
    if C3.shape != (p, q):
        raise ValueError(f"C3 must have shape {(p, q)}, got {C3.shape}")

    if _is_symmetric(C1) and _is_symmetric(C2):
        return _sylvester_symmetric(C1, C2, C3)

    T, U = _complex_schur(C1, "C1")
    S, V = _complex_schur(C2, "C2")
    F = U.conj().T @ C3 @ V

    s = np.diag(S)
    _check_gap(np.diag(T), s, C1, C2)

    W = np.empty((p, q), dtype=complex)
    I = np.eye(p)
    for j in range(q):
        rhs = F[:, j] - W[:, :j] @ S[:j, j]
        W[:, j] = spla.solve_triangular(T + s[j] * I, rhs, lower=False)

    A = U @ W @ V.conj().T
    if np.isrealobj(C1) and np.isrealobj(C2) and np.isrealobj(C3):
        return A.real.copy()
    return A


def sqrtm(A):
    """Principal square root via the complex Schur form.

    Uses the upper-triangular recurrence on ``T = Z^H A Z``, so it also
    handles non-diagonalizable inputs. For a real ``A`` the principal root is
    real; it is still returned as a complex array and callers take ``.real``.

    Raises
    ------
    BranchCutError
        If an eigenvalue lies on the closed negative real axis.
    """
    M = _square(A, "A")
    n = M.shape[0]
    T, Z = _complex_schur(M, "A")
    d = np.diag(T)
    tol = 1e3 * EPS * max(np.linalg.norm(M, "fro"), np.finfo(float).tiny)
    on_cut = (np.abs(d.imag) <= tol) & (d.real <= tol)
    if np.any(on_cut):
        bad = d[on_cut][0]
        raise BranchCutError(f"eigenvalue {bad:.6g} lies on the closed negative real axis")

    R = np.zeros_like(T)
    R[np.diag_indices(n)] = np.sqrt(d)
    for j in range(n):
        for i in range(j - 1, -1, -1):
            acc = T[i, j] - R[i, i + 1:j] @ R[i + 1:j, j]
            R[i, j] = acc / (R[i, i] + R[j, j])
    return Z @ R @ Z.conj().T


def linsolve_right(A, B):
    """Solve ``X @ A = B`` for ``X``.

    Raises ``IllConditionedError`` when the 1-norm condition number of ``A``
    exceeds ``1/sqrt(eps)``.
    """
    M = _square(A, "A")
    Bm = as_matrix(B, "B")
    if Bm.shape[1] != M.shape[0]:
        raise ValueError(f"B must have {M.shape[0]} columns, got shape {Bm.shape}")
    cond = np.linalg.cond(M, 1)
    if not np.isfinite(cond) or cond > COND_CAP:
        raise IllConditionedError("right-hand solve with singular or ill-conditioned matrix", cond)
    return spla.solve(M.T, Bm.T).T
