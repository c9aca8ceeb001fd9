"""POD reduction and the baseline DMD estimators (exact, forward-backward, TLS).

All estimators share the same spectrum/mode extraction: eigenpairs of the
reduced evolution matrix ``A`` and modes ``psi_j = Ytil V_r S_r^{-1} v_j / lambda_j``
built from the SVD of the *input* snapshot matrix ``Xtil``.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import PreconditionError, RankDeficiencyError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SnapshotData:
    """Snapshot pairs: column ``j`` of ``Ytilde`` is column ``j`` of ``Xtilde`` advanced by ``dt``."""

    Xtilde: np.ndarray
    Ytilde: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        X = linalg.as_matrix(self.Xtilde, "Xtilde")
        Y = linalg.as_matrix(self.Ytilde, "Ytilde")
        if X.shape != Y.shape:
            raise ValueError(f"Xtilde {X.shape} and Ytilde {Y.shape} differ in shape")
        if X.size == 0:
            raise ValueError("empty snapshot matrices")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "Xtilde", X)
        object.__setattr__(self, "Ytilde", Y)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def shape(self):
        return self.Xtilde.shape

    def swapped(self):
        """Backward-in-time pairs (roles of X and Y exchanged)."""
        return SnapshotData(self.Ytilde, self.Xtilde, self.dt)

    def scaled(self, c):
        return SnapshotData(c * self.Xtilde, c * self.Ytilde, self.dt)


@dataclass(frozen=True)
class ReducedData:
    X: np.ndarray
    Y: np.ndarray
    basis: np.ndarray
    sv: np.ndarray
    rightvecs: np.ndarray
    source: SnapshotData = field(repr=False)

    @property
    def rank(self):
        return self.basis.shape[1]

    @property
    def dt(self):
        return self.source.dt


@dataclass(frozen=True)
class DmdResult:
    A: np.ndarray
    eigs_discrete: np.ndarray
    eigs_continuous: np.ndarray
    modes: np.ndarray
    eigvecs: np.ndarray
    method_tag: str
    backward: np.ndarray | None = None
    converged: bool = True
    iterations: int = 0


def pod_reduce(data, r, truncate=True, rank_tol=None):
    """Project both snapshot matrices onto the first ``r`` left singular vectors of ``Xtilde``.

    If ``r`` exceeds the numerical rank of ``Xtilde`` it is lowered to that
    rank with a warning, or ``RankDeficiencyError`` is raised when
    ``truncate=False``.
    """
    m, n = data.shape
    r = int(r)
    if not 1 <= r <= min(m, n):
        raise PreconditionError(f"rank r={r} must satisfy 1 <= r <= min(m, n) = {min(m, n)}")
    f = linalg.svd(data.Xtilde)
    k = linalg.numerical_rank(f.S, data.shape, rank_tol)
    if r > k:
        if not truncate:
            raise RankDeficiencyError(f"r={r} exceeds the numerical rank {k} of Xtilde")
        log.warning("r=%d exceeds numerical rank %d of Xtilde; truncating", r, k)
        r = k
        if r == 0:
            raise RankDeficiencyError("Xtilde is numerically zero")
    Ur = f.U[:, :r]
    return ReducedData(
        X=Ur.T @ data.Xtilde,
        Y=Ur.T @ data.Ytilde,
        basis=Ur,
        sv=f.S[:r].copy(),
        rightvecs=f.V[:, :r].copy(),
        source=data,
    )


def spectrum(A, rd, method_tag, **extra):
    """Eigenvalues and DMD modes of a reduced evolution matrix ``A``."""
    A = linalg.as_matrix(A, "A")
    ep = linalg.eig(A)
    lam = ep.values
    lifted = rd.source.Ytilde @ (rd.rightvecs / rd.sv) @ ep.vectors
    with np.errstate(divide="ignore", invalid="ignore"):
        modes = np.where(lam != 0, lifted / np.where(lam != 0, lam, 1.0), lifted)
        cont = np.log(lam.astype(complex)) / rd.dt
    return DmdResult(
        A=A,
        eigs_discrete=lam,
        eigs_continuous=cont,
        modes=modes,
        eigvecs=ep.vectors,
        method_tag=method_tag,
        **extra,
    )


def exact_dmd(rd):
    """Exact DMD: ``A = Y V_r S_r^{-1}``."""
    A = rd.Y @ (rd.rightvecs / rd.sv)
    return spectrum(A, rd, "exact")


def backward_ls(rd):
    """Least-squares backward operator ``X Y^+`` in the same reduced coordinates."""
    return rd.X @ linalg.pinv(rd.Y)


def fb_dmd(data, r, rd=None):
    """Forward-backward DMD: ``A = (A_f A_b^{-1})^{1/2}``.

    ``A_f = Y X^+`` and ``A_b = X Y^+`` are both expressed in the POD basis of
    ``Xtilde`` so that the product is a similarity-consistent operator.
    The backward estimate ``A_b`` is returned as ``result.backward``.
    """
    if rd is None:
        rd = pod_reduce(data, r)
    r = rd.rank
    fy = linalg.svd(rd.Y)
    if linalg.numerical_rank(fy.S, rd.Y.shape) < r:
        raise RankDeficiencyError("projected Y is rank deficient; backward operator undefined")
    A_f = rd.Y @ (rd.rightvecs / rd.sv)
    A_b = rd.X @ (fy.V / fy.S) @ fy.U.T
    # A_f A_b^{-1} is the P solving P A_b = A_f
    prod = linalg.linsolve_right(A_b, A_f)
    root = linalg.sqrtm(prod)
    # principal root of a real matrix is real up to rounding
    A = root.real.copy()
    return spectrum(A, rd, "fbdmd", backward=A_b)


def tls_dmd(rd):
    """Total-least-squares DMD: ``A = U_br U_tr^{-1}`` from the stacked SVD of ``(X; Y)``."""
    r, n = rd.X.shape
    if not r < n / 2:
        raise PreconditionError(f"tlsDMD requires r < n/2 (r={r}, n={n})")
    f = linalg.svd(np.vstack([rd.X, rd.Y]))
    U = f.U[:, :r]
    A = linalg.linsolve_right(U[:r], U[r:])
    return spectrum(A, rd, "tlsdmd")


def reconstruct_trajectory(res, rd, x0, steps):
    """Propagate ``x0`` with the lifted operator ``basis A basis^T``.

    Iterates live in the rank-r subspace: ``a_0 = basis^T x0``,
    ``a_{k+1} = A a_k``, and column ``k`` of the output is ``basis a_k``.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 contains NaN or Inf entries")
    if x0.shape[0] != rd.basis.shape[0]:
        raise ValueError(f"x0 has length {x0.shape[0]}, expected {rd.basis.shape[0]}")
    a = rd.basis.T @ x0
    out = np.empty((rd.basis.shape[0], steps))
    for k in range(steps):
        out[:, k] = rd.basis @ a
        a = res.A @ a
    return out
