"""Consistent DMD: ADMM for the forward/backward problem with AB = I, BA = I.

The scaled augmented Lagrangian is

    L(A, B, Q) = 1/2 |AX - Y|^2 + 1/2 |X - BY|^2
                 + rho/2 |R(A, B) + Q|^2 - rho/2 |Q|^2,

with ``R(A, B) = (AB - I; BA - I)`` and ``Q = (Q1; Q2)``. Each of the A- and
B-subproblems is quadratic and reduces to one Sylvester equation.
"""

import logging
from dataclasses import dataclass

import numpy as np

from . import linalg
from .dmd import spectrum
from .errors import DivergenceError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdmmConfig:
    rho0: float = 1.0
    tau: float = 2.0
    mu: float = 5.0
    eps_abs: float = 1e-8
    eps_rel: float = 1e-6
    max_iters: int = 500
    adapt_rho: bool = True
    normalize: bool = True

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError(f"rho0 must be positive, got {self.rho0}")
        if not self.tau > 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if not self.mu > 1:
            raise ValueError(f"mu must exceed 1, got {self.mu}")
        if not (self.eps_abs > 0 and self.eps_rel > 0):
            raise ValueError("eps_abs and eps_rel must be positive")
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass
class AdmmState:
    A: np.ndarray
    B: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    rho: float
    iter: int = 0

    @property
    def Q(self):
        return np.vstack([self.Q1, self.Q2])


@dataclass(frozen=True)
class ResidualRecord:
    iter: int
    primal: float
    dual: float
    objective: float
    eps_pri: float
    eps_dual: float
    rho: float


def consistency_residual(A, B):
    """Stack ``(AB - I; BA - I)``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ValueError(f"A {A.shape} and B {B.shape} must be square and equal in size")
    I = np.eye(A.shape[0])
    return np.vstack([A @ B - I, B @ A - I])


def cdmd_objective(A, B, X, Y):
    """Data-fit part ``1/2 |AX - Y|_F^2 + 1/2 |X - BY|_F^2``."""
    return 0.5 * np.linalg.norm(A @ X - Y) ** 2 + 0.5 * np.linalg.norm(X - B @ Y) ** 2


def augmented_lagrangian(A, B, Q1, Q2, rho, X, Y):
    Rm = consistency_residual(A, B)
    Q = np.vstack([Q1, Q2])
    return (
        cdmd_objective(A, B, X, Y)
        + 0.5 * rho * np.linalg.norm(Rm + Q) ** 2
        - 0.5 * rho * np.linalg.norm(Q) ** 2
    )


def lagrangian_grad_A(A, B, Q1, Q2, rho, X, Y):
    I = np.eye(A.shape[0])
    return (A @ X - Y) @ X.T + rho * (A @ B - I + Q1) @ B.T + rho * B.T @ (B @ A - I + Q2)


def lagrangian_grad_B(A, B, Q1, Q2, rho, X, Y):
    I = np.eye(A.shape[0])
    return (B @ Y - X) @ Y.T + rho * A.T @ (A @ B - I + Q1) + rho * (B @ A - I + Q2) @ A.T


def update_A(state, X, Y):
    """Minimize L(., B, Q) over A: solve ``C1 A + A C2 = C3``."""
    B, Q1, Q2, rho = state.B, state.Q1, state.Q2, state.rho
    C1 = rho * B.T @ B
    C2 = X @ X.T + rho * B @ B.T
    C3 = Y @ X.T + 2 * rho * B.T - rho * Q1 @ B.T - rho * B.T @ Q2
    return linalg.sylvester_solve(C1, C2, C3)


def update_B(state, X, Y):
    """Minimize L(A, ., Q) over B: solve ``D1 B + B D2 = D3``."""
    A, Q1, Q2, rho = state.A, state.Q1, state.Q2, state.rho
    D1 = rho * A.T @ A
    D2 = Y @ Y.T + rho * A @ A.T
    D3 = X @ Y.T + 2 * rho * A.T - rho * A.T @ Q1 - rho * Q2 @ A.T
    return linalg.sylvester_solve(D1, D2, D3)


def update_rho(rho, primal, dual, tau=2.0, mu=5.0):
    """Residual-balancing penalty update.

    Callers holding a scaled dual ``Q`` must divide it by ``new_rho / rho``
    so that the unscaled multiplier ``rho * Q`` is unchanged.
    """
    if primal > mu * dual:
        return rho * tau
    if dual > mu * primal:
        return rho / tau
    return rho


def _full_row_rank(M):
    f = linalg.svd(M)
    return linalg.numerical_rank(f.S, M.shape) == M.shape[0]


def init_state(X, Y, rho0):
    r = X.shape[0]
    return AdmmState(
        A=Y @ linalg.pinv(X),
        B=X @ linalg.pinv(Y),
        Q1=np.zeros((r, r)),
        Q2=np.zeros((r, r)),
        rho=float(rho0),
    )


def data_scale(X):
    """RMS column norm of ``X``; the penalty ``rho`` is measured in these units."""
    c = np.linalg.norm(X) / np.sqrt(X.shape[1])
    return c if c > 0 else 1.0


def run_admm(X, Y, cfg=None, callback=None, state=None):
    """Iterate the CDMD splitting on reduced data ``X, Y`` (r x n).

    With ``cfg.normalize`` the subproblems see ``X / c`` and ``Y / c`` where
    ``c = data_scale(X)``. Joint scaling leaves the constrained minimizer
    unchanged, so this only fixes the units of ``rho`` and makes the iterates
    independent of the overall data magnitude.

    Returns ``(state, history, converged)``. ``callback(state, record)`` is
    invoked after every iteration, before the penalty update.
    """
    cfg = cfg or AdmmConfig()
    X0 = linalg.as_matrix(X, "X")
    Y0 = linalg.as_matrix(Y, "Y")
    r = X0.shape[0]
    if not (_full_row_rank(X0) and _full_row_rank(Y0)):
        log.warning("X or Y is not full row rank; the subproblems may be ill-posed")
    c = data_scale(X0) if cfg.normalize else 1.0
    X, Y = X0 / c, Y0 / c
    st = state if state is not None else init_state(X, Y, cfg.rho0)

    history = []
    converged = False
    for k in range(1, int(cfg.max_iters) + 1):
        A_prev, B_prev = st.A, st.B
        st.A = update_A(st, X, Y)
        if not np.all(np.isfinite(st.A)):
            raise DivergenceError(k)
        st.B = update_B(st, X, Y)
        Rm = consistency_residual(st.A, st.B)
        st.Q1 = st.Q1 + Rm[:r]
        st.Q2 = st.Q2 + Rm[r:]
        st.iter = k
        if not all(np.all(np.isfinite(M)) for M in (st.B, st.Q1, st.Q2)):
            raise DivergenceError(k)

        primal = np.linalg.norm(Rm)
        dual = st.rho * np.sqrt(np.linalg.norm(st.A - A_prev) ** 2 + np.linalg.norm(st.B - B_prev) ** 2)
        eps_pri = np.sqrt(r) * cfg.eps_abs + cfg.eps_rel * max(
            np.linalg.norm(st.A @ st.B), np.linalg.norm(st.B @ st.A)
        )
        eps_dual = np.sqrt(2 * r) * cfg.eps_abs + cfg.eps_rel * st.rho * np.linalg.norm(st.Q)
        rec = ResidualRecord(
            iter=k,
            primal=float(primal),
            dual=float(dual),
            objective=float(cdmd_objective(st.A, st.B, X0, Y0)),
            eps_pri=float(eps_pri),
            eps_dual=float(eps_dual),
            rho=float(st.rho),
        )
        history.append(rec)
        if callback is not None:
            callback(st, rec)
        if primal <= eps_pri and dual <= eps_dual:
            converged = True
            break
        if cfg.adapt_rho:
            new_rho = update_rho(st.rho, primal, dual, cfg.tau, cfg.mu)
            factor = new_rho / st.rho
            st.rho = new_rho
            if factor != 1.0:
                st.Q1 = st.Q1 / factor
                st.Q2 = st.Q2 / factor
    return st, history, converged


def cdmd(rd, cfg=None, callback=None):
    """Consistent DMD on POD-reduced data.

    Returns ``(result, B, history)``; ``result.backward`` is the backward
    operator ``B`` and ``result.converged`` tells whether the stopping rule
    was met before ``cfg.max_iters``.
    """
    st, history, converged = run_admm(rd.X, rd.Y, cfg, callback)
    if not converged:
        log.info("CDMD stopped at max_iters=%d without meeting tolerances", st.iter)
    res = spectrum(st.A, rd, "cdmd", backward=st.B, converged=converged, iterations=st.iter)
    return res, st.B, history
