"""Provably convergent CDMD (CDMD2): seven-block ADMM on the lifted problem

    min 1/2|A'X - Y|^2 + 1/2|X - B'Y|^2 + nu/2|C - I|^2 + mu/2|A''|^2 + mu/2|B''|^2
    s.t. AB = C, BA = C, A = A' + A'', B = B' + B''.

Every subproblem has a closed form: two Sylvester solves (A, B), two
right-hand linear solves (A', B') and three explicit updates (C, A'', B'').
"""

import logging
from dataclasses import dataclass, fields, replace

import numpy as np

from . import linalg
from .admm import ResidualRecord, data_scale, update_rho
from .dmd import spectrum
from .errors import DivergenceError, SolverStepError

log = logging.getLogger(__name__)

UPDATE_ORDER = ("A", "Aprime", "B", "Bprime", "C", "Adprime", "Bdprime", "Q")
PRIMAL_BLOCKS = ("A", "Aprime", "B", "Bprime", "C", "Adprime", "Bdprime")


@dataclass(frozen=True)
class Cdmd2Config:
    rho0: float = 10.0
    tau: float = 2.0
    mu_trigger: float = 5.0
    eps_abs: float = 1e-8
    eps_rel: float = 1e-6
    max_iters: int = 2000
    nu: float = 10.0
    mu_reg: float = 1e-2
    adapt_rho: bool = True
    normalize: bool = True

    def __post_init__(self):
        for name in ("rho0", "eps_abs", "eps_rel", "nu", "mu_reg"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.tau > 1:
            raise ValueError(f"tau must exceed 1, got {self.tau}")
        if not self.mu_trigger > 1:
            raise ValueError(f"mu_trigger must exceed 1, got {self.mu_trigger}")
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class Cdmd2State:
    A: np.ndarray
    Aprime: np.ndarray
    Adprime: np.ndarray
    B: np.ndarray
    Bprime: np.ndarray
    Bdprime: np.ndarray
    C: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray
    Q3: np.ndarray
    Q4: np.ndarray
    rho: float
    iter: int = 0

    @property
    def Q(self):
        return np.vstack([self.Q1, self.Q2, self.Q3, self.Q4])

    def is_finite(self):
        return all(
            np.all(np.isfinite(getattr(self, f.name))) for f in fields(self) if f.name not in ("rho", "iter")
        )


def cdmd2_residual(s):
    """Stack ``(AB - C; BA - C; A - A' - A''; B - B' - B'')``."""
    return np.vstack(
        [
            s.A @ s.B - s.C,
            s.B @ s.A - s.C,
            s.A - s.Aprime - s.Adprime,
            s.B - s.Bprime - s.Bdprime,
        ]
    )


def cdmd2_objective(s, X, Y, cfg):
    return (
        0.5 * np.linalg.norm(s.Aprime @ X - Y) ** 2
        + 0.5 * np.linalg.norm(X - s.Bprime @ Y) ** 2
        + 0.5 * cfg.nu * np.linalg.norm(s.C - np.eye(s.C.shape[0])) ** 2
        + 0.5 * cfg.mu_reg * (np.linalg.norm(s.Adprime) ** 2 + np.linalg.norm(s.Bdprime) ** 2)
    )


def cdmd2_lagrangian(s, X, Y, cfg):
    R = cdmd2_residual(s)
    Q = s.Q
    return (
        cdmd2_objective(s, X, Y, cfg)
        + 0.5 * s.rho * np.linalg.norm(R + Q) ** 2
        - 0.5 * s.rho * np.linalg.norm(Q) ** 2
    )


def init_cdmd2_state(X, Y, rho0):
    r = X.shape[0]
    A0 = Y @ linalg.pinv(X)
    B0 = X @ linalg.pinv(Y)
    Z = np.zeros((r, r))
    return Cdmd2State(
        A=A0, Aprime=A0.copy(), Adprime=Z.copy(),
        B=B0, Bprime=B0.copy(), Bdprime=Z.copy(),
        C=np.eye(r),
        Q1=Z.copy(), Q2=Z.copy(), Q3=Z.copy(), Q4=Z.copy(),
        rho=float(rho0),
    )


def _guard(step, fn, *args):
    try:
        return fn(*args)
    except np.linalg.LinAlgError as exc:
        raise SolverStepError(step, exc) from exc


def cdmd2_step(s, X, Y, cfg, trace=None):
    """One sweep of the CDMD2 updates in the order A, A', B, B', C, A'', B'', Q.

    The penalty is left untouched; ``run_cdmd2`` applies the residual-balancing
    update after the stopping test. ``trace``, if given, receives the name of
    each block as it is updated.
    """
    r = X.shape[0]
    I = np.eye(r)
    rho = s.rho
    note = trace.append if trace is not None else (lambda _: None)

    B = s.B
    A = _guard(
        "A", linalg.sylvester_solve,
        I + B.T @ B, B @ B.T,
        (s.C - s.Q1) @ B.T + B.T @ (s.C - s.Q2) + s.Aprime + s.Adprime - s.Q3,
    )
    note("A")
    Ap = _guard(
        "Aprime", linalg.linsolve_right,
        rho * I + X @ X.T, Y @ X.T + rho * (A - s.Adprime + s.Q3),
    )
    note("Aprime")
    Bn = _guard(
        "B", linalg.sylvester_solve,
        I + A.T @ A, A @ A.T,
        A.T @ (s.C - s.Q1) + (s.C - s.Q2) @ A.T + s.Bprime + s.Bdprime - s.Q4,
    )
    note("B")
    Bp = _guard(
        "Bprime", linalg.linsolve_right,
        rho * I + Y @ Y.T, X @ Y.T + rho * (Bn - s.Bdprime + s.Q4),
    )
    note("Bprime")
    C = rho / (2 * rho + cfg.nu) * (A @ Bn + Bn @ A + s.Q1 + s.Q2) + cfg.nu / (2 * rho + cfg.nu) * I
    note("C")
    Add = rho / (cfg.mu_reg + rho) * (A - Ap + s.Q3)
    note("Adprime")
    Bdd = rho / (cfg.mu_reg + rho) * (Bn - Bp + s.Q4)
    note("Bdprime")

    new = replace(s, A=A, Aprime=Ap, B=Bn, Bprime=Bp, C=C, Adprime=Add, Bdprime=Bdd, iter=s.iter + 1)
    R = cdmd2_residual(new)
    new = replace(
        new,
        Q1=s.Q1 + R[:r], Q2=s.Q2 + R[r:2 * r], Q3=s.Q3 + R[2 * r:3 * r], Q4=s.Q4 + R[3 * r:],
    )
    note("Q")
    return new


def _tolerances(s, cfg):
    r = s.A.shape[0]
    P = np.vstack([s.A @ s.B, s.B @ s.A, s.A - s.Aprime, s.B - s.Bprime])
    Qm = np.vstack([s.C, s.C, s.Adprime, s.Bdprime])
    eps_pri = np.sqrt(4 * r) * cfg.eps_abs + cfg.eps_rel * max(np.linalg.norm(P), np.linalg.norm(Qm))
    eps_dual = np.sqrt(7 * r) * cfg.eps_abs + cfg.eps_rel * s.rho * np.linalg.norm(s.Q)
    return eps_pri, eps_dual


def run_cdmd2(X, Y, cfg=None, callback=None, state=None):
    """Iterate ``cdmd2_step`` until the primal and dual residuals meet tolerance.

    Returns ``(state, history, converged)``. The dual residual is
    ``rho`` times the change of all seven primal blocks.
    """
    cfg = cfg or Cdmd2Config()
    X0 = linalg.as_matrix(X, "X")
    Y0 = linalg.as_matrix(Y, "Y")
    c = data_scale(X0) if cfg.normalize else 1.0
    X, Y = X0 / c, Y0 / c
    s = state if state is not None else init_cdmd2_state(X, Y, cfg.rho0)

    history = []
    converged = False
    for _ in range(int(cfg.max_iters)):
        prev = s
        s = cdmd2_step(s, X, Y, cfg)
        if not s.is_finite():
            raise DivergenceError(s.iter)
        primal = np.linalg.norm(cdmd2_residual(s))
        dual = s.rho * np.sqrt(
            sum(np.linalg.norm(getattr(s, b) - getattr(prev, b)) ** 2 for b in PRIMAL_BLOCKS)
        )
        eps_pri, eps_dual = _tolerances(s, cfg)
        rec = ResidualRecord(
            iter=s.iter,
            primal=float(primal),
            dual=float(dual),
            objective=float(cdmd2_objective(s, X, Y, cfg)),
            eps_pri=float(eps_pri),
            eps_dual=float(eps_dual),
            rho=float(s.rho),
        )
        history.append(rec)
        if callback is not None:
            callback(s, rec)
        if primal <= eps_pri and dual <= eps_dual:
            converged = True
            break
        if cfg.adapt_rho:
            new_rho = update_rho(s.rho, primal, dual, cfg.tau, cfg.mu_trigger)
            if new_rho != s.rho:
                f = new_rho / s.rho
                s = replace(s, rho=new_rho, Q1=s.Q1 / f, Q2=s.Q2 / f, Q3=s.Q3 / f, Q4=s.Q4 / f)
    return s, history, converged


def cdmd2(rd, cfg=None, callback=None):
    """CDMD2 on POD-reduced data; returns ``(result, history)``."""
    s, history, converged = run_cdmd2(rd.X, rd.Y, cfg, callback)
    if not converged:
        log.info("CDMD2 stopped at max_iters=%d without meeting tolerances", s.iter)
    res = spectrum(s.A, rd, "cdmd2", backward=s.B, converged=converged, iterations=s.iter)
    return res, history
