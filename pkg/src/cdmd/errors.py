"""Exception types raised across the package."""

import numpy as np


class FactorizationError(np.linalg.LinAlgError):
    """A dense factorization (SVD, EIG, Schur) failed to converge."""


class SingularPencilError(np.linalg.LinAlgError):
    """Sylvester equation has no unique solution: spectra of C1 and -C2 overlap."""


class BranchCutError(np.linalg.LinAlgError):
    """Principal square root undefined: an eigenvalue lies on the closed negative real axis."""


class IllConditionedError(np.linalg.LinAlgError):
    def __init__(self, msg, cond):
        super().__init__(f"{msg} (condition estimate {cond:.3e})")
        self.cond = cond


class RankDeficiencyError(ValueError):
    """Requested rank exceeds the numerical rank of the snapshot data."""


class PreconditionError(ValueError):
    """An input violates a method's documented precondition."""


class DivergenceError(ArithmeticError):
    def __init__(self, iteration, msg="non-finite iterate"):
        super().__init__(f"{msg} at iteration {iteration}")
        self.iteration = iteration


class SolverStepError(np.linalg.LinAlgError):
    """A CDMD2 subproblem failed; ``step`` names the update that failed."""

    def __init__(self, step, cause):
        super().__init__(f"CDMD2 update of {step} failed: {cause}")
        self.step = step
        self.cause = cause


class SnapshotFormatError(ValueError):
    def __init__(self, msg, offset=None, row=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(msg + suffix)
        self.offset = offset
        self.row = row


class DegenerateBatchError(ValueError):
    """Eigenvalue estimates have (near) zero spread; no ellipse can be fitted."""
