"""Consistent dynamic mode decomposition.

Estimators of a linear evolution operator from snapshot pairs: exact,
forward-backward and total-least-squares DMD, plus two ADMM solvers that
fit a forward operator ``A`` and a backward operator ``B`` under the
consistency constraint ``AB = BA = I``.
"""

from .admm import AdmmConfig, cdmd, run_admm
from .admm2 import Cdmd2Config, cdmd2, run_cdmd2
from .dmd import (
    DmdResult,
    ReducedData,
    SnapshotData,
    exact_dmd,
    fb_dmd,
    pod_reduce,
    reconstruct_trajectory,
    tls_dmd,
)
from .harness import (
    SolverSettings,
    confidence_ellipse,
    consistency_sweep,
    error_metric,
    monte_carlo,
    run_method,
    trajectory_study,
)
from .snapio import load_snapshots, save_snapshots
from .systems import (
    LinearPeriodicSpec,
    NoiseSpec,
    SineSuperpositionSpec,
    add_noise,
    gen_linear_periodic,
    gen_sine_superposition,
)

__version__ = "0.1.0"
