"""Monte Carlo evaluation: eigenvalue batches, confidence ellipses, error metric,
consistency sweeps and trajectory errors.

Trial ``t`` of a batch always uses noise seed ``seedbase + t``; results are
aggregated by trial index so any thread count gives identical output.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dmd
from .admm import AdmmConfig, cdmd
from .admm2 import Cdmd2Config, cdmd2
from .errors import DegenerateBatchError
from .systems import (
    LinearPeriodicSpec,
    NoiseSpec,
    SineSuperpositionSpec,
    add_noise,
    gen_linear_periodic,
    gen_sine_superposition,
)

log = logging.getLogger(__name__)

METHODS = ("exact", "fbdmd", "tlsdmd", "cdmd", "cdmd2")
COVERAGE = 0.95


@dataclass(frozen=True)
class SolverSettings:
    admm: AdmmConfig = field(default_factory=AdmmConfig)
    cdmd2: Cdmd2Config = field(default_factory=Cdmd2Config)


def run_method(method, data, r, settings=None, rd=None):
    """Reduce ``data`` to rank ``r`` (unless ``rd`` is given) and run one estimator.

    The returned result always carries a backward operator: the solver's own
    for fbDMD/CDMD/CDMD2, and the least-squares role swap ``X Y^+`` in the
    same reduced coordinates for exact and TLS DMD.
    """
    settings = settings or SolverSettings()
    if rd is None:
        rd = dmd.pod_reduce(data, r)
    if method == "exact":
        res = dmd.exact_dmd(rd)
    elif method == "fbdmd":
        return dmd.fb_dmd(data, r, rd=rd), rd
    elif method == "tlsdmd":
        res = dmd.tls_dmd(rd)
    elif method == "cdmd":
        return cdmd(rd, settings.admm)[0], rd
    elif method == "cdmd2":
        return cdmd2(rd, settings.cdmd2)[0], rd
    else:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return replace(res, backward=dmd.backward_ls(rd)), rd


def consistency_error(res):
    """``|A B - I|_F`` for the forward/backward pair carried by ``res``."""
    A, B = res.A, res.backward
    return float(np.linalg.norm(A @ B - np.eye(A.shape[0])))


@dataclass(frozen=True)
class TrialBatch:
    method: str
    estimates: np.ndarray
    truth: complex
    n_trials: int
    seedbase: int
    trial_ids: np.ndarray
    failures: dict = field(default_factory=dict)
    unconverged: int = 0

    @property
    def n_failed(self):
        return len(self.failures)


@dataclass(frozen=True)
class EllipseSummary:
    center: complex
    semi_axes: tuple
    orientation: float
    coverage: float
    n_selected: int

    @property
    def r_major(self):
        return self.semi_axes[0]

    @property
    def r_min(self):
        return self.semi_axes[1]

    def contains(self, z, rtol=1e-9):
        d = np.atleast_1d(np.asarray(z, dtype=complex)) - self.center
        c, s = math.cos(self.orientation), math.sin(self.orientation)
        u = d.real * c + d.imag * s
        v = -d.real * s + d.imag * c
        return (u / self.r_major) ** 2 + (v / self.r_min) ** 2 <= 1 + rtol


def match_eigenvalue(eigs, truth):
    """The eigenvalue closest to ``truth``; the first one wins a tie."""
    eigs = np.asarray(eigs, dtype=complex).ravel()
    if eigs.size == 0:
        raise ValueError("cannot match against an empty eigenvalue list")
    return complex(eigs[int(np.argmin(np.abs(eigs - truth)))])


def _selected(estimates, truth, coverage=COVERAGE):
    z = np.asarray(estimates, dtype=complex)
    k = int(math.ceil(coverage * z.size - 1e-9))
    order = np.argsort(np.abs(z - truth), kind="stable")
    return z[order[:k]]


def confidence_ellipse(batch, coverage=COVERAGE):
    """Ellipse around the ``coverage`` fraction of estimates nearest the truth.

    The selected points (treated as points of R^2) give a mean and a 2x2
    covariance; the covariance ellipse is inflated by the largest
    Mahalanobis radius among them, so every selected point lies inside.
    """
    z = np.asarray(batch.estimates, dtype=complex)
    if z.size < 20:
        raise ValueError(f"need at least 20 estimates for an ellipse, got {z.size}")
    sel = _selected(z, batch.truth, coverage)
    pts = np.column_stack([sel.real, sel.imag])
    mean = pts.mean(axis=0)
    cov = np.cov(pts, rowvar=False, bias=True)
    w, V = np.linalg.eigh(cov)
    spread = max(float(np.max(np.abs(pts - mean))), 1e-300)
    if w[0] <= (1e-12 * spread) ** 2 or not np.all(np.isfinite(w)):
        raise DegenerateBatchError(
            f"estimates for {batch.method!r} have no spread in some direction (covariance eigenvalues {w})"
        )
    d = pts - mean
    maha = np.einsum("ij,jk,ik->i", d, np.linalg.inv(cov), d)
    scale = math.sqrt(float(maha.max()))
    major = V[:, 1]
    return EllipseSummary(
        center=complex(mean[0], mean[1]),
        semi_axes=(scale * math.sqrt(w[1]), scale * math.sqrt(w[0])),
        orientation=math.atan2(major[1], major[0]),
        coverage=coverage,
        n_selected=sel.size,
    )


def error_metric(batch, a=0.9, degenerate_as_zero=False):
    """``a |mean - truth| + (1 - a) r_min``, with the mean over all estimates."""
    z = np.asarray(batch.estimates, dtype=complex)
    bias = abs(z.mean() - batch.truth)
    try:
        r_min = confidence_ellipse(batch).r_min
    except DegenerateBatchError:
        if not degenerate_as_zero:
            raise
        r_min = 0.0
    return float(a * bias + (1 - a) * r_min)


def make_system(name, n, **overrides):
    """Snapshot data, tracked eigenvalue and default rank for a named benchmark."""
    if name == "linper":
        spec = LinearPeriodicSpec(n=n, **overrides)
        return spec, gen_linear_periodic(spec), complex(-1j), 2
    if name == "sine":
        spec = SineSuperpositionSpec(n=n, **overrides)
        ev = spec.eigenvalues
        return spec, gen_sine_superposition(spec), complex(ev[3]), 4
    raise ValueError(f"unknown system {name!r}; expected 'linper' or 'sine'")


def _noisy(clean, noise, seed):
    if noise is None:
        return clean
    return add_noise(clean, NoiseSpec(variance=noise.variance, seed=seed, snr_db=noise.snr_db, model=noise.model))


def _map_trials(fn, n_trials, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_trials)))
    return [fn(t) for t in range(n_trials)]


def monte_carlo(system, method, noise, n_trials, seedbase=0, n=None, r=None, truth=None,
                settings=None, threads=1, on_trial=None):
    """Run ``method`` on ``n_trials`` independently noised copies of a benchmark.

    ``system`` is a system name (``"linper"``/``"sine"``) or a clean
    ``SnapshotData``; in the latter case ``r`` and ``truth`` are required.
    Solver failures are recorded per trial and excluded from the estimates.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be positive")
    if isinstance(system, dmd.SnapshotData):
        clean, default_r, default_truth = system, None, None
    else:
        _, clean, default_truth, default_r = make_system(system, n)
    r = r or default_r
    truth = default_truth if truth is None else complex(truth)
    if r is None or truth is None:
        raise ValueError("r and truth are required for externally supplied snapshots")

    def one(t):
        seed = seedbase + t
        try:
            res, _ = run_method(method, _noisy(clean, noise, seed), r, settings)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            out = (t, None, f"{type(exc).__name__}: {exc}", False)
        else:
            out = (t, match_eigenvalue(res.eigs_continuous, truth), None, res.converged)
        if on_trial is not None:
            on_trial(t)
        return out

    rows = _map_trials(one, n_trials, threads)
    ok = [row for row in rows if row[1] is not None]
    failures = {row[0]: row[2] for row in rows if row[1] is None}
    if failures:
        log.info("%s: %d of %d trials failed", method, len(failures), n_trials)
    return TrialBatch(
        method=method,
        estimates=np.array([row[1] for row in ok], dtype=complex),
        truth=truth,
        n_trials=n_trials,
        seedbase=seedbase,
        trial_ids=np.array([row[0] for row in ok], dtype=int),
        failures=failures,
        unconverged=sum(1 for row in ok if not row[3]),
    )


def consistency_sweep(system, methods, n_values, noise, trials, seedbase=0, settings=None, threads=1):
    """Mean ``|AB - I|_F`` per (method, n) over noisy trials.

    Returns a list of dicts with keys ``method, n, sigma2, value, failed``.
    """
    rows = []
    sigma2 = noise.variance if noise is not None else 0.0
    for n in n_values:
        _, clean, _, r = make_system(system, n)
        for method in methods:
            def one(t, method=method):
                try:
                    res, _ = run_method(method, _noisy(clean, noise, seedbase + t), r, settings)
                except (ArithmeticError, ValueError, np.linalg.LinAlgError):
                    return None
                return consistency_error(res)

            vals = [v for v in _map_trials(one, trials, threads) if v is not None]
            rows.append(
                dict(
                    method=method,
                    n=n,
                    sigma2=sigma2,
                    value=float(np.mean(vals)) if vals else float("nan"),
                    failed=trials - len(vals),
                )
            )
    return rows


def relative_path_error(computed, reference):
    """``|computed - reference|_2 / |reference|_2`` over all samples stacked."""
    computed = np.asarray(computed)
    reference = np.asarray(reference)
    if computed.shape != reference.shape:
        raise ValueError(f"path shapes differ: {computed.shape} vs {reference.shape}")
    return float(np.linalg.norm(computed - reference) / np.linalg.norm(reference))


def trajectory_error(res, rd, reference):
    """Propagate ``reference[:, 0]`` with ``res`` and compare against ``reference``."""
    reference = np.asarray(reference, dtype=float)
    path = dmd.reconstruct_trajectory(res, rd, reference[:, 0], reference.shape[1])
    return relative_path_error(path, reference)


def trajectory_study(method, noise, n_trials, n=32, seedbase=0, settings=None, threads=1):
    """Per-trial relative path errors on the linear periodic system.

    The reference is the clean trajectory at the ``n`` sample times, started
    from the clean initial state.
    """
    spec, clean, _, r = make_system("linper", n)
    reference = spec.path(spec.times())

    def one(t):
        try:
            res, rd = run_method(method, _noisy(clean, noise, seedbase + t), r, settings)
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            return None
        return trajectory_error(res, rd, reference)

    errs = _map_trials(one, n_trials, threads)
    return np.array([e if e is not None else np.nan for e in errs])
