"""Benchmark dynamical systems and measurement-noise injection."""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as spla

from .dmd import SnapshotData

NOISE_MODELS = ("independent", "trajectory")
LINPER_MATRIX = np.array([[1.0, -2.0], [1.0, -1.0]])


@dataclass(frozen=True)
class LinearPeriodicSpec:
    """``dz/dt = M z`` with ``M = [[1, -2], [1, -1]]`` (eigenvalues +-i), sampled on ``[0, t_end)``."""

    n: int = 32
    z0: tuple = (1.0, 0.1)
    t_end: float = 2 * np.pi

    @property
    def M(self):
        return LINPER_MATRIX.copy()

    @property
    def dt(self):
        return self.t_end / self.n

    @property
    def eigenvalues(self):
        return np.array([1j, -1j])

    def times(self):
        return np.arange(self.n) * self.dt

    def path(self, t):
        """Closed-form solution ``z(t) = expm(M t) z0`` at each time in ``t`` (2 x len(t))."""
        z0 = np.asarray(self.z0, dtype=float)
        return np.column_stack([spla.expm(LINPER_MATRIX * ti) @ z0 for ti in np.atleast_1d(t)])


@dataclass(frozen=True)
class SineSuperpositionSpec:
    """``z(x, t) = sin(k1 x - w1 t) e^{g1 t} + sin(k2 x - w2 t) e^{g2 t}``.

    The time grid holds ``n`` uniform samples of ``[0, t_end]`` split into
    ``n`` intervals; ``Ytilde`` is the grid shifted by one step. Explicit
    ``x``/``t`` arrays override the default grids.
    """

    k1: float = 1.0
    omega1: float = 1.0
    gamma1: float = 1.0
    k2: float = 0.4
    omega2: float = 3.7
    gamma2: float = -0.2
    amp2: float = 1.0
    n: int = 16
    t_end: float = 4.0
    x_lo: float = 0.0
    x_hi: float = 4 * np.pi
    nx: int = 128
    x: np.ndarray | None = field(default=None, repr=False)
    t: np.ndarray | None = field(default=None, repr=False)

    def x_grid(self):
        if self.x is not None:
            return np.asarray(self.x, dtype=float)
        return np.linspace(self.x_lo, self.x_hi, self.nx)

    def t_grid(self):
        if self.t is not None:
            return np.asarray(self.t, dtype=float)
        return np.linspace(0.0, self.t_end, self.n + 1)[:-1]

    @property
    def eigenvalues(self):
        """Continuous-time eigenvalues ``gamma_i +- i omega_i``."""
        return np.array(
            [
                self.gamma1 + 1j * self.omega1,
                self.gamma1 - 1j * self.omega1,
                self.gamma2 + 1j * self.omega2,
                self.gamma2 - 1j * self.omega2,
            ]
        )

    def evaluate(self, x, t):
        x = np.asarray(x, dtype=float)[:, None]
        t = np.asarray(t, dtype=float)[None, :]
        return np.sin(self.k1 * x - self.omega1 * t) * np.exp(self.gamma1 * t) + self.amp2 * np.sin(
            self.k2 * x - self.omega2 * t
        ) * np.exp(self.gamma2 * t)


@dataclass(frozen=True)
class NoiseSpec:
    """White Gaussian measurement noise.

    With ``snr_db`` set, the variance is derived from
    ``snr_db = 10 log10(mean(clean**2) / variance)``, the mean taken over all
    entries of both clean matrices.

    ``model="independent"`` draws separate noise for every entry of ``Xtilde``
    and ``Ytilde``. ``model="trajectory"`` treats sequential data (``Ytilde``
    is ``Xtilde`` shifted by one column) as one noisy time series, so a
    snapshot shared by both matrices carries the same noise in each.
    """

    variance: float = 0.0
    seed: int = 0
    snr_db: float | None = None
    model: str = "independent"

    def __post_init__(self):
        if self.snr_db is None and not self.variance >= 0:
            raise ValueError(f"noise variance must be non-negative, got {self.variance}")
        if self.model not in NOISE_MODELS:
            raise ValueError(f"noise model must be one of {NOISE_MODELS}, got {self.model!r}")

    def resolve_variance(self, data):
        if self.snr_db is None:
            return float(self.variance)
        return signal_power(data) / 10 ** (self.snr_db / 10)


def signal_power(data):
    return float(np.mean(np.concatenate([data.Xtilde.ravel(), data.Ytilde.ravel()]) ** 2))


def snr_db(data, variance):
    return 10 * np.log10(signal_power(data) / variance)


def gen_linear_periodic(spec=None):
    spec = spec or LinearPeriodicSpec()
    if spec.n < 2:
        raise ValueError(f"need n >= 2 samples, got {spec.n}")
    Z = spec.path(np.arange(spec.n + 1) * spec.dt)
    return SnapshotData(Z[:, :-1], Z[:, 1:], spec.dt)


def gen_sine_superposition(spec=None):
    spec = spec or SineSuperpositionSpec()
    x = spec.x_grid()
    t = spec.t_grid()
    if x.size < 2 or t.size < 2:
        raise ValueError("need at least 2 spatial and 2 temporal samples")
    steps = np.diff(t)
    dt = steps[0]
    if not np.allclose(steps, dt, rtol=1e-9, atol=0):
        raise ValueError("time grid must be uniform")
    return SnapshotData(spec.evaluate(x, t), spec.evaluate(x, t + dt), dt)


def is_sequential(data):
    return np.array_equal(data.Xtilde[:, 1:], data.Ytilde[:, :-1])


def add_noise(data, spec):
    """Add N(0, variance) noise to the snapshot matrices (see ``NoiseSpec.model``)."""
    var = spec.resolve_variance(data)
    if var == 0:
        return data
    rng = np.random.default_rng(spec.seed)
    sd = np.sqrt(var)
    if spec.model == "trajectory":
        if not is_sequential(data):
            raise ValueError("trajectory noise needs sequential snapshots (Ytilde = Xtilde shifted by one)")
        m, n = data.shape
        Z = np.column_stack([data.Xtilde, data.Ytilde[:, -1:]]) + rng.normal(0.0, sd, size=(m, n + 1))
        return SnapshotData(Z[:, :-1], Z[:, 1:], data.dt)
    nx = rng.normal(0.0, sd, size=data.Xtilde.shape)
    ny = rng.normal(0.0, sd, size=data.Ytilde.shape)
    return SnapshotData(data.Xtilde + nx, data.Ytilde + ny, data.dt)
