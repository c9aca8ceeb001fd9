import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdmd.admm import cdmd
from cdmd.dmd import pod_reduce
from cdmd.errors import DegenerateBatchError
from cdmd.harness import (
    METHODS,
    TrialBatch,
    confidence_ellipse,
    consistency_error,
    consistency_sweep,
    error_metric,
    match_eigenvalue,
    monte_carlo,
    relative_path_error,
    run_method,
    trajectory_error,
    trajectory_study,
)
from cdmd.systems import LinearPeriodicSpec, NoiseSpec, add_noise, gen_linear_periodic, gen_sine_superposition


def batch(z, truth=0j, method="synthetic"):
    z = np.asarray(z, dtype=complex)
    return TrialBatch(method, z, complex(truth), z.size, 0, np.arange(z.size))


# ---------------------------------------------------------------- matching


def test_match_nearest():
    assert match_eigenvalue([2, -1j + 0.01], -1j) == -1j + 0.01


def test_match_exact_member():
    assert match_eigenvalue([1j, -1j, 3], -1j) == -1j


def test_match_tie_takes_first():
    assert match_eigenvalue([1 + 0j, -1 + 0j], 0j) == 1


def test_match_empty():
    with pytest.raises(ValueError):
        match_eigenvalue([], 1j)


# ---------------------------------------------------------------- ellipse


def test_degenerate_batch_raises():
    with pytest.raises(DegenerateBatchError):
        confidence_ellipse(batch(np.full(50, 0.1 + 0.1j)))


def test_too_few_estimates():
    with pytest.raises(ValueError):
        confidence_ellipse(batch(np.arange(10) * 1j))


def test_isotropic_cloud():
    rng = np.random.default_rng(0)
    z = rng.normal(size=10_000) + 1j * rng.normal(size=10_000)
    ell = confidence_ellipse(batch(z))
    assert 0.9 <= ell.r_major / ell.r_min <= 1.1
    assert ell.r_major >= ell.r_min > 0


def test_far_outlier_is_trimmed():
    rng = np.random.default_rng(1)
    z = 0.1 * (rng.normal(size=400) + 1j * rng.normal(size=400))
    ref = confidence_ellipse(batch(z))
    z_out = z.copy()
    z_out[int(np.argmax(np.abs(z)))] = 50 + 50j
    ell = confidence_ellipse(batch(z_out))
    assert ell.r_min == pytest.approx(ref.r_min, rel=0.02)
    assert ell.r_major == pytest.approx(ref.r_major, rel=0.02)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(20, 300), st.floats(0.1, 10), st.floats(-3, 3))
def test_ellipse_contains_selected_points(seed, n, aspect, angle):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=n) * aspect + 1j * rng.normal(size=n)
    z = pts * np.exp(1j * angle) + 0.3
    ell = confidence_ellipse(batch(z, truth=0.3))
    k = int(np.ceil(0.95 * n - 1e-9))
    sel = z[np.argsort(np.abs(z - 0.3), kind="stable")[:k]]
    assert ell.n_selected == k
    assert np.all(ell.contains(sel))
    assert ell.r_major >= ell.r_min > 0


# ---------------------------------------------------------------- metric


def test_metric_known_offset_and_minor_axis():
    # a thin ring around 0.1 whose 95% nearest subset has r_min = 0.05 by construction
    z = np.r_[0.1 + 0.05 * np.exp(1j * np.linspace(0, 2 * np.pi, 40, endpoint=False))]
    b = batch(z, truth=0.0)
    ell = confidence_ellipse(b)
    expected = 0.9 * 0.1 + 0.1 * ell.r_min
    assert error_metric(b) == pytest.approx(expected, rel=1e-12)
    assert ell.r_min == pytest.approx(0.05, rel=0.05)
    assert error_metric(b) == pytest.approx(0.095, rel=0.01)


def test_metric_perfect_estimates():
    b = batch(np.full(30, 1j), truth=1j)
    assert error_metric(b, degenerate_as_zero=True) == 0.0
    with pytest.raises(DegenerateBatchError):
        error_metric(b)


def test_metric_a_one_is_bias():
    rng = np.random.default_rng(2)
    z = 0.2 + 0.05 * (rng.normal(size=100) + 1j * rng.normal(size=100))
    b = batch(z)
    assert error_metric(b, a=1.0) == pytest.approx(abs(z.mean()))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000), st.floats(0, 1))
def test_metric_non_negative(seed, a):
    rng = np.random.default_rng(seed)
    b = batch(rng.normal(size=40) + 1j * rng.normal(size=40))
    assert error_metric(b, a=a) >= 0


# ---------------------------------------------------------------- monte carlo


def test_single_noiseless_trial():
    b = monte_carlo("linper", "exact", NoiseSpec(0.0), 1, n=32)
    assert b.estimates.size == 1
    assert abs(b.estimates[0] - (-1j)) <= 1e-8


def test_monte_carlo_is_deterministic_and_thread_independent():
    a = monte_carlo("linper", "cdmd", NoiseSpec(0.1), 12, seedbase=5, n=16)
    b = monte_carlo("linper", "cdmd", NoiseSpec(0.1), 12, seedbase=5, n=16, threads=4)
    assert np.array_equal(a.estimates, b.estimates)
    assert np.array_equal(a.trial_ids, b.trial_ids)


def test_trial_uses_seedbase_plus_index():
    b = monte_carlo("linper", "exact", NoiseSpec(0.1), 3, seedbase=10, n=16)
    single = monte_carlo("linper", "exact", NoiseSpec(0.1), 1, seedbase=12, n=16)
    assert b.estimates[2] == single.estimates[0]


def test_failures_are_recorded_not_dropped():
    # tls needs r < n/2; with n=4, r=2 every trial fails its precondition
    b = monte_carlo("linper", "tlsdmd", NoiseSpec(0.1), 5, n=4)
    assert b.n_failed == 5 and b.estimates.size == 0
    assert all("PreconditionError" in msg for msg in b.failures.values())


def test_external_snapshots_need_rank_and_truth():
    with pytest.raises(ValueError):
        monte_carlo(gen_linear_periodic(), "exact", None, 2)
    b = monte_carlo(gen_linear_periodic(), "exact", None, 2, r=2, truth=-1j)
    assert b.estimates.size == 2


@pytest.mark.slow
def test_cdmd_beats_exact_on_minor_axis():
    noise = NoiseSpec(0.1)
    ex = confidence_ellipse(monte_carlo("linper", "exact", noise, 500, n=32))
    cd = confidence_ellipse(monte_carlo("linper", "cdmd", noise, 500, n=32))
    assert cd.r_min < ex.r_min


def test_fb_bias_below_exact_bias():
    noise = NoiseSpec(0.1)
    ex = monte_carlo("linper", "exact", noise, 200, n=32)
    fb = monte_carlo("linper", "fbdmd", noise, 200, n=32)
    assert abs(fb.estimates.mean() + 1j) < abs(ex.estimates.mean() + 1j)


# ---------------------------------------------------------------- consistency


@pytest.mark.parametrize("method", METHODS)
def test_noiseless_consistency_is_exact(method):
    res, _ = run_method(method, gen_linear_periodic(), 2)
    assert consistency_error(res) <= 1e-8


def test_sweep_rows():
    rows = consistency_sweep("sine", ("exact", "cdmd"), [16], NoiseSpec(0.25), 10)
    assert [(r["method"], r["n"], r["sigma2"], r["failed"]) for r in rows] == [
        ("exact", 16, 0.25, 0), ("cdmd", 16, 0.25, 0)]
    assert rows[1]["value"] < rows[0]["value"]


def test_cdmd_consistency_within_primal_tolerance():
    rd = pod_reduce(add_noise(gen_sine_superposition(), NoiseSpec(0.25, seed=0)), 4)
    res, B, hist = cdmd(rd)
    # the stopping rule bounds the stacked residual, which dominates |AB - I|_F
    assert consistency_error(res) <= hist[-1].eps_pri


# ---------------------------------------------------------------- trajectories


def test_path_error_examples():
    ref = np.random.default_rng(3).normal(size=(2, 10))
    assert relative_path_error(ref, ref) == 0.0
    assert relative_path_error(2 * ref, ref) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        relative_path_error(ref[:, :5], ref)


def test_noiseless_trajectory_error_is_tiny():
    spec = LinearPeriodicSpec(n=32)
    res, rd = run_method("cdmd", gen_linear_periodic(spec), 2)
    assert trajectory_error(res, rd, spec.path(spec.times())) <= 1e-6


def test_trajectory_study_shape_and_determinism():
    a = trajectory_study("exact", NoiseSpec(0.125), 6)
    b = trajectory_study("exact", NoiseSpec(0.125), 6, threads=3)
    assert a.shape == (6,) and np.array_equal(a, b)
