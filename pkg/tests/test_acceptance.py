"""Acceptance gates, one test and one PASS/FAIL line per criterion.

The lines are collected into the terminal summary (see conftest.py) and are
also printed directly when this file is run as a script:

    python3 tests/test_acceptance.py

Set ``CDMD_FULL_N=1`` to also run the 10^4-trial scatter study for
criterion 9 (long-running; not a gate otherwise).
"""

import csv
import json
import os
import sys
import time

import numpy as np
import pytest

from cdmd import linalg
from cdmd.admm import AdmmConfig, AdmmState, augmented_lagrangian, cdmd, lagrangian_grad_A, lagrangian_grad_B
from cdmd.admm import update_A, update_B
from cdmd.admm2 import Cdmd2Config, cdmd2
from cdmd.cli import bundled_config, load_config, run_experiment
from cdmd.dmd import pod_reduce
from cdmd.harness import run_method, trajectory_study
from cdmd.systems import LinearPeriodicSpec, NoiseSpec, SineSuperpositionSpec, add_noise
from cdmd.systems import gen_linear_periodic, gen_sine_superposition

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # running as a script from another directory
    ACCEPTANCE_LINES = []


def report(k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Run every bundled config twice into separate directories."""
    root = tmp_path_factory.mktemp("acceptance")
    out = {}
    for name in ("fig3_desk", "fig2_desk", "trajectory_desk"):
        cfg = load_config(bundled_config(name))
        out[name] = [run_experiment(cfg, root / f"{name}_{k}") for k in range(2)]
    return out


# 1 ------------------------------------------------------------------------


def test_criterion_1_noiseless_linper_spectrum():
    t0 = time.perf_counter()
    data = gen_linear_periodic(LinearPeriodicSpec(n=32))
    errs = {}
    for method in ("exact", "fbdmd", "tlsdmd", "cdmd", "cdmd2"):
        res, _ = run_method(method, data, 2)
        errs[method] = float(np.abs(np.sort_complex(res.eigs_continuous) - np.array([-1j, 1j])).max())
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    report(1, worst <= 1e-5 and elapsed < 1.0,
           f"max |lambda - (+-i)| = {worst:.2e} (<= 1e-5) over {sorted(errs)}, runtime {elapsed:.3f}s (< 1s)")


# 2 ------------------------------------------------------------------------


def test_criterion_2_sine_spectrum():
    data = gen_sine_superposition(SineSuperpositionSpec())
    truth = np.sort_complex(np.array([1 + 1j, 1 - 1j, -0.2 + 3.7j, -0.2 - 3.7j]))
    errs = {}
    for method in ("exact", "fbdmd", "tlsdmd", "cdmd", "cdmd2"):
        res, _ = run_method(method, data, 4)
        errs[method] = float(np.abs(np.sort_complex(res.eigs_continuous) - truth).max())
    worst = max(errs.values())
    report(2, worst <= 1e-4, f"max eigenvalue error {worst:.2e} (<= 1e-4) for {sorted(errs)}")


# 3 ------------------------------------------------------------------------


def _kron_oracle(C1, C2, C3):
    p, q = C3.shape
    K = np.kron(np.eye(q), C1) + np.kron(C2.T, np.eye(p))
    return np.linalg.solve(K, C3.reshape(-1, order="F")).reshape((p, q), order="F")


def _fd(f, M, h=1e-6):
    G = np.zeros_like(M)
    for idx in np.ndindex(M.shape):
        E = np.zeros_like(M)
        E[idx] = h
        G[idx] = (f(M + E) - f(M - E)) / (2 * h)
    return G


def test_criterion_3_solver_oracles():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    syl = 0.0
    for k in range(100):
        p, q = rng.integers(1, 9, size=2)
        C1, C2 = rng.normal(size=(p, p)), rng.normal(size=(q, q))
        if k % 2:
            C1, C2 = C1 @ C1.T, C2 @ C2.T
        C2 = C2 + (np.abs(np.linalg.eigvals(C1)).max() + np.abs(np.linalg.eigvals(C2)).max() + 1) * np.eye(q)
        C3 = rng.normal(size=(p, q))
        ref = _kron_oracle(C1, C2, C3)
        syl = max(syl, np.linalg.norm(linalg.sylvester_solve(C1, C2, C3) - ref) / np.linalg.norm(ref))

    opt = fd = 0.0
    for seed in range(20):
        g = np.random.default_rng(seed)
        r = int(g.integers(1, 7))
        X, Y = g.normal(size=(r, 3 * r + 2)), g.normal(size=(r, 3 * r + 2))
        s = AdmmState(A=g.normal(size=(r, r)), B=g.normal(size=(r, r)), Q1=0.1 * g.normal(size=(r, r)),
                      Q2=0.1 * g.normal(size=(r, r)), rho=float(g.uniform(0.1, 10)))
        A = update_A(s, X, Y)
        B = update_B(s, X, Y)
        opt = max(opt, np.linalg.norm(lagrangian_grad_A(A, s.B, s.Q1, s.Q2, s.rho, X, Y)),
                  np.linalg.norm(lagrangian_grad_B(s.A, B, s.Q1, s.Q2, s.rho, X, Y)))
        gA = lagrangian_grad_A(s.A, s.B, s.Q1, s.Q2, s.rho, X, Y)
        gB = lagrangian_grad_B(s.A, s.B, s.Q1, s.Q2, s.rho, X, Y)
        fA = _fd(lambda M: augmented_lagrangian(M, s.B, s.Q1, s.Q2, s.rho, X, Y), s.A)
        fB = _fd(lambda M: augmented_lagrangian(s.A, M, s.Q1, s.Q2, s.rho, X, Y), s.B)
        fd = max(fd, np.linalg.norm(gA - fA) / np.linalg.norm(gA), np.linalg.norm(gB - fB) / np.linalg.norm(gB))
    elapsed = time.perf_counter() - t0
    ok = syl <= 1e-9 and opt <= 1e-8 and fd <= 1e-4 and elapsed < 30
    report(3, ok, f"Sylvester vs Kronecker rel err {syl:.1e} (<= 1e-9); update optimality {opt:.1e} (<= 1e-8); "
                  f"FD gradient rel err {fd:.1e} (<= 1e-4); runtime {elapsed:.1f}s (< 30s)")


# 4 ------------------------------------------------------------------------


def test_criterion_4_admm_convergence_profile():
    clean = gen_sine_superposition(SineSuperpositionSpec(n=16))
    iters, conv = [], 0
    for t in range(200):
        rd = pod_reduce(add_noise(clean, NoiseSpec(0.25, seed=t)), 4)
        res, _, _ = cdmd(rd, AdmmConfig())
        conv += res.converged and res.iterations <= 500
        iters.append(res.iterations)
    frac = conv / 200
    med = float(np.median(iters))
    report(4, frac >= 0.95 and med <= 300,
           f"{conv}/200 trials met the stopping rule within 500 iterations ({frac:.1%} >= 95%), "
           f"median iterations {med:.0f} (<= 300)")


# 5 ------------------------------------------------------------------------


def _sweep(path):
    with open(path / "sweep.csv") as fh:
        return {(r["method"], int(r["n"])): float(r["value"]) for r in csv.DictReader(fh)}


def test_criterion_5_consistency_dominance(runs):
    sweep = _sweep(runs["fig2_desk"][0])
    ratios = {n: sweep[("exact", n)] / sweep[("cdmd", n)] for n in (8, 16, 32, 64)}
    worst = min(ratios.values())
    detail = ", ".join(f"n={n}: exact/cdmd = {v:.1e}" for n, v in ratios.items())
    report(5, worst >= 10, f"{detail} (each >= 10)")


# 6 ------------------------------------------------------------------------


def _batches(path):
    return {(b["method"], b["n"]): b for b in json.loads((path / "summary.json").read_text())["batches"]}


def test_criterion_6_noise_robustness_ordering(runs):
    b = _batches(runs["fig3_desk"][0])
    ex, cd = b[("exact", 32)], b[("cdmd", 32)]
    ok = cd["ellipse"]["r_min"] < ex["ellipse"]["r_min"] and cd["bias"] < ex["bias"]
    report(6, ok, f"N=500, n=32: r_min cdmd {cd['ellipse']['r_min']:.3f} < exact {ex['ellipse']['r_min']:.3f}; "
                  f"bias cdmd {cd['bias']:.3f} < exact {ex['bias']:.3f}")


# 7 ------------------------------------------------------------------------


def test_criterion_7_trajectory_error(runs):
    summary = {r["method"]: r for r in json.loads((runs["trajectory_desk"][0] / "summary.json").read_text())["rows"]}
    cd, ex = summary["cdmd"]["median"], summary["exact"]["median"]
    ok = cd <= 0.5 and ex >= 2 * cd
    # context only: the same study when X and Y are shifted copies of one noisy trajectory
    shared = NoiseSpec(0.125, model="trajectory")
    alt = {m: float(np.nanmedian(trajectory_study(m, shared, 100, n=32))) for m in ("cdmd", "exact")}
    report(7, ok, f"100 trials, sigma^2=0.125, n=32: median path error cdmd {cd:.3f} (<= 0.5), "
                  f"exact {ex:.3f} (>= 2 x cdmd = {2 * cd:.3f}) "
                  f"[not gated, trajectory noise model: cdmd {alt['cdmd']:.3f}, exact {alt['exact']:.3f}]")


# 8 ------------------------------------------------------------------------


def test_criterion_8_cdmd2_parity():
    rd = pod_reduce(gen_linear_periodic(LinearPeriodicSpec(n=32)), 2)
    res, hist = cdmd2(rd, Cdmd2Config(nu=10.0, mu_reg=1e-2, rho0=10.0, adapt_rho=False))
    err = float(np.abs(np.sort_complex(res.eigs_continuous) - np.array([-1j, 1j])).max())
    ok = res.converged and hist[-1].primal <= 1e-6 and err <= 1e-5
    report(8, ok, f"converged={res.converged} in {res.iterations} iterations, final primal residual "
                  f"{hist[-1].primal:.1e} (<= 1e-6), eigenvalue error {err:.1e} (<= 1e-5)")


# 9 ------------------------------------------------------------------------


def test_criterion_9_full_n_mode(tmp_path):
    cfg = load_config(bundled_config("fig3_desk"))
    full = os.environ.get("CDMD_FULL_N") == "1"
    if not full:
        # the flagged mode must exist and be wired through; exercise it with a tiny full_trials
        cfg.full_trials, cfg.n, cfg.methods = 25, (32,), ("exact",)
    out = run_experiment(cfg.validate(), tmp_path / "full", full=True)
    manifest = json.loads((out / "manifest.json").read_text())
    if not full:
        wired = manifest["trials"] == 25 and load_config(bundled_config("fig3_desk")).full_trials == 10_000
        report(9, wired, "full-N mode (10^4 trials) is available via --full-n; not gated "
                         "(set CDMD_FULL_N=1 to run the orderings at N=10^4)")
        return
    b = _batches(out)
    ex, cd = b[("exact", 32)], b[("cdmd", 32)]
    ok = cd["ellipse"]["r_min"] < ex["ellipse"]["r_min"] and cd["bias"] < ex["bias"]
    report(9, ok, f"N=10^4, n=32: r_min cdmd {cd['ellipse']['r_min']:.3f} vs exact {ex['ellipse']['r_min']:.3f}; "
                  f"bias cdmd {cd['bias']:.3f} vs exact {ex['bias']:.3f}")


# 10 -----------------------------------------------------------------------


def test_criterion_10_determinism(runs):
    mismatched, compared = [], 0
    for name, (a, b) in runs.items():
        for f in sorted(a.glob("*.csv")):
            compared += 1
            if f.read_bytes() != (b / f.name).read_bytes():
                mismatched.append(f"{name}/{f.name}")
    report(10, compared > 0 and not mismatched,
           f"{compared} CSV files from {len(runs)} bundled configs byte-identical on rerun"
           + (f"; mismatched: {mismatched}" if mismatched else ""))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
