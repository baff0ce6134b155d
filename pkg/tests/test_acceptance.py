"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the recorded lines are
repeated in the "acceptance criteria" section of the terminal summary.
"""
import hashlib
import os
import subprocess
import sys
import time
import warnings

import numpy as np
import pytest
from scipy import integrate

from breachrisk.breach_data import SyntheticConfig, generate_synthetic
from breachrisk.copula import (CopulaSpec, Family, cdf, density, h_function, h_inverse,
                               kendall_tau, sample)
from breachrisk.imputation import impute, impute_marginal_mean, imputation_mae
from breachrisk.marginal import ArmaGarchParams, fit_arma_garch, ljung_box, simulate_arma_garch
from breachrisk.risk_eval import backtest, crps, lruc
from breachrisk.rolling import roll

from helpers import mixed_fd, random_specs
from test_marginal import brute_q
from test_risk_eval import crps_quadrature

pytestmark = pytest.mark.acceptance


def test_criterion_01_tawn_tau(record_criterion):
    t0 = time.perf_counter()
    tau = kendall_tau(sample(CopulaSpec("TawnType2", 3.93, 0.67), 100_000, 2024))
    dt = time.perf_counter() - t0
    ok = abs(tau - 0.54) <= 0.02 and dt < 10
    assert record_criterion(1, ok, f"tau={tau:.4f} (0.54 +/- 0.02), {dt:.1f}s < 10s")


def test_criterion_02_bb8_tau(record_criterion):
    t0 = time.perf_counter()
    tau = kendall_tau(sample(CopulaSpec("BB8", 4.54, 0.98), 100_000, 2024))
    dt = time.perf_counter() - t0
    ok = abs(tau - 0.64) <= 0.02 and dt < 10
    assert record_criterion(2, ok, f"tau={tau:.4f} (0.64 +/- 0.02), {dt:.1f}s < 10s")


def test_criterion_03_kupiec_anchors(record_criterion):
    t0 = time.perf_counter()
    p1 = lruc(580, 54, 0.1)[1]
    p2 = lruc(580, 26, 0.05)[1]
    dt = time.perf_counter() - t0
    ok = abs(p1 - 0.576) <= 0.01 and abs(p2 - 0.561) <= 0.02 and dt < 1
    assert record_criterion(3, ok, f"p(54/580, .1)={p1:.4f}, p(26/580, .05)={p2:.4f}, {dt:.3f}s")


def _copula_checks(spec):
    """Worst errors for one parameter point: (boundary, fd_rel, quad, round_trip)."""
    x = np.linspace(0.0, 1.0, 21)
    boundary = max(np.max(np.abs(cdf(spec, x, 1.0) - x)), np.max(np.abs(cdf(spec, 1.0, x) - x)),
                   np.max(np.abs(cdf(spec, x, 0.0))), np.max(np.abs(cdf(spec, 0.0, x))))
    g = np.linspace(0.1, 0.9, 9)
    u, v = np.meshgrid(g, g)
    c = density(spec, u, v)
    fd_rel = float(np.max(np.abs(mixed_fd(spec, u, v) - c) / c))
    quad, _ = integrate.dblquad(lambda b, a: density(spec, a, b), 0, 1, 0, 1,
                                epsabs=1e-7, epsrel=1e-7)
    rng = np.random.default_rng(0)
    uu = rng.uniform(0.01, 0.99, 200)
    ww = rng.uniform(0.001, 0.999, 200)
    vv = rng.uniform(0.01, 0.99, 200)
    forward = np.max(np.abs(h_function(spec, h_inverse(spec, ww, uu), uu) - ww))
    p = h_function(spec, vv, uu)
    keep = (p > 1e-9) & (p < 1 - 1e-9)
    backward = np.max(np.abs(h_inverse(spec, p[keep], uu[keep]) - vv[keep]))
    return boundary, fd_rel, abs(quad - 1), max(forward, backward)


def test_criterion_04_copula_correctness(record_criterion):
    t0 = time.perf_counter()
    worst = np.zeros(4)
    for fam in Family:
        for spec in random_specs(fam, 10, seed=4):
            worst = np.maximum(worst, _copula_checks(spec))
    dt = time.perf_counter() - t0
    ok = (worst[0] <= 1e-12 and worst[1] <= 1e-5 and worst[2] <= 1e-3 and worst[3] <= 1e-8
          and dt < 120)
    assert record_criterion(4, ok, "boundary={:.1e} fd_rel={:.1e} |quad-1|={:.1e} "
                                   "round_trip={:.1e}, {:.0f}s".format(*worst, dt))


def test_criterion_05_reduction_identities(record_criterion):
    t0 = time.perf_counter()
    g = np.linspace(0.02, 0.98, 25)
    u, v = np.meshgrid(g, g)
    err = 0.0
    for delta in (0.1, 0.5, 0.98, 1.0):
        err = max(err, np.max(np.abs(cdf(CopulaSpec("BB8", 1.0, delta), u, v) - u * v)))
    for theta in (1.0, 1.7, 3.93, 8.0):
        tawn = cdf(CopulaSpec("TawnType2", theta, 1.0), u, v)
        err = max(err, np.max(np.abs(tawn - cdf(CopulaSpec("Gumbel", theta), u, v))))
    dt = time.perf_counter() - t0
    ok = err <= 1e-12 and dt < 5
    assert record_criterion(5, ok, f"max pointwise error={err:.1e}, {dt:.2f}s")


def test_criterion_06_arma_garch_recovery(record_criterion):
    t0 = time.perf_counter()
    truth = ArmaGarchParams(0.1, (0.5,), (0.3,), 0.1, 0.1, 0.8)
    fits = [fit_arma_garch(simulate_arma_garch(truth, 5000, s), 1, 1) for s in range(20)]
    names = ("mu", "phi1", "theta1", "w", "alpha1", "beta1")
    true = np.array([0.1, 0.5, 0.3, 0.1, 0.1, 0.8])
    est = np.array([[f.mu, f.phi[0], f.theta_ma[0], f.w, f.alpha1, f.beta1] for f in fits])
    med = np.median(np.abs(est - true) / true, axis=0)
    stationary = all(f.alpha1 + f.beta1 < 1 for f in fits)
    dt = time.perf_counter() - t0
    ok = bool(np.all(med <= 0.2)) and stationary and dt < 180
    detail = " ".join(f"{n}={m:.3f}" for n, m in zip(names, med))
    assert record_criterion(6, ok, f"median |rel err|: {detail}; stationary={stationary}, {dt:.0f}s")


def test_criterion_07_ljung_box(record_criterion):
    t0 = time.perf_counter()
    rej = sum(ljung_box(np.random.default_rng(s).standard_normal(2000), 20)[1] < 0.05
              for s in range(500))
    x = list(np.random.default_rng(30).normal(size=30))
    diff = abs(ljung_box(x, 10)[0] - brute_q(x, 10))
    dt = time.perf_counter() - t0
    ok = 15 <= rej <= 35 and diff <= 1e-10 and dt < 120
    assert record_criterion(7, ok, f"rejection rate={rej / 500:.3f} (0.05 +/- 0.02), "
                                   f"|Q - brute|={diff:.1e}, {dt:.1f}s")


def test_criterion_08_crps_identities(record_criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    point = all(crps(np.full(n, a), b) == abs(a - b)
                for n, a, b in zip(rng.integers(1, 50, 100), rng.normal(size=100) * 10,
                                   rng.normal(size=100) * 10))
    worst = 0.0
    for _ in range(100):
        x = rng.normal(rng.normal() * 5, rng.uniform(0.1, 5), 50)
        s = float(rng.normal() * 5)
        q = crps_quadrature(x, s)
        worst = max(worst, abs(crps(x, s) - q) / q)
    dt = time.perf_counter() - t0
    ok = point and worst <= 1e-6 and dt < 30
    assert record_criterion(8, ok, f"point-forecast exact={point}, max rel diff vs "
                                   f"quadrature={worst:.1e}, {dt:.1f}s")


def test_criterion_09_imputation_quality(record_criterion):
    t0 = time.perf_counter()
    rows, ok = [], True
    for seed in range(10):
        d = generate_synthetic(SyntheticConfig(length=1505, tti_missing_rate=0.19,
                                               both_missing_rate=0.13), seed)
        r = impute(d.points, 5000, seed)
        ours = imputation_mae(r.ttn, r.tti, d.ttn_true, d.tti_true, r.imputed_flags)
        base = imputation_mae(*impute_marginal_mean(d.points), d.ttn_true, d.tti_true,
                              r.imputed_flags)
        rate = r.clamp_count / max(int(r.imputed_flags[:, 1].sum()), 1)
        ok &= ours <= base and bool(np.all(r.tti <= r.ttn)) and rate <= 0.05
        rows.append(f"{ours:.1f}/{base:.1f}")
    dt = time.perf_counter() - t0
    ok &= dt < 300
    assert record_criterion(9, ok, f"copula/baseline MAE per seed: {' '.join(rows)}, {dt:.0f}s")


@pytest.mark.slow
def test_criterion_10_end_to_end_calibration(record_criterion):
    t0 = time.perf_counter()
    seeds_ok, hits, total, lines = 0, 0, 0, []
    for seed in range(20):
        d = generate_synthetic(SyntheticConfig(length=1100, integer_days=False), seed)
        r = impute(d.points[:600], 5000, seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            steps = roll(r, d.points[600:], 500, 5000, seed)
        rep = backtest(steps, [s.ttn_obs for s in steps], 0.95)
        rate = rep.observed / rep.n
        good = 0.025 <= rate <= 0.075 and rep.lruc_p > 0.05
        seeds_ok += good
        hits += rep.observed
        total += rep.n
        lines.append(f"{seed}:{rate:.3f}/{rep.lruc_p:.2f}{'' if good else '*'}")
    dt = time.perf_counter() - t0
    ok = seeds_ok >= 16 and dt < 1800
    assert record_criterion(10, ok, f"{seeds_ok}/20 seeds with rate in [0.025, 0.075] and "
                                    f"LRuc p > 0.05 (pooled rate {hits / total:.4f}); "
                                    f"rate/p per seed: {' '.join(lines)}; {dt:.0f}s")


def _pipeline(out_dir, jobs, threads):
    env = dict(os.environ, OMP_NUM_THREADS=str(threads), OPENBLAS_NUM_THREADS=str(threads),
               MKL_NUM_THREADS=str(threads))
    common = ["--output-dir", str(out_dir), "--seed", "11", "--jobs", str(jobs)]
    commands = [
        ["simulate", "--length", "700"],
        ["impute", "--input", str(out_dir / "points.csv"), "--split-index", "600"],
        ["roll", "--split-index", "600", "--emit-samples"],
        ["backtest"],
        ["report", "--svg"],
    ]
    for cmd in commands:
        subprocess.run([sys.executable, "-m", "breachrisk"] + cmd + common, env=env,
                       check=True, capture_output=True)
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out_dir.iterdir()) if p.is_file()}


@pytest.mark.slow
def test_criterion_11_determinism(record_criterion, tmp_path):
    t0 = time.perf_counter()
    a = _pipeline(tmp_path / "a", jobs=1, threads=1)
    b = _pipeline(tmp_path / "b", jobs=1, threads=1)
    c = _pipeline(tmp_path / "c", jobs=4, threads=4)
    dt = time.perf_counter() - t0
    ok = a == b == c and len(a) >= 10
    assert record_criterion(11, ok, f"{len(a)} artifacts identical across 2 runs and "
                                    f"jobs/threads 1 vs 4: {a == b == c}, {dt:.0f}s")
