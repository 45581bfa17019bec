"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed at the end of the pytest run (see conftest.py) and
also when this file is executed directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from acceptance_log import record
from aerate import dgp
from aerate.cli import main as cli_main
from aerate.dgp import Observation
from aerate.engine import TrialConfig, run_trial
from aerate.estimators import a2ipw_increment
from aerate.harness import BenchConfig, Cell, run_bench
from aerate.policy import optimal_pi_ipw
from aerate.regressors import RegressorState
from aerate.testing import normal_cdf, normal_quantile
from oracles import knn_oracle, nw_oracle, sample_sd_mean

D1 = dgp.make_synthetic(1)
D2 = dgp.make_synthetic(2)
AERATE = "aerate-a2ipw-nw"
RCT = "rct-adaipw-nw"
OPT = "opt-opt"


@pytest.fixture(scope="module")
def dataset1_bench():
    cfg = BenchConfig(
        cells=(Cell("aerate", "a2ipw", "nw"), Cell("rct", "adaipw"), Cell("opt", "opt")),
        reps=200, dataset="synthetic1", horizons=(150, 300), t_cap=300, stopping=False,
    )
    start = time.perf_counter()
    report = run_bench(cfg)
    return report, time.perf_counter() - start


def test_criterion_01_efficiency_gain(dataset1_bench):
    report, seconds = dataset1_bench
    ratio = report.row(AERATE, 300).mse / report.row(RCT, 300).mse
    ok = ratio < 0.6
    record(1, ok, f"MSE(AERATE A2IPW-NW)/MSE(RCT) at T=300 = {ratio:.3f} (< 0.6), "
                  f"200 matched reps, bench took {seconds:.1f}s")
    assert ok


def test_criterion_02_oracle_floor(dataset1_bench):
    mse = dataset1_bench[0].row(OPT, 300).mse
    ok = 0.002 <= mse <= 0.008
    record(2, ok, f"MSE(OPT, T=300) = {mse:.4f} (in [0.002, 0.008])")
    assert ok


def test_criterion_03_fixed_test_type1():
    cfg = BenchConfig(cells=(Cell("aerate", "a2ipw", "nw"),), reps=1000, dataset="synthetic2",
                      horizons=(300,), t_cap=300, stopping=False)
    rate = run_bench(cfg).row(AERATE, 300).rejection_rate
    ok = 0.02 <= rate <= 0.09
    record(3, ok, f"Dataset 2 z-test rejection rate at T=300 = {rate:.3f} over 1000 reps (in [0.02, 0.09])")
    assert ok


def test_criterion_04_anytime_type1():
    stops, crossed = [], 0
    cfg = TrialConfig(horizon=500)
    for i in range(500):
        res = run_trial(cfg, D2, i)
        crossed += res.lil_stop["a2ipw"] is not None
        stops.append(res.stopping_time("a2ipw", "lil", 500))
    frac, mean_stop = crossed / 500, float(np.mean(stops))
    ok = frac <= 0.07 and mean_stop > 480
    record(4, ok, f"Dataset 2 LIL crossing fraction = {frac:.3f} (<= 0.07), "
                  f"mean censored stop = {mean_stop:.1f} (> 480), 500 reps, T=500")
    assert ok


def test_criterion_05_power_gap(dataset1_bench):
    report = dataset1_bench[0]
    a, r = report.row(AERATE, 300).reject_pct, report.row(RCT, 300).reject_pct
    ok = a - r >= 25.0
    record(5, ok, f"rejection at T=300: AERATE {a:.1f}% vs RCT {r:.1f}% (gap {a - r:.1f} >= 25 points)")
    assert ok


def test_criterion_06_closed_form_vs_grid():
    rng = np.random.default_rng(2024)
    q = np.arange(1, 10_000) * 1e-4
    worst = 0.0
    for _ in range(100):
        e1, e0 = 10.0 - rng.uniform(0.0, 9.99, size=2)  # (0.01, 10]
        grid_q = q[np.argmin(e1 / q + e0 / (1.0 - q))]
        worst = max(worst, abs(grid_q - optimal_pi_ipw(e1, e0)))
    ok = worst <= 2e-4
    record(6, ok, f"max |grid argmin - sqrt(e1)/(sqrt(e1)+sqrt(e0))| over 100 pairs = {worst:.2e} (<= 2e-4)")
    assert ok


def _batch_moments(reg: RegressorState, arm: int, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised Nadaraya-Watson moments with the regressor's bandwidth and clipping."""
    xs, ys = reg.samples(arm)
    h = reg.bandwidth(arm)
    first, second = np.empty(len(X)), np.empty(len(X))
    for s in range(0, len(X), 5000):
        d2 = ((X[s:s + 5000, None, :] - xs[None, :, :]) ** 2).sum(axis=2)
        w = np.exp(-d2 / (2 * h * h))
        tot = w.sum(axis=1)
        first[s:s + 5000] = (w @ ys) / tot
        second[s:s + 5000] = (w @ (ys * ys)) / tot
    c = reg.clip_bound
    return np.clip(first, -c, c), np.clip(second, 0.0, c * c)


def test_criterion_07_martingale_difference():
    n = 100_000
    worst = 0.0
    details = []
    for k in range(10):
        rng = np.random.default_rng(700 + k)
        hist_len = int(rng.integers(60, 300))
        past = run_trial(TrialConfig(horizon=hist_len), D1, 7000 + k)
        reg = RegressorState(5, "nw")
        for i in range(hist_len):
            reg.observe(past.x[i], int(past.actions[i]), float(past.outcomes[i]))
        t = hist_len + 1
        X = rng.standard_normal((n, 5))
        f1, e1 = _batch_moments(reg, 1, X)
        f0, e0 = _batch_moments(reg, 0, X)
        for j in range(0, n, n // 100):  # batch predictions agree with the package's
            fv = reg.predict_fv(X[j])
            assert fv.f1 == pytest.approx(f1[j], rel=1e-9, abs=1e-12)
            assert fv.f0 == pytest.approx(f0[j], rel=1e-9, abs=1e-12)
        nu1 = np.maximum(reg.nu_floor, e1 - f1 ** 2)
        nu0 = np.maximum(reg.nu_floor, e0 - f0 ** 2)
        g = min(1.0, t ** -0.5)
        pi = g / 2 + (1 - g) * np.sqrt(nu1) / (np.sqrt(nu1) + np.sqrt(nu0))
        A = (rng.random(n) <= pi).astype(int)
        F0, F1 = dgp.mean_outcomes(D1, X)
        noise = rng.standard_normal(n)
        Y = np.where(A == 1, F1 + 0.8 * noise, F0 + 0.3 * noise)
        h = np.array([
            a2ipw_increment(Observation(t, X[j], int(A[j]), float(Y[j]), float(pi[j])), float(f1[j]), float(f0[j]))
            for j in range(n)
        ])
        z = abs(h.mean() - 0.5) / (h.std(ddof=1) / math.sqrt(n))
        worst = max(worst, z)
        details.append(f"{z:.2f}")
    ok = worst < 4.0
    record(7, ok, f"|mean(h) - theta0| / SE over 10 frozen histories, 1e5 draws each: "
                  f"max {worst:.2f} (< 4); all: {', '.join(details)}")
    assert ok


def test_criterion_08_sigma_convergence():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((1_000_000, 5))
    F0, F1 = dgp.mean_outcomes(D1, X)
    v1, v0 = dgp.true_var(D1, 1), dgp.true_var(D1, 0)
    pi = math.sqrt(v1) / (math.sqrt(v1) + math.sqrt(v0))
    target = float(np.mean(v1 / pi + v0 / (1 - pi) + (F1 - F0 - dgp.true_ate(D1)) ** 2))
    cfg = TrialConfig(horizon=10_000, design="opt")
    values = [run_trial(cfg, D1, 800 + i).variances["a2ipw"][-1] for i in range(20)]
    est = float(np.mean(values))
    rel = abs(est / target - 1)
    ok = rel <= 0.05
    record(8, ok, f"mean sigma_hat^2 under oracle policy (T=1e4, 20 reps) = {est:.4f}, "
                  f"numerical expectation = {target:.4f}, rel. error {rel:.3%} (<= 5%)")
    assert ok


def test_criterion_09_regressor_oracles():
    rng = np.random.default_rng(9)
    knn_bad = nw_worst = 0
    nw_worst = 0.0
    for _ in range(1000):
        n, d = int(rng.integers(1, 51)), int(rng.integers(1, 6))
        xs = rng.normal(size=(n, d)).round(int(rng.integers(0, 4)))
        ys = rng.normal(size=n) * 3
        x = rng.normal(size=d).round(1)
        reg = RegressorState(d, "knn", clip_c3=1e9)
        for xi, yi in zip(xs, ys):
            reg.observe(xi, 1, yi)
        k = max(1, math.isqrt(n))
        for m, tag in ((1, "first"), (2, "second")):
            if reg.knn_predict(1, x, tag) != knn_oracle(xs.tolist(), ys.tolist(), x.tolist(), k, m):
                knn_bad += 1
    for _ in range(1000):
        n, d = int(rng.integers(2, 51)), int(rng.integers(1, 6))
        xs, ys = rng.normal(size=(n, d)), rng.normal(size=n) * 3
        x = rng.normal(size=d)
        reg = RegressorState(d, "nw", clip_c3=1e9)
        for xi, yi in zip(xs, ys):
            reg.observe(xi, 0, yi)
        h = sample_sd_mean(xs.tolist()) * n ** (-1 / (d + 4))
        for m, tag in ((1, "first"), (2, "second")):
            ref = nw_oracle(xs.tolist(), ys.tolist(), x.tolist(), h, m)
            got = reg.nw_predict(0, x, tag)
            nw_worst = max(nw_worst, abs(got - ref) / max(abs(ref), 1e-300))
    ok = knn_bad == 0 and nw_worst <= 1e-10
    record(9, ok, f"KNN mismatches vs brute-force sort on 1000 instances = {knn_bad} (exact); "
                  f"NW max relative error vs direct sum = {nw_worst:.1e} (<= 1e-10)")
    assert ok


def test_criterion_10_numerics():
    err = abs(normal_quantile(0.975) - 1.959964)
    trip = max(abs(normal_cdf(normal_quantile(i / 100)) - i / 100) for i in range(1, 100))
    ok = err < 1e-6 and trip < 1e-8
    record(10, ok, f"|q(0.975) - 1.959964| = {err:.1e} (< 1e-6); round-trip max error = {trip:.1e} (< 1e-8)")
    assert ok


def test_criterion_11_regret_shrinks(dataset1_bench):
    report = dataset1_bench[0]
    r150 = report.row(AERATE, 150).mse - report.row(OPT, 150).mse
    r300 = report.row(AERATE, 300).mse - report.row(OPT, 300).mse
    ok = r300 < r150
    record(11, ok, f"MSE(AERATE) - MSE(OPT): T=150 {r150:.4f}, T=300 {r300:.4f} (must shrink)")
    assert ok


def test_criterion_12_deterministic_bench(tmp_path):
    ini = tmp_path / "bench.ini"
    ini.write_text(
        "[trial]\nT = 200\n[data]\ndataset = synthetic1\n[bench]\nreps = 24\nbase_seed = 17\n"
        "cells = aerate:a2ipw:nw, aerate:ma2ipw:knn, rct:adaipw, hahn50, opt\n"
        "horizons = 100, 200\nt_cap = 250\n"
    )
    outputs = []
    for run, workers in enumerate((1, 1, 2, 4)):
        out = tmp_path / f"r{run}.csv"
        assert cli_main(["bench", "--config", str(ini), "--out", str(out), "--workers", str(workers)]) == 0
        outputs.append(out.read_bytes())
    ok = all(o == outputs[0] for o in outputs)
    record(12, ok, "aerate bench CSV byte-identical across two runs and worker counts 1, 2, 4")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
