"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the summary lines bypass
output capture so they appear in the log.
"""

import itertools
import time

import numpy as np
import pytest

from ramimo.channel import SystemConfig, compose_channel
from ramimo.estimation import CorrelationSet, mmse_estimate, predict_untrained
from ramimo.harness import (
    ExperimentSpec,
    run_experiment,
    run_fig3_analogue,
    run_fig4_analogue,
    run_fig56_analogue,
)
from ramimo.harness.experiments import Scenario
from ramimo.mode_select import (
    ModeMetric,
    evaluate_metric,
    exhaustive_mode_search,
    heuristic_mode_search,
)
from ramimo.precoding import (
    bd_precoder,
    fixed_rf_precoder,
    interference_leakage,
    rbd_precoder,
    sum_rate,
)

from conftest import crandn

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def scenario(seed_base=0, **config):
    return Scenario.from_spec(ExperimentSpec("fig2", config=config, trials=1, seed_base=seed_base))


def test_criterion_01_exhaustive_matches_brute_force(report):
    scn = scenario(seed_base=100, n_tx=4, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=3)
    cfg = scn.cfg
    f_rf = fixed_rf_precoder(cfg)
    start = time.perf_counter()
    mismatches = 0
    for i in range(100):
        pool, _ = scn.realization(i)
        metric = ModeMetric("sum_rate", pool, cfg, f_rf=f_rf)
        res = exhaustive_mode_search(metric)
        best, arg = -np.inf, None
        for modes in itertools.product(range(cfg.n_modes), repeat=cfg.n_tx):
            h = np.stack([pool[m][:, t] for t, m in enumerate(modes)], axis=1)
            v = float(sum_rate(h, rbd_precoder(h, f_rf, cfg.noise_power, cfg), cfg.noise_power, cfg))
            if v > best:
                best, arg = v, modes
        if tuple(res.modes) != arg or not np.isclose(res.score, best, rtol=1e-12, atol=0):
            mismatches += 1
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 30
    report(1, ok, f"{100 - mismatches}/100 exact matches, {elapsed:.1f} s (limit 30 s)")
    assert ok


def test_criterion_02_heuristic_near_optimal(report):
    scn = scenario(seed_base=200, n_tx=4, n_rx=2, n_users=2, n_rf=2, n_streams=1, n_modes=4)
    cfg = scn.cfg
    fixed = np.full(cfg.n_tx, scn.broadside_mode)
    start = time.perf_counter()
    near, above_fixed = 0, 0
    for i in range(100):
        pool, _ = scn.realization(i)
        metric = ModeMetric("eig_sum", pool, cfg)
        es = exhaustive_mode_search(metric).score
        heur = heuristic_mode_search(metric).score
        near += heur >= 0.95 * es
        above_fixed += heur >= evaluate_metric(metric, fixed)
    elapsed = time.perf_counter() - start
    ok = near >= 95 and above_fixed == 100 and elapsed < 120
    report(2, ok, f"within 95% of exhaustive in {near}/100, >= fixed mode in {above_fixed}/100, "
                  f"{elapsed:.1f} s (limit 120 s)")
    assert ok


def test_criterion_03_bd_zero_interference(report):
    cfg = SystemConfig()
    scn = scenario(seed_base=300)
    f_rf = fixed_rf_precoder(cfg)
    rng = np.random.default_rng(3)
    leaks, powers = [], []
    for i in range(500):
        pool, _ = scn.realization(i)
        h = compose_channel(pool, rng.integers(cfg.n_modes, size=cfg.n_tx))
        pre = bd_precoder(h, f_rf, cfg)
        leaks.append(float(interference_leakage(h, pre, cfg)))
        powers.append(np.linalg.norm(pre.transmit_matrix) ** 2)
    worst_leak = max(leaks)
    worst_power = float(np.max(np.abs(np.array(powers) - cfg.total_streams)))
    ok = worst_leak < 1e-8 and worst_power <= 1e-9
    report(3, ok, f"max leakage {worst_leak:.2e} (limit 1e-8), max power error {worst_power:.2e} "
                  "(limit 1e-9) over 500 instances")
    assert ok


def test_criterion_04_rbd_limit(report):
    # i.i.d. channels keep every user's projected channel well conditioned; the
    # clustered model often gives per-user rank below n_s, where RBD at finite
    # noise legitimately trades leakage for gain
    cfg = SystemConfig()
    f_rf = fixed_rf_precoder(cfg)
    channels = crandn(np.random.default_rng(4), 50, cfg.n_users * cfg.n_rx, cfg.n_tx)
    sweep = (1.0, 1e-3, 1e-6, 1e-9, 1e-12)
    worst_final, monotone = 0.0, 0
    for h in channels:
        leak = [float(interference_leakage(h, rbd_precoder(h, f_rf, s2, cfg), cfg)) for s2 in sweep]
        worst_final = max(worst_final, leak[-1])
        # differences below 1e-12 are roundoff once leakage has reached machine precision
        monotone += all(b <= a + 1e-12 for a, b in zip(leak, leak[1:]))
    ok = worst_final < 1e-5 and monotone == 50
    report(4, ok, f"max leakage at 1e-12 is {worst_final:.2e} (limit 1e-5), "
                  f"non-increasing on {monotone}/50 channels")
    assert ok


def gaussian_ensemble(n, draws, q, seed):
    """Jointly Gaussian vectors with a known covariance plus LS-like noise."""
    rng = np.random.default_rng(seed)
    a = crandn(rng, n, n)
    r = a @ a.conj().T / n + 0.1 * np.eye(n)
    h = np.linalg.cholesky(r) @ crandn(rng, n, draws)
    h_tilde = h + np.sqrt(q) * crandn(rng, n, draws)
    return r, h, h_tilde


def test_criterion_05_mmse_optimality(report):
    q = 0.5
    r, h, h_tilde = gaussian_ensemble(6, 10**4, q, seed=5)
    mmse = np.mean(np.sum(np.abs(mmse_estimate(h_tilde, r, q) - h) ** 2, axis=0))
    ls = np.mean(np.sum(np.abs(h_tilde - h) ** 2, axis=0))
    analytic = np.trace(r - r @ np.linalg.solve(r + q * np.eye(6), r)).real
    rel = abs(mmse - analytic) / analytic
    ok = mmse <= ls and rel < 0.05
    report(5, ok, f"MMSE {mmse:.4f} <= LS {ls:.4f}; analytic {analytic:.4f}, "
                  f"relative error {rel:.2%} (limit 5%)")
    assert ok


def test_criterion_06_prediction_analytic(report):
    q = 0.5
    r, h, h_tilde = gaussian_ensemble(6, 10**4, q, seed=5)
    trained, untrained = np.array([0, 2, 4]), np.array([1, 3, 5])
    corr = CorrelationSet(r_tt=r[np.ix_(trained, trained)], r_ut=r[np.ix_(untrained, trained)],
                          trained=trained, source="synthetic", full=r)
    pred = predict_untrained(h_tilde[trained], corr, q)
    empirical = np.mean(np.sum(np.abs(pred - h[untrained]) ** 2, axis=0))
    r_ch = r[np.ix_(untrained, trained)]
    analytic = np.trace(r[np.ix_(untrained, untrained)]
                        - r_ch @ np.linalg.solve(corr.r_tt + q * np.eye(3), r_ch.conj().T)).real
    rel = abs(empirical - analytic) / analytic
    ok = rel < 0.05
    report(6, ok, f"prediction MSE {empirical:.4f}, analytic {analytic:.4f}, "
                  f"relative error {rel:.2%} (limit 5%)")
    assert ok


def test_criterion_07_training_size_trend(report):
    spec = ExperimentSpec("fig3", trials=2000, check_trends=False)
    start = time.perf_counter()
    rows = run_fig3_analogue(spec, threads=4)
    elapsed = time.perf_counter() - start
    mse = [m for _, scheme, m in rows if scheme == "optimal"]
    monotone = all(b <= a * (1 + 1e-9) for a, b in zip(mse, mse[1:]))
    drop = 1 - mse[-1] / mse[0]
    ok = len(mse) == 10 and monotone and drop >= 0.10 and elapsed < 600
    report(7, ok, "MSE by F " + " ".join(f"{m:.3g}" for m in mse)
           + f"; non-increasing={monotone}, drop {drop:.1%} (min 10%), {elapsed:.0f} s (limit 600 s)")
    assert ok


def test_criterion_08_scheme_ordering(report):
    spec = ExperimentSpec("fig4", trials=2000)
    res = {(snr, s): m for snr, s, m in run_fig4_analogue(spec, threads=4)}
    lines, ok = [], True
    for snr in spec.snr_db:
        o, c, p = (res[(snr, s)] for s in ("optimal", "offline-chan-corr", "offline-pattern-corr"))
        ok &= o <= c <= p
        lines.append(f"{snr:g} dB {o:.3g}/{c:.3g}/{p:.3g}")
    report(8, ok, "optimal <= offline-chan <= offline-pattern: " + ", ".join(lines))
    assert ok


def test_criterion_09_perfect_csi_dominates(report):
    spec = ExperimentSpec("fig56", trials=500)
    rows = run_fig56_analogue(spec, threads=4)
    res = {(snr, v): rate for snr, v, rate in rows}
    estimated = ("estimated-optimal", "estimated-offline", "estimated-pattern")
    dominance = all(res[(snr, "perfect")] >= res[(snr, v)] for snr in spec.snr_db for v in estimated)
    top = max(spec.snr_db)
    worst = min(estimated, key=lambda v: res[(top, v)])
    ok = dominance and worst == "estimated-pattern"
    detail = ", ".join(f"{snr:g} dB " + "/".join(f"{res[(snr, v)]:.2f}" for v in spec.schemes)
                       for snr in spec.snr_db)
    report(9, ok, f"perfect dominates={dominance}, worst at {top:g} dB is {worst}; "
                  f"rates (perfect/optimal/offline/pattern) {detail}")
    assert ok


@pytest.mark.parametrize("scenario_name", ["fig2", "fig4", "fig56"])
def test_criterion_10_thread_determinism(report, scenario_name, tmp_path):
    small = {"n_tx": 4, "n_rx": 2, "n_users": 2, "n_rf": 2, "n_streams": 1, "n_modes": 4}
    spec = ExperimentSpec(scenario_name, config=small, trials=24, snr_db=[0.0, 20.0],
                          calibration_trials=100, n_train=2, seed_base=11)
    a, b = tmp_path / "t1.csv", tmp_path / "t8.csv"
    run_experiment(spec, threads=1, out=a)
    run_experiment(spec, threads=8, out=b)
    again = tmp_path / "again.csv"
    run_experiment(spec, threads=8, out=again)
    ok = a.read_bytes() == b.read_bytes() == again.read_bytes()
    report(10, ok, f"{scenario_name}: 1-thread and 8-thread CSV byte-identical={ok}")
    assert ok
