"""Seeded Monte-Carlo sweeps producing the figure-analogue CSV tables.

Trial ``i`` draws its propagation realization from seed
``[seed_base + i, 0]`` and its pilot noise from ``[seed_base + i, 1]``;
calibration realization ``j`` uses ``[seed_base + j, 2]``. Every scheme of a
sweep therefore sees the same channels and noise (common random numbers),
calibration never overlaps evaluation, and results do not depend on the
number of worker threads.
"""

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..channel import Geometry, build_candidate_pool, compose_channel, sample_propagation, user_channels
from ..estimation import (
    TrainingPlan,
    assign_sectors,
    estimate_all_modes,
    ls_estimate,
    noise_ratio,
    pattern_correlation,
    sector_correlations,
    select_training_modes_offline,
    simulate_uplink_training,
    subset_mse,
    subset_mse_table,
)
from ..exceptions import BudgetExceededError
from ..mode_select import ModeMetric, exhaustive_mode_search, heuristic_mode_search
from ..patterns import generate_pattern_set
from ..precoding import bd_precoder, fixed_rf_precoder, rbd_precoder, sum_rate

log = logging.getLogger(__name__)

PROPAGATION, NOISE, CALIBRATION = 0, 1, 2


class TrendError(RuntimeError):
    """A sweep result violates a trend the experiment is required to show."""


def map_trials(fn, n, threads=1):
    """``[fn(0), ..., fn(n-1)]``, evaluated by up to ``threads`` workers, in index order."""
    if threads <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n)))


def ci95(values):
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return 0.0
    return float(1.96 * values.std(ddof=1) / np.sqrt(values.size))


@dataclass(eq=False)
class Scenario:
    """Shared, read-only state of one sweep."""

    spec: object
    cfg: object
    patterns: object
    geometry: Geometry

    @classmethod
    def from_spec(cls, spec):
        cfg = spec.system
        patterns = generate_pattern_set(cfg.n_modes, beamwidth=spec.beamwidth, exponent=spec.exponent)
        return cls(spec, cfg, patterns, Geometry())

    def realization(self, index, stream=PROPAGATION):
        """Candidate pool and per-user LOS azimuths of one realization."""
        seed = [self.spec.seed_base + index, stream]
        paths = sample_propagation(self.cfg, self.geometry, seed)
        return build_candidate_pool(paths, self.patterns, self.cfg), paths.los_azimuth

    def observations(self, pool, index, noise_power):
        """LS estimates of all modes from the trial's pilot noise, ``(L, K*N_R, N_T)``."""
        block = simulate_uplink_training(pool, np.arange(self.cfg.n_modes), noise_power,
                                         self.cfg.pilot_power, seed=[self.spec.seed_base + index, NOISE])
        return ls_estimate(block)

    def noise_ratio(self, noise_power):
        return noise_ratio(noise_power, self.cfg.pilot_power, self.cfg.n_pilots)

    @property
    def broadside_mode(self):
        return self.patterns.closest_mode(0.0)


# Scheme and CSI-variant names mapped to the training plan they use.
_PLAN_OF = {
    "optimal": "optimal",
    "offline-chan-corr": "channel",
    "offline-pattern-corr": "pattern",
    "estimated-optimal": "optimal",
    "estimated-offline": "channel",
    "estimated-pattern": "pattern",
}


@dataclass(eq=False)
class Calibration:
    """Statistics and training plans for one SNR and training size.

    ``plan_channel`` and ``plan_pattern`` are chosen offline on the
    calibration ensemble; ``plan_optimal`` is chosen on the evaluation
    ensemble itself (see :func:`optimal_plan`).
    """

    sector_corr: np.ndarray
    pattern_corr: np.ndarray
    plan_channel: TrainingPlan
    plan_pattern: TrainingPlan
    plan_optimal: TrainingPlan = None

    def plan(self, scheme):
        return getattr(self, "plan_" + _PLAN_OF[scheme])

    def correlation(self, scheme, sector):
        if _PLAN_OF[scheme] == "pattern":
            return self.pattern_corr
        return self.sector_corr[sector]


def calibration_ensemble(scn, threads=1):
    """User-level calibration channels ``(M, L, N_R, N_T)`` and LOS azimuths ``(M,)``."""
    draws = map_trials(lambda j: scn.realization(j, CALIBRATION), scn.spec.calibration_trials, threads)
    channels = np.concatenate([user_channels(pool, scn.cfg) for pool, _ in draws])
    azimuth = np.concatenate([az for _, az in draws])
    return channels, azimuth


def calibrate(scn, channels, azimuth, noise_power, n_train):
    spec, cfg = scn.spec, scn.cfg
    sector_corr = sector_correlations(channels, azimuth, spec.n_sectors)
    pattern_corr = pattern_correlation(scn.patterns)
    common = dict(noise_power=noise_power, pilot_power=cfg.pilot_power, n_pilots=cfg.n_pilots)
    plan_channel = select_training_modes_offline(n_train, spec.n_sectors, channels, azimuth,
                                                 correlation=sector_corr, **common)
    plan_pattern = select_training_modes_offline(n_train, spec.n_sectors, channels, azimuth,
                                                 correlation=pattern_corr, **common)
    return Calibration(sector_corr, pattern_corr, plan_channel, plan_pattern)


def optimal_plan(cal, users, obs, sectors, n_train, q):
    """Exhaustive per-sector subset selection on the evaluation ensemble.

    Each sector gets the subset with the smallest average realized MSE over
    the evaluated users in it, with the same sector correlation as the
    offline channel-correlation scheme. ``sectors`` holds the sector index of
    every user. Returns ``(plan, per_user_mse)``.
    """
    per_user = np.empty(users.shape[0])
    entries = []
    for s, (bounds, offline_modes) in enumerate(cal.plan_channel.sectors):
        members = sectors == s
        if not np.any(members):
            entries.append((bounds, offline_modes))
            continue
        subsets, table = subset_mse_table(users[members], cal.sector_corr[s], n_train, q,
                                          observations=obs[members])
        best = int(np.argmin(table.mean(axis=1)))
        per_user[members] = table[best]
        entries.append((bounds, subsets[best]))
    return TrainingPlan(cal.plan_channel.n_modes, tuple(entries)), per_user


# -- channel estimation MSE (fig3, fig4) ---------------------------------------------

def _plan_mse(scheme, cal, users, obs, sectors, q):
    """Per-user normalized MSE of a plan-based scheme, shape ``(M,)``."""
    plan = cal.plan(scheme)
    out = np.empty(users.shape[0])
    for s, (_, modes) in enumerate(plan.sectors):
        members = sectors == s
        if np.any(members):
            out[members] = subset_mse(users[members], cal.correlation(scheme, s), np.array(modes), q,
                                      observations=obs[members])
    return out


def _mse_sweep(spec, f_values, threads):
    scn = Scenario.from_spec(spec)
    cfg = scn.cfg
    cal_channels, cal_az = calibration_ensemble(scn, threads)
    draws = map_trials(scn.realization, spec.trials, threads)
    users = np.concatenate([user_channels(pool, cfg) for pool, _ in draws])
    sectors = assign_sectors(np.concatenate([az for _, az in draws]), spec.n_sectors)

    results = {}
    for snr in spec.snr_db:
        noise_power = cfg.with_snr(snr).noise_power
        q = scn.noise_ratio(noise_power)
        obs = map_trials(lambda i: scn.observations(draws[i][0], i, noise_power), spec.trials, threads)
        obs = np.concatenate([user_channels(o, cfg) for o in obs])
        for f in f_values:
            cal = calibrate(scn, cal_channels, cal_az, noise_power, f)
            for scheme in spec.schemes:
                if scheme == "optimal":
                    cal.plan_optimal, per_user = optimal_plan(cal, users, obs, sectors, f, q)
                else:
                    per_user = _plan_mse(scheme, cal, users, obs, sectors, q)
                per_trial = per_user.reshape(spec.trials, cfg.n_users).mean(axis=1)
                results[(float(snr), f, scheme)] = float(per_trial.mean())
    return results


def run_fig3_analogue(spec, threads=1):
    """Rows ``(F, scheme, normalized_mse)`` at the first SNR of the spec file."""
    snr = spec.snr_db[0]
    sub = replace(spec, snr_db=[snr])
    results = _mse_sweep(sub, sorted(spec.f_values), threads)
    rows = [(f, scheme, results[(float(snr), f, scheme)])
            for f in sorted(spec.f_values) for scheme in spec.schemes]
    if spec.check_trends and "optimal" in spec.schemes:
        check_nonincreasing([m for f, s, m in rows if s == "optimal"], "fig3 optimal MSE over F")
    return rows


def run_fig4_analogue(spec, threads=1):
    """Rows ``(snr_db, scheme, normalized_mse)`` for training size ``spec.n_train``."""
    results = _mse_sweep(spec, [spec.n_train], threads)
    rows = [(float(snr), scheme, results[(float(snr), spec.n_train, scheme)])
            for snr in spec.snr_db for scheme in spec.schemes]
    order = [s for s in ("optimal", "offline-chan-corr", "offline-pattern-corr") if s in spec.schemes]
    for snr in spec.snr_db:
        vals = [results[(float(snr), spec.n_train, s)] for s in order]
        if any(b < a for a, b in zip(vals, vals[1:])):
            log.warning("fig4 scheme ordering violated at %s dB: %s", snr, dict(zip(order, vals)))
    for scheme in spec.schemes:
        curve = [results[(float(snr), spec.n_train, scheme)] for snr in sorted(spec.snr_db)]
        if any(b > a for a, b in zip(curve, curve[1:])):
            log.warning("fig4 %s MSE does not decrease with SNR: %s", scheme, curve)
    return rows


def check_nonincreasing(values, what, rtol=1e-9):
    """Raise :class:`TrendError` unless ``values`` never grow (up to round-off)."""
    for a, b in zip(values, values[1:]):
        if b > a * (1 + rtol):
            raise TrendError(f"{what} is not non-increasing: {values}")


# -- sum rate (fig2, fig56) ---------------------------------------------------------

def _rbd_rate(pool_est, pool_true, modes, cfg, f_rf, noise_power):
    """Rate on the true channel of an RBD precoder designed on the estimated one."""
    h_est = compose_channel(pool_est, modes)
    pre = rbd_precoder(h_est, f_rf, noise_power, cfg)
    return float(sum_rate(compose_channel(pool_true, modes), pre, noise_power, cfg))


def _select(pool, cfg, metric, noise_power, max_sweeps):
    m = ModeMetric(metric, pool, cfg, noise_power=noise_power)
    return heuristic_mode_search(m, max_sweeps).modes


def run_fig2_analogue(spec, threads=1):
    """Rows ``(snr_db, scheme, mean_sum_rate, ci95)`` with perfect CSI."""
    scn = Scenario.from_spec(spec)
    cfg = scn.cfg
    if "ES" in spec.schemes and cfg.n_modes**cfg.n_tx > spec.budget:
        raise BudgetExceededError(
            f"ES needs {cfg.n_modes}^{cfg.n_tx} evaluations (> budget {spec.budget}); "
            "drop it from the schemes or shrink the configuration"
        )
    f_rf = fixed_rf_precoder(cfg)
    cfg_fd = replace(cfg, n_rf=cfg.n_tx)
    f_rf_fd = fixed_rf_precoder(cfg_fd)
    fixed = np.full(cfg.n_tx, scn.broadside_mode)

    def trial(i):
        pool, _ = scn.realization(i)
        out = np.empty((len(spec.snr_db), len(spec.schemes)))
        for a, snr in enumerate(spec.snr_db):
            s2 = cfg.with_snr(snr).noise_power
            for b, scheme in enumerate(spec.schemes):
                if scheme == "FD":
                    h = compose_channel(pool, fixed)
                    out[a, b] = sum_rate(h, bd_precoder(h, f_rf_fd, cfg_fd), s2, cfg_fd)
                elif scheme == "ES":
                    m = ModeMetric("sum_rate", pool, cfg, noise_power=s2, f_rf=f_rf)
                    out[a, b] = exhaustive_mode_search(m, spec.budget).score
                elif scheme == "RA-AltMI":
                    m = ModeMetric("sum_rate", pool, cfg, noise_power=s2, f_rf=f_rf)
                    out[a, b] = heuristic_mode_search(m, spec.max_sweeps).score
                elif scheme == "RA-AltEig":
                    modes = _select(pool, cfg, "eig_sum", s2, spec.max_sweeps)
                    out[a, b] = _rbd_rate(pool, pool, modes, cfg, f_rf, s2)
                else:
                    out[a, b] = _rbd_rate(pool, pool, fixed, cfg, f_rf, s2)
        return out

    rates = np.stack(map_trials(trial, spec.trials, threads))
    return [(float(snr), scheme, float(rates[:, a, b].mean()), ci95(rates[:, a, b]))
            for a, snr in enumerate(spec.snr_db) for b, scheme in enumerate(spec.schemes)]


def _estimated_pool(variant, cal, obs_users, az, cfg, q):
    """All-mode channel estimate ``(L, K*N_R, N_T)``, each user trained per its sector's plan."""
    plan = cal.plan(variant)
    blocks = []
    for k in range(cfg.n_users):
        s = int(plan.sector_index(az[k]))
        modes = np.array(plan.sectors[s][1])
        blocks.append(estimate_all_modes(obs_users[k], cal.correlation(variant, s), modes, q))
    return np.concatenate(blocks, axis=1)


def run_fig56_analogue(spec, threads=1):
    """Rows ``(snr_db, csi, mean_sum_rate)`` comparing perfect and estimated CSI.

    Modes are selected and the RBD precoder designed on the (estimated)
    candidate pool; the rate is evaluated on the true channel.
    """
    scn = Scenario.from_spec(spec)
    cfg = scn.cfg
    f_rf = fixed_rf_precoder(cfg)
    cal_channels, cal_az = calibration_ensemble(scn, threads)
    draws = map_trials(scn.realization, spec.trials, threads)
    sectors = assign_sectors(np.concatenate([az for _, az in draws]), spec.n_sectors)
    rows = []
    for snr in spec.snr_db:
        s2 = cfg.with_snr(snr).noise_power
        q = scn.noise_ratio(s2)
        obs = map_trials(lambda i: user_channels(scn.observations(draws[i][0], i, s2), cfg),
                         spec.trials, threads)
        cal = calibrate(scn, cal_channels, cal_az, s2, spec.n_train)
        if "estimated-optimal" in spec.schemes:
            users = np.concatenate([user_channels(pool, cfg) for pool, _ in draws])
            cal.plan_optimal, _ = optimal_plan(cal, users, np.concatenate(obs), sectors,
                                               spec.n_train, q)

        def trial(i):
            pool, az = draws[i]
            out = np.empty(len(spec.schemes))
            for b, variant in enumerate(spec.schemes):
                est = pool if variant == "perfect" else _estimated_pool(variant, cal, obs[i], az, cfg, q)
                modes = _select(est, cfg, spec.metric, s2, spec.max_sweeps)
                out[b] = _rbd_rate(est, pool, modes, cfg, f_rf, s2)
            return out

        rates = np.stack(map_trials(trial, spec.trials, threads))
        means = rates.mean(axis=0)
        rows.extend((float(snr), v, float(means[b])) for b, v in enumerate(spec.schemes))
        if "perfect" in spec.schemes:
            p = means[spec.schemes.index("perfect")]
            worse = [v for b, v in enumerate(spec.schemes) if means[b] > p]
            if worse:
                log.warning("estimated CSI beat perfect CSI at %s dB: %s", snr, worse)
    return rows


# -- output -----------------------------------------------------------------------------

HEADERS = {
    "fig2": ("snr_db", "scheme", "mean_sum_rate", "ci95"),
    "fig3": ("F", "scheme", "normalized_mse"),
    "fig4": ("snr_db", "scheme", "normalized_mse"),
    "fig56": ("snr_db", "csi", "mean_sum_rate"),
}

RUNNERS = {
    "fig2": run_fig2_analogue,
    "fig3": run_fig3_analogue,
    "fig4": run_fig4_analogue,
    "fig56": run_fig56_analogue,
}


def _cell(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_csv(spec, rows):
    """CSV text: a ``#`` metadata line, the header, then one line per row."""
    buf = io.StringIO()
    buf.write(f"# scenario={spec.scenario} spec_hash={spec.digest()} "
              f"seed={spec.seed_base} trials={spec.trials}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADERS[spec.scenario])
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def run_experiment(spec, threads=1, out=None):
    """Run the sweep named by ``spec.scenario``; write CSV to ``out`` if given.

    Returns ``(rows, csv_text)``.
    """
    rows = RUNNERS[spec.scenario](spec, threads=threads)
    text = format_csv(spec, rows)
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return rows, text
