"""Pilot-based channel estimation of trained modes and MMSE prediction of the rest.

Channel ensembles are arrays of shape ``(M, L, rows, N_T)``: ``M`` samples
(realizations or users), ``L`` modes, and one scalar link per
``(row, antenna)`` pair. A single pool ``(L, K*N_R, N_T)`` is the ``M = 1``
case without the leading axis. Correlations across modes are either shared
``(L, L)`` or per transmit antenna ``(N_T, L, L)``.
"""

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import numerics
from ._validation import check_complex_array, check_nonnegative, check_positive_int, check_subset
from .exceptions import BudgetExceededError, ConfigError, ContractViolation
from .patterns import COVERAGE_DEG, pattern_correlation, split_correlations, untrained_modes

SOURCES = ("empirical", "pattern")


# -- pilots and least squares ------------------------------------------------

def pilot_matrix(n_pilots, pilot_power=1.0):
    """Orthogonal unit-modulus pilots ``X`` (n_pilots x n_pilots), ``X X^H = T_p sigma_x^2 I``."""
    n = check_positive_int(n_pilots, "n_pilots")
    k = np.arange(n)
    return np.sqrt(pilot_power) * np.exp(-2j * np.pi * np.outer(k, k) / n)


@dataclass(frozen=True, eq=False)
class PilotBlock:
    """Uplink training observations.

    Attributes
    ----------
    pilots : ndarray, shape (K*N_R, T_p)
    received : ndarray, shape (F, N_T, T_p)
        One block per trained mode, all BS antennas in that mode.
    modes : ndarray, shape (F,)
    """

    pilots: np.ndarray
    received: np.ndarray
    modes: np.ndarray
    noise_power: float
    pilot_power: float

    @property
    def n_pilots(self):
        return self.pilots.shape[1]


def simulate_uplink_training(pool, trained, noise_power, pilot_power=1.0, seed=None):
    """Received pilot blocks ``Y(v) = H_c[v]^T X + Z`` for every trained mode.

    Noise is drawn for all ``L`` modes from ``seed`` and then subset, so a
    mode sees the same noise whichever plan it belongs to.
    """
    pool = check_complex_array(pool, ndim=3, name="candidate pool")
    n_modes, n_links, n_tx = pool.shape
    trained = check_subset(trained, n_modes)
    noise_power = check_nonnegative(noise_power, "noise_power")
    x = pilot_matrix(n_links, pilot_power)
    rng = np.random.default_rng(seed)
    noise = np.sqrt(noise_power / 2) * (
        rng.standard_normal((n_modes, n_tx, n_links)) + 1j * rng.standard_normal((n_modes, n_tx, n_links))
    )
    y = np.swapaxes(pool[trained], -1, -2) @ x + noise[trained]
    return PilotBlock(pilots=x, received=y, modes=trained, noise_power=noise_power,
                      pilot_power=float(pilot_power))


def ls_estimate(block):
    """Decorrelating estimate ``Y X^H / (T_p sigma_x^2)``, shape ``(F, K*N_R, N_T)``."""
    x = block.pilots
    h_t = block.received @ np.conj(x.T) / (block.n_pilots * block.pilot_power)
    return np.swapaxes(h_t, -1, -2)


def noise_ratio(noise_power, pilot_power=1.0, n_pilots=1):
    """Noise level of the LS estimate, ``sigma_n^2 / (T_p sigma_x^2)``."""
    return float(noise_power) / (n_pilots * float(pilot_power))


# -- linear MMSE filters -------------------------------------------------------

def _apply(g, obs, axis=0):
    """Apply filter ``g`` along the mode ``axis`` of ``obs``.

    ``g`` is ``(out, F)`` or per antenna ``(N_T, out, F)``; in the latter case
    the last axis of ``obs`` must index transmit antennas.
    """
    obs = np.moveaxis(np.asarray(obs), axis, 0)
    if g.ndim == 2:
        out = np.tensordot(g, obs, axes=(1, 0))
    else:
        if obs.ndim < 2 or obs.shape[-1] != g.shape[0]:
            raise ContractViolation("per-antenna correlation needs antennas on the last axis")
        out = np.einsum("tof,f...t->o...t", g, obs)
    return np.moveaxis(out, 0, axis)


def linear_filter(r_out, r_tt, q):
    """``r_out (r_tt + q I)^{-1}`` via a Hermitian solve.

    ``q == 0`` uses the pseudo-inverse so rank-deficient correlations work.
    """
    r_tt = np.asarray(r_tt, dtype=np.complex128)
    r_out = np.asarray(r_out, dtype=np.complex128)
    if r_out.shape[-2] == 0:
        return np.zeros(r_out.shape, dtype=np.complex128)
    if q == 0:
        return r_out @ np.linalg.pinv(r_tt, rcond=1e-10, hermitian=True)
    loaded = r_tt + q * np.eye(r_tt.shape[-1])
    gh = numerics.solve_hermitian_psd(loaded, np.conj(np.swapaxes(r_out, -1, -2)))
    return np.conj(np.swapaxes(gh, -1, -2))


def mmse_estimate(h_tilde, r_hh, q):
    """MMSE estimate of the trained modes, ``R (R + q I)^{-1} h_tilde``.

    ``h_tilde`` has the mode axis first, ``(F, ...links)``; ``q`` is the LS
    noise ratio (see :func:`noise_ratio`). With ``q == 0`` the observation
    is returned unchanged.
    """
    h_tilde = np.asarray(h_tilde, dtype=np.complex128)
    if check_nonnegative(q, "q") == 0:
        return h_tilde.copy()
    return _apply(linear_filter(r_hh, r_hh, q), h_tilde)


@dataclass(frozen=True, eq=False)
class CorrelationSet:
    """Mode correlations split by a training plan.

    ``r_tt`` is the trained-mode autocorrelation, ``r_ut`` the
    untrained-versus-trained cross-correlation; ``full`` is the unsplit matrix.
    """

    r_tt: np.ndarray
    r_ut: np.ndarray
    trained: np.ndarray
    source: str
    full: np.ndarray = None

    @property
    def untrained(self):
        return untrained_modes(self.trained, self.full.shape[-1])


def predict_untrained(h_tilde, corr, q):
    """MMSE prediction ``R_ut (R_tt + q I)^{-1} h_tilde`` of the untrained modes.

    ``h_tilde`` holds LS observations of the trained modes, mode axis first.
    """
    h_tilde = np.asarray(h_tilde, dtype=np.complex128)
    f = corr.r_tt.shape[-1]
    if h_tilde.shape[0] != f:
        raise ContractViolation(f"observation has {h_tilde.shape[0]} modes, correlation {f}")
    return _apply(linear_filter(corr.r_ut, corr.r_tt, check_nonnegative(q, "q")), h_tilde)


def mode_filter(full, trained, q):
    """Filter ``R[:, S] (R[S, S] + q I)^{-1}`` mapping trained observations to all ``L`` modes.

    Without noise the trained rows are the identity: observations are exact.
    """
    full = np.asarray(full)
    trained = check_subset(trained, full.shape[-1])
    r_tt = full[..., trained[:, None], trained[None, :]]
    r_all = full[..., :, trained]
    g = linear_filter(r_all, r_tt, q)
    if q == 0:
        g[..., trained, :] = np.eye(trained.size)
    return g


def estimate_all_modes(h_tilde_all, full, trained, q):
    """Estimated channels of all ``L`` modes from LS observations of the trained modes.

    ``h_tilde_all`` holds LS observations with all ``L`` modes on the first
    mode axis (``(..., L, rows, N_T)``); only the ``trained`` ones are used.
    Trained rows equal :func:`mmse_estimate`, the others
    :func:`predict_untrained`.
    """
    g = mode_filter(full, trained, q)
    obs = np.take(np.asarray(h_tilde_all), np.asarray(trained), axis=-3)
    return _apply(g, obs, axis=-3)


# -- correlations ----------------------------------------------------------------

def channel_correlation(ensemble, min_size=100):
    """Per-antenna sample correlation across modes, shape ``(N_T, L, L)``.

    Averages ``h(mu) h(nu)^*`` over samples and receive links, symmetrizes
    and clips negative eigenvalues.
    """
    ens = check_complex_array(ensemble, ndim=4, name="ensemble")
    if ens.shape[0] < min_size:
        raise ContractViolation(f"ensemble has {ens.shape[0]} samples, need at least {min_size}")
    n = ens.shape[0] * ens.shape[2]
    r = np.einsum("mlrt,mkrt->tlk", ens, np.conj(ens)) / n
    return numerics.project_psd(r)


def calibrate_channel_correlation(ensemble, trained, min_size=100):
    """Empirical :class:`CorrelationSet` for a given set of trained modes."""
    full = channel_correlation(ensemble, min_size)
    r_tt, r_ut = split_correlations(full, trained)
    return CorrelationSet(r_tt, r_ut, check_subset(trained, full.shape[-1]), "empirical", full)


def pattern_correlation_set(patterns, trained):
    """:class:`CorrelationSet` built from the radiation-pattern Gram matrix."""
    full = pattern_correlation(patterns)
    r_tt, r_ut = split_correlations(full, trained)
    return CorrelationSet(r_tt, r_ut, check_subset(trained, full.shape[-1]), "pattern", full)


# -- error measures --------------------------------------------------------------

def _link_power(h_true, axis):
    p = np.sum(np.abs(h_true) ** 2, axis=axis)
    if np.any(p == 0):
        raise ContractViolation("true channel of some link is zero; normalized MSE undefined")
    return p


def estimation_mse(h_hat, h_true, axis=0):
    """Normalized MSE ``||h - h_hat||^2 / ||h||^2`` per link, averaged over links.

    ``axis`` is the mode axis; every other axis indexes links or samples.
    """
    h_hat = np.asarray(h_hat)
    h_true = np.asarray(h_true)
    if h_hat.shape != h_true.shape:
        raise ContractViolation(f"shape mismatch {h_hat.shape} vs {h_true.shape}")
    err = np.sum(np.abs(h_true - h_hat) ** 2, axis=axis)
    return float(np.mean(err / _link_power(h_true, axis)))


def estimation_mse_components(h_hat, h_true, trained, axis=0):
    """Split the normalized MSE into trained and predicted parts.

    Both parts use the all-mode link power as denominator, so they add up to
    :func:`estimation_mse`.
    """
    h_hat = np.moveaxis(np.asarray(h_hat), axis, 0)
    h_true = np.moveaxis(np.asarray(h_true), axis, 0)
    power = _link_power(h_true, 0)
    err = np.abs(h_true - h_hat) ** 2
    trained = np.asarray(trained)
    untrained = untrained_modes(trained, h_true.shape[0])
    part_t = float(np.mean(err[trained].sum(axis=0) / power))
    part_u = float(np.mean(err[untrained].sum(axis=0) / power))
    return part_t + part_u, part_t, part_u


def subset_mse(channels, full, subset, q, observations=None):
    """Per-sample normalized MSE of one training subset.

    With ``observations`` (LS estimates of all modes, same shape as
    ``channels``) the realized error is returned; otherwise its expectation
    over the pilot noise, ``(||G h_S - h||^2 + q ||G||_F^2) / ||h||^2``.
    Returns an array of shape ``(M,)``.
    """
    g = mode_filter(full, subset, q)
    obs = channels if observations is None else observations
    est = _apply(g, np.take(obs, subset, axis=1), axis=1)
    err = np.sum(np.abs(est - channels) ** 2, axis=1)  # (M, rows, N_T)
    if observations is None and q > 0:
        noise = q * np.sum(np.abs(g) ** 2, axis=(-2, -1))
        err = err + noise  # broadcasts over the antenna axis
    return np.mean(err / _link_power(channels, 1), axis=(1, 2))


def _subsets(n_modes, n_train, budget):
    n_train = check_positive_int(n_train, "n_train")
    if n_train > n_modes:
        raise ContractViolation(f"cannot train {n_train} of {n_modes} modes")
    count = math.comb(n_modes, n_train)
    if count > budget:
        raise BudgetExceededError(
            f"C({n_modes},{n_train}) = {count} subsets exceed budget {budget}; "
            "use select_training_modes_offline"
        )
    return list(itertools.combinations(range(n_modes), n_train))


def subset_mse_table(channels, full, n_train, q, observations=None, budget=10**4):
    """MSE of every ``C(L, F)`` subset, in lexicographic order.

    Returns ``(subsets, table)`` with ``table`` of shape ``(n_subsets, M)``.
    """
    channels = check_complex_array(channels, ndim=4, name="channels")
    subsets = _subsets(channels.shape[1], n_train, budget)
    table = np.stack([subset_mse(channels, full, np.array(s), q, observations) for s in subsets])
    return subsets, table


# -- training plans --------------------------------------------------------------

@dataclass(frozen=True)
class TrainingPlan:
    """Trained modes per azimuth sector.

    ``sectors`` is a tuple of ``((low_deg, high_deg), modes)`` entries. An
    unsectorized plan has one sector spanning the whole coverage.
    """

    n_modes: int
    sectors: tuple

    def __post_init__(self):
        if not self.sectors:
            raise ContractViolation("plan needs at least one sector")
        for _, modes in self.sectors:
            check_subset(list(modes), self.n_modes)

    @classmethod
    def single(cls, modes, n_modes, coverage=COVERAGE_DEG):
        return cls(n_modes, (((float(coverage[0]), float(coverage[1])), tuple(int(m) for m in modes)),))

    @property
    def n_sectors(self):
        return len(self.sectors)

    @property
    def trained(self):
        """Trained modes of an unsectorized plan."""
        if self.n_sectors != 1:
            raise ContractViolation("plan is sectorized; use modes_for(azimuth)")
        return np.array(self.sectors[0][1], dtype=np.intp)

    def sector_index(self, azimuth):
        """Sector of each azimuth; values outside the coverage go to the edge sectors."""
        edges = np.array([lo for (lo, _), _ in self.sectors] + [self.sectors[-1][0][1]])
        idx = np.searchsorted(edges, np.asarray(azimuth, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_sectors - 1)

    def modes_for(self, azimuth):
        """Trained modes of the sector containing ``azimuth`` (clipped to the coverage)."""
        return np.array(self.sectors[int(self.sector_index(azimuth))][1], dtype=np.intp)

    def to_dict(self):
        return {
            "n_modes": self.n_modes,
            "sectors": [{"low": lo, "high": hi, "modes": list(modes)} for (lo, hi), modes in self.sectors],
        }

    @classmethod
    def from_dict(cls, data):
        sectors = tuple(((float(s["low"]), float(s["high"])), tuple(int(m) for m in s["modes"]))
                        for s in data["sectors"])
        return cls(int(data["n_modes"]), sectors)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _resolve_correlation(channels, correlation, patterns):
    if correlation is None or (isinstance(correlation, str) and correlation == "empirical"):
        return channel_correlation(channels, min_size=1)
    if isinstance(correlation, str) and correlation == "pattern":
        if patterns is None:
            raise ConfigError("pattern correlation needs a PatternSet")
        return pattern_correlation(patterns)
    if isinstance(correlation, str):
        raise ConfigError(f"unknown correlation source {correlation!r}")
    return np.asarray(correlation)


def sector_edges(n_sectors, coverage=COVERAGE_DEG):
    n_sectors = check_positive_int(n_sectors, "n_sectors")
    return np.linspace(coverage[0], coverage[1], n_sectors + 1)


def assign_sectors(azimuth, n_sectors, coverage=COVERAGE_DEG):
    """Sector index of each azimuth; values outside the coverage go to the edge sectors."""
    edges = sector_edges(n_sectors, coverage)
    idx = np.searchsorted(edges, np.asarray(azimuth, dtype=float), side="right") - 1
    return np.clip(idx, 0, n_sectors - 1)


def sector_correlations(channels, azimuth, n_sectors, coverage=COVERAGE_DEG, min_size=1):
    """Empirical per-antenna mode correlation of each sector, ``(N_sec, N_T, L, L)``."""
    channels = check_complex_array(channels, ndim=4, name="channels")
    idx = assign_sectors(azimuth, n_sectors, coverage)
    out = []
    for s in range(n_sectors):
        members = idx == s
        if not np.any(members):
            raise ContractViolation(
                f"no calibration samples in sector {s}; enlarge the calibration ensemble"
            )
        out.append(channel_correlation(channels[members], min_size))
    return np.stack(out)


def select_training_modes_exhaustive(n_train, channels, noise_power, pilot_power=1.0, n_pilots=1,
                                     correlation=None, patterns=None, budget=10**4,
                                     observations=None, coverage=COVERAGE_DEG):
    """Training subset with the smallest average MSE over ``channels``.

    Parameters
    ----------
    n_train : int
        Number of trained modes ``F``.
    channels : ndarray, shape (M, L, rows, N_T)
        Calibration ensemble with true channels.
    correlation : None, "empirical", "pattern" or ndarray
        Mode correlation used by the estimator. ``None`` estimates it from
        ``channels``.
    observations : ndarray, optional
        Realized LS observations; when omitted the MSE is averaged over the
        pilot noise analytically.

    Ties go to the lexicographically smallest subset.
    """
    channels = check_complex_array(channels, ndim=4, name="channels")
    full = _resolve_correlation(channels, correlation, patterns)
    q = noise_ratio(noise_power, pilot_power, n_pilots)
    subsets, table = subset_mse_table(channels, full, n_train, q, observations, budget)
    best = int(np.argmin(table.mean(axis=1)))
    return TrainingPlan.single(subsets[best], channels.shape[1], coverage)


def select_training_modes_offline(n_train, n_sectors, channels, azimuth, noise_power, pilot_power=1.0,
                                  n_pilots=1, correlation="sector", patterns=None, budget=10**4,
                                  coverage=COVERAGE_DEG):
    """Sectorized training plan computed offline.

    The azimuth coverage is split into ``n_sectors`` equal sectors; each
    sector gets the subset with the smallest expected MSE over the
    calibration samples whose LOS azimuth lies in it.

    ``correlation`` selects the statistics the estimator will use:
    ``"sector"`` (empirical, calibrated per sector), ``"empirical"`` (one
    correlation from the whole ensemble), ``"pattern"``, or an explicit
    array, optionally with a leading sector axis.
    """
    channels = check_complex_array(channels, ndim=4, name="channels")
    azimuth = np.asarray(azimuth, dtype=float)
    if azimuth.shape != (channels.shape[0],):
        raise ContractViolation("need one LOS azimuth per calibration sample")
    if isinstance(correlation, str) and correlation == "sector":
        per_sector = sector_correlations(channels, azimuth, n_sectors, coverage)
    else:
        full = _resolve_correlation(channels, correlation, patterns)
        per_sector = full if full.ndim == 4 else np.broadcast_to(full, (n_sectors,) + full.shape)
    q = noise_ratio(noise_power, pilot_power, n_pilots)
    edges = sector_edges(n_sectors, coverage)
    idx = assign_sectors(azimuth, n_sectors, coverage)
    sectors = []
    for s in range(n_sectors):
        members = idx == s
        if not np.any(members):
            raise ContractViolation(
                f"no calibration samples in sector {s} [{edges[s]:g}, {edges[s + 1]:g}); "
                "enlarge the calibration ensemble"
            )
        subsets, table = subset_mse_table(channels[members], per_sector[s], n_train, q, budget=budget)
        best = int(np.argmin(table.mean(axis=1)))
        sectors.append(((float(edges[s]), float(edges[s + 1])), subsets[best]))
    return TrainingPlan(channels.shape[1], tuple(sectors))


# -- estimators --------------------------------------------------------------------

class MMSEChannelEstimator(BaseEstimator):
    """Estimate trained modes and predict the untrained ones.

    Parameters
    ----------
    trained_modes : sequence of int
        0-based indices of the trained modes.
    noise_ratio : float
        LS noise level ``sigma_n^2 / (T_p sigma_x^2)``.
    source : {"empirical", "pattern"}
        Mode correlation learned from an ensemble of true channels, or taken
        from the radiation patterns.
    patterns : PatternSet, optional
        Required for ``source="pattern"``.
    min_ensemble : int
        Smallest calibration ensemble accepted by ``fit``.
    """

    def __init__(self, trained_modes=(0,), noise_ratio=0.0, source="empirical", patterns=None,
                 min_ensemble=100):
        self.trained_modes = trained_modes
        self.noise_ratio = noise_ratio
        self.source = source
        self.patterns = patterns
        self.min_ensemble = min_ensemble

    def fit(self, X=None, y=None):
        """Learn the mode correlation from channels ``X`` of shape ``(M, L, rows, N_T)``."""
        if self.source == "empirical":
            if X is None:
                raise ConfigError("empirical correlation needs a calibration ensemble")
            self.correlation_ = channel_correlation(X, self.min_ensemble)
        elif self.source == "pattern":
            if self.patterns is None:
                raise ConfigError("pattern correlation needs a PatternSet")
            self.correlation_ = pattern_correlation(self.patterns)
        else:
            raise ConfigError(f"unknown source {self.source!r}; expected one of {SOURCES}")
        self.trained_ = check_subset(list(self.trained_modes), self.correlation_.shape[-1])
        self.filter_ = mode_filter(self.correlation_, self.trained_, self.noise_ratio)
        return self

    def predict(self, X):
        """All-mode estimates from LS observations ``(F, rows, N_T)`` of the trained modes."""
        check_is_fitted(self, "filter_")
        X = check_complex_array(X, name="observations")
        if X.shape[-3] != self.trained_.size:
            raise ContractViolation(f"expected {self.trained_.size} trained modes on axis -3")
        return _apply(self.filter_, X, axis=-3)

    def score(self, X, y):
        """Negative normalized MSE of ``predict(X)`` against true channels ``y``."""
        return -estimation_mse(self.predict(X), y, axis=-3)


class TrainingModeSelector(BaseEstimator):
    """Choose which modes to train, optionally per azimuth sector.

    Parameters
    ----------
    n_train : int
    n_sectors : int
        ``1`` gives plain exhaustive selection over the whole ensemble.
    noise_power, pilot_power : float
    n_pilots : int
        Pilot length ``T_p`` entering the LS noise ratio.
    source : {"sector", "empirical", "pattern"}
        Correlation the downstream estimator uses: calibrated per sector,
        calibrated on the whole ensemble, or the pattern Gram matrix.
    patterns : PatternSet, optional
    budget : int
        Largest number of subsets evaluated.

    Attributes
    ----------
    plan_ : TrainingPlan
    correlation_ : ndarray
        ``(N_sec, N_T, L, L)`` for ``source="sector"``, otherwise the shared
        correlation.
    """

    def __init__(self, n_train=3, n_sectors=1, noise_power=0.01, pilot_power=1.0, n_pilots=1,
                 source="sector", patterns=None, budget=10**4, coverage=COVERAGE_DEG):
        self.n_train = n_train
        self.n_sectors = n_sectors
        self.noise_power = noise_power
        self.pilot_power = pilot_power
        self.n_pilots = n_pilots
        self.source = source
        self.patterns = patterns
        self.budget = budget
        self.coverage = coverage

    def fit(self, X, azimuth=None):
        """Select modes from true channels ``X`` ``(M, L, rows, N_T)`` and their LOS azimuths."""
        X = check_complex_array(X, ndim=4, name="channels")
        if self.source not in SOURCES + ("sector",):
            raise ConfigError(f"unknown source {self.source!r}")
        if azimuth is None:
            if self.n_sectors != 1:
                raise ConfigError("sectorized selection needs the LOS azimuth of every sample")
            azimuth = np.zeros(X.shape[0])
        if self.source == "sector":
            self.correlation_ = sector_correlations(X, azimuth, self.n_sectors, self.coverage)
        else:
            self.correlation_ = _resolve_correlation(X, self.source, self.patterns)
        self.plan_ = select_training_modes_offline(
            self.n_train, self.n_sectors, X, azimuth, noise_power=self.noise_power,
            pilot_power=self.pilot_power, n_pilots=self.n_pilots, correlation=self.correlation_,
            budget=self.budget, coverage=self.coverage,
        )
        return self

    def predict(self, azimuth):
        """Trained modes for each LOS azimuth, shape ``(M, F)``."""
        check_is_fitted(self, "plan_")
        az = np.atleast_1d(np.asarray(azimuth, dtype=float))
        return np.stack([self.plan_.modes_for(a) for a in az])
