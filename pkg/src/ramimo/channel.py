"""System configuration, geometric propagation model and candidate channel pools.

The candidate pool of one propagation realization is an array of shape
``(L, K*N_R, N_T)``: entry ``pool[v]`` is the network channel obtained when
every transmit antenna operates in mode ``v``. Mode indices are 0-based.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from ._validation import check_modes, check_pool
from .exceptions import ConfigError, ContractViolation


def _default_tx_shape(n_tx):
    n_v = max(d for d in range(1, int(np.sqrt(n_tx)) + 1) if n_tx % d == 0)
    return n_tx // n_v, n_v


@dataclass(frozen=True)
class SystemConfig:
    """Dimensions and power levels of the downlink.

    ``snr_db`` is ``rho / sigma_n^2`` with the received power ``rho`` fixed
    to one, so ``noise_power = 10**(-snr_db/10)``. Pilot power equals
    ``rho``. ``tx_shape`` is ``(horizontal, vertical)`` element counts of the
    planar transmit array.
    """

    n_tx: int = 8
    n_rx: int = 2
    n_users: int = 2
    n_rf: int = 4
    n_streams: int = 2
    n_modes: int = 10
    n_subcarriers: int = 1
    snr_db: float = 20.0
    pilot_power: float = 1.0
    tx_shape: tuple = None

    def __post_init__(self):
        for name in ("n_tx", "n_rx", "n_users", "n_rf", "n_streams", "n_modes", "n_subcarriers"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not self.total_streams <= self.n_rf <= self.n_tx:
            raise ConfigError(
                f"need N_s <= N_RF <= N_T, got {self.total_streams}, {self.n_rf}, {self.n_tx}"
            )
        if self.n_streams > self.n_rx:
            raise ConfigError("streams per user cannot exceed receive antennas")
        if not self.pilot_power > 0:
            raise ConfigError("pilot_power must be positive")
        shape = _default_tx_shape(self.n_tx) if self.tx_shape is None else tuple(self.tx_shape)
        if len(shape) != 2 or shape[0] * shape[1] != self.n_tx:
            raise ConfigError(f"tx_shape {shape} does not hold {self.n_tx} elements")
        object.__setattr__(self, "tx_shape", (int(shape[0]), int(shape[1])))

    @property
    def total_streams(self):
        return self.n_users * self.n_streams

    @property
    def received_power(self):
        return 1.0

    @property
    def noise_power(self):
        return 10.0 ** (-self.snr_db / 10.0)

    @property
    def n_pilots(self):
        return self.n_users * self.n_rx

    def with_snr(self, snr_db):
        return replace(self, snr_db=float(snr_db))


@dataclass(frozen=True)
class Geometry:
    """User placement ranges and the clustered path model."""

    distance: tuple = (50.0, 100.0)
    azimuth: tuple = (-60.0, 60.0)
    elevation: tuple = (-15.0, 15.0)
    n_paths: int = 8
    los_fraction: float = 0.75
    angular_spread: float = 5.0


@dataclass(frozen=True, eq=False)
class PathSet:
    """Propagation paths of every user, arrays of shape ``(K, P)``.

    Path 0 of each user is the line-of-sight path. ``gains`` have unit total
    expected power per user; angles are in degrees. ``rx_angle`` is the
    arrival angle at the user's linear array.
    """

    gains: np.ndarray
    azimuth: np.ndarray
    elevation: np.ndarray
    rx_angle: np.ndarray
    distance: np.ndarray
    geometry: Geometry = field(default_factory=Geometry)

    @property
    def los_azimuth(self):
        return self.azimuth[:, 0]


def sample_propagation(cfg, geometry=None, seed=None):
    """Draw one block-fading propagation realization for all users.

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    Scattered paths spread around the LOS direction and are clipped to the
    configured angular ranges.
    """
    geometry = Geometry() if geometry is None else geometry
    rng = np.random.default_rng(seed)
    k, p = cfg.n_users, geometry.n_paths
    if p < 1:
        raise ConfigError("need at least one path")

    distance = rng.uniform(*geometry.distance, size=k)
    los_az = rng.uniform(*geometry.azimuth, size=k)
    los_el = rng.uniform(*geometry.elevation, size=k)
    los_rx = rng.uniform(-180.0, 180.0, size=k)

    spread = geometry.angular_spread
    az = np.empty((k, p))
    el = np.empty((k, p))
    rx = np.empty((k, p))
    az[:, 0], el[:, 0], rx[:, 0] = los_az, los_el, los_rx
    az[:, 1:] = np.clip(los_az[:, None] + spread * rng.standard_normal((k, p - 1)), *geometry.azimuth)
    el[:, 1:] = np.clip(los_el[:, None] + spread * rng.standard_normal((k, p - 1)), *geometry.elevation)
    rx[:, 1:] = los_rx[:, None] + spread * rng.standard_normal((k, p - 1))

    gains = np.empty((k, p), dtype=np.complex128)
    los_power = geometry.los_fraction if p > 1 else 1.0
    gains[:, 0] = np.sqrt(los_power) * np.exp(2j * np.pi * rng.uniform(size=k))
    if p > 1:
        var = (1.0 - los_power) / (p - 1)
        gains[:, 1:] = np.sqrt(var / 2) * (
            rng.standard_normal((k, p - 1)) + 1j * rng.standard_normal((k, p - 1))
        )
    return PathSet(gains=gains, azimuth=az, elevation=el, rx_angle=rx, distance=distance,
                   geometry=geometry)


def tx_steering(azimuth, elevation, tx_shape):
    """Half-wavelength planar-array response, shape ``azimuth.shape + (N_T,)``.

    Element ``n_t = v * n_h + h`` sits at horizontal index ``h`` and vertical
    index ``v``.
    """
    n_h, n_v = tx_shape
    az = np.deg2rad(np.asarray(azimuth, dtype=float))[..., None]
    el = np.deg2rad(np.asarray(elevation, dtype=float))[..., None]
    h = np.tile(np.arange(n_h), n_v)
    v = np.repeat(np.arange(n_v), n_h)
    return np.exp(1j * np.pi * (h * np.sin(az) * np.cos(el) + v * np.sin(el)))


def rx_steering(angle, n_rx):
    """Half-wavelength uniform linear array response, shape ``angle.shape + (N_R,)``."""
    a = np.deg2rad(np.asarray(angle, dtype=float))[..., None]
    return np.exp(1j * np.pi * np.arange(n_rx) * np.sin(a))


def mean_pattern_gain(patterns, geometry=None):
    """Average gain over modes and the user angular ranges.

    Used as the power normalization of the candidate pool so that the
    per-entry channel power averaged over modes is one.
    """
    geometry = Geometry() if geometry is None else geometry
    key = ("mean_gain", tuple(geometry.azimuth), tuple(geometry.elevation))
    cache = patterns._cache
    if key not in cache:
        az = np.linspace(*geometry.azimuth, 1201)
        el = np.linspace(*geometry.elevation, 61)
        grid_az, grid_el = np.meshgrid(az, el, indexing="ij")
        cache[key] = float(patterns.gain(grid_az, grid_el).mean())
    return cache[key]


def build_candidate_pool(paths, patterns, cfg):
    """Per-mode full-array channels for one propagation realization.

    Entry ``(v, k*N_R + r, t)`` is
    ``sum_p alpha_p sqrt(g_v(theta_p, phi_p)) a_T(theta_p, phi_p)[t] a_R(psi_p)[r]``
    scaled by the pool power normalization.
    """
    if patterns.n_modes != cfg.n_modes:
        raise ContractViolation(f"pattern set has {patterns.n_modes} modes, config {cfg.n_modes}")
    if paths.gains.shape[0] != cfg.n_users:
        raise ContractViolation("path set user count does not match config")
    amp = np.sqrt(patterns.gain(paths.azimuth, paths.elevation))  # (K, P, L)
    a_t = tx_steering(paths.azimuth, paths.elevation, cfg.tx_shape)  # (K, P, N_T)
    a_r = rx_steering(paths.rx_angle, cfg.n_rx)  # (K, P, N_R)
    pool = np.einsum("kp,kpl,kpr,kpt->lkrt", paths.gains, amp, a_r, a_t)
    pool /= np.sqrt(mean_pattern_gain(patterns, paths.geometry))
    return pool.reshape(cfg.n_modes, cfg.n_users * cfg.n_rx, cfg.n_tx)


def modes_to_selection(modes, n_modes):
    """0/1 selection matrix ``W`` of shape ``(N_T, L)`` for a mode vector."""
    modes = check_modes(modes, n_modes)
    w = np.zeros((modes.size, n_modes), dtype=np.int8)
    w[np.arange(modes.size), modes] = 1
    return w


def selection_to_modes(selection):
    """Mode vector of a selection matrix; every row must contain a single one."""
    w = np.asarray(selection)
    if w.ndim != 2:
        raise ContractViolation("selection matrix must be 2-D")
    if not np.all((w == 0) | (w == 1)) or not np.all(w.sum(axis=1) == 1):
        raise ContractViolation("each row of the selection matrix must contain exactly one 1")
    return np.argmax(w, axis=1).astype(np.intp)


def compose_channel(pool, assignment):
    """Network channel ``H[W] = sum_v H_c[v] Diag(W_v)``.

    ``assignment`` is a mode vector of length ``N_T`` or a selection matrix
    of shape ``(N_T, L)``. Column ``t`` of the result is column ``t`` of
    ``pool[mu_t]``.
    """
    pool = np.asarray(pool)
    n_modes, _, n_tx = pool.shape
    a = np.asarray(assignment)
    if a.ndim == 2:
        if a.shape != (n_tx, n_modes):
            raise ContractViolation(f"selection matrix must have shape {(n_tx, n_modes)}")
        modes = selection_to_modes(a)
    else:
        modes = check_modes(a, n_modes, n_tx)
    return pool[modes, :, np.arange(n_tx)].T


def compose_channels(pool, modes_batch):
    """Vectorized :func:`compose_channel` for a batch ``(B, N_T)`` of mode vectors."""
    pool = np.asarray(pool)
    modes_batch = np.asarray(modes_batch, dtype=np.intp)
    n_tx = pool.shape[2]
    out = pool[modes_batch, :, np.arange(n_tx)[None, :]]  # (B, N_T, K*N_R)
    return np.swapaxes(out, -1, -2)


def user_block(h, k, cfg):
    """Rows of user ``k`` (0-based) of a network channel, shape ``(..., N_R, N_T)``."""
    if not 0 <= k < cfg.n_users:
        raise ContractViolation(f"user index {k} outside [0, {cfg.n_users})")
    h = np.asarray(h)
    return h[..., k * cfg.n_rx:(k + 1) * cfg.n_rx, :]


def user_channels(pool, cfg):
    """Split a pool ``(L, K*N_R, N_T)`` into per-user pools ``(K, L, N_R, N_T)``."""
    pool = check_pool(pool, cfg)
    return np.moveaxis(pool.reshape(cfg.n_modes, cfg.n_users, cfg.n_rx, cfg.n_tx), 1, 0)


def write_pool_csv(pools, fh):
    """Dump pools as ``trial, mode, row, col, re, im`` rows.

    ``pools`` is a sequence of candidate pools indexed by trial.
    """
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["trial", "mode", "row", "col", "re", "im"])
    for trial, pool in enumerate(pools):
        pool = np.asarray(pool)
        for idx in np.ndindex(pool.shape):
            z = pool[idx]
            writer.writerow([trial, *idx, repr(float(z.real)), repr(float(z.imag))])
