"""Pool of reconfigurable radiation patterns and their correlations."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._validation import check_positive_int, check_subset
from .exceptions import ContractViolation

COVERAGE_DEG = (-60.0, 60.0)


@dataclass(frozen=True, eq=False)
class AngularGrid:
    """Rectangular azimuth/elevation sampling grid, in degrees."""

    azimuth: np.ndarray
    elevation: np.ndarray

    def __post_init__(self):
        az = np.asarray(self.azimuth, dtype=float)
        el = np.asarray(self.elevation, dtype=float)
        if az.ndim != 1 or az.size < 64:
            raise ContractViolation("azimuth grid needs at least 64 samples")
        if el.ndim != 1 or el.size < 16:
            raise ContractViolation("elevation grid needs at least 16 samples")
        if np.any(np.diff(az) <= 0) or np.any(np.diff(el) <= 0):
            raise ContractViolation("grid samples must be strictly increasing")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @classmethod
    def uniform(cls, n_azimuth=181, n_elevation=31):
        return cls(np.linspace(-90.0, 90.0, n_azimuth), np.linspace(-30.0, 30.0, n_elevation))

    @property
    def shape(self):
        return self.azimuth.size, self.elevation.size

    def integrate(self, values):
        """Trapezoid-rule integral over the last two axes (radian measure)."""
        inner = np.trapezoid(values, np.deg2rad(self.elevation), axis=-1)
        return np.trapezoid(inner, np.deg2rad(self.azimuth), axis=-1)


@dataclass(frozen=True, eq=False)
class PatternSet:
    """``L`` sampled power-gain patterns with unit energy on ``grid``.

    Attributes
    ----------
    gains : ndarray, shape (L, n_azimuth, n_elevation)
        Non-negative power gains.
    centers : ndarray, shape (L,)
        Mainlobe azimuth of each mode, in degrees.
    """

    grid: AngularGrid
    gains: np.ndarray
    centers: np.ndarray
    beamwidth: float = 30.0
    exponent: float = 2.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_modes(self):
        return self.gains.shape[0]

    def gain(self, azimuth, elevation):
        """Interpolated gain of every mode at the given directions.

        Returns an array of shape ``azimuth.shape + (L,)``. Directions outside
        the grid are clipped to its boundary.
        """
        interp = self._cache.get("interp")
        if interp is None:
            interp = RegularGridInterpolator(
                (self.grid.azimuth, self.grid.elevation),
                np.moveaxis(self.gains, 0, -1),
                method="linear",
            )
            self._cache["interp"] = interp
        az = np.clip(np.asarray(azimuth, dtype=float), self.grid.azimuth[0], self.grid.azimuth[-1])
        el = np.clip(np.asarray(elevation, dtype=float), self.grid.elevation[0], self.grid.elevation[-1])
        az, el = np.broadcast_arrays(az, el)
        out = interp(np.stack([az.ravel(), el.ravel()], axis=-1))
        return np.clip(out, 0.0, None).reshape(az.shape + (self.n_modes,))

    def closest_mode(self, azimuth=0.0):
        return int(np.argmin(np.abs(self.centers - azimuth)))


def raised_cosine(azimuth, center, beamwidth, exponent):
    """Unnormalized mainlobe ``cos^q`` truncated at its first null."""
    offset = np.asarray(azimuth, dtype=float) - center
    arg = np.clip(offset * np.pi / (2.0 * beamwidth), -np.pi / 2, np.pi / 2)
    return np.where(np.abs(offset) < beamwidth, np.cos(arg) ** exponent, 0.0)


def generate_pattern_set(n_modes, grid=None, beamwidth=30.0, exponent=2.0, coverage=COVERAGE_DEG):
    """Build ``n_modes`` raised-cosine beams steered uniformly over ``coverage``.

    Each pattern is constant over elevation and scaled so that the grid
    integral of its squared gain equals one.
    """
    n_modes = check_positive_int(n_modes, "n_modes")
    if not beamwidth > 0:
        raise ContractViolation("beamwidth must be positive")
    grid = AngularGrid.uniform() if grid is None else grid
    lo, hi = coverage
    centers = np.array([0.5 * (lo + hi)]) if n_modes == 1 else np.linspace(lo, hi, n_modes)
    if n_modes > 1:
        step = np.min(np.diff(grid.azimuth))
        if (hi - lo) / (n_modes - 1) < step:
            raise ContractViolation(
                f"{n_modes} modes are finer than the {step:g} deg azimuth grid resolution"
            )
    shape = raised_cosine(grid.azimuth[None, :], centers[:, None], beamwidth, exponent)
    gains = np.repeat(shape[:, :, None], grid.elevation.size, axis=2)
    energy = grid.integrate(gains**2)
    if np.any(energy <= 0):
        raise ContractViolation("a pattern has no support on the grid; increase beamwidth")
    gains = gains / np.sqrt(energy)[:, None, None]
    return PatternSet(grid=grid, gains=gains, centers=centers, beamwidth=float(beamwidth),
                      exponent=float(exponent))


def pattern_correlation(patterns):
    """Gram matrix of the patterns under the grid inner product (L x L)."""
    g = patterns.gains
    prod = g[:, None, :, :] * g[None, :, :, :]
    corr = patterns.grid.integrate(prod)
    return 0.5 * (corr + corr.T)


def split_correlations(full, trained):
    """Split an ``L x L`` correlation into trained and untrained-vs-trained blocks.

    Returns
    -------
    r_tt : ndarray, shape (..., F, F)
        Rows and columns of the trained modes.
    r_ut : ndarray, shape (..., L - F, F)
        Untrained rows (ascending mode order) against trained columns.
    """
    full = np.asarray(full)
    n_modes = full.shape[-1]
    trained = check_subset(trained, n_modes)
    untrained = untrained_modes(trained, n_modes)
    r_tt = full[..., trained[:, None], trained[None, :]]
    r_ut = full[..., untrained[:, None], trained[None, :]]
    return r_tt, r_ut


def untrained_modes(trained, n_modes):
    mask = np.ones(n_modes, dtype=bool)
    mask[np.asarray(trained)] = False
    return np.flatnonzero(mask)


def write_patterns_csv(patterns, fh):
    """Write ``mode, azimuth, elevation, gain`` rows to an open text file."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["mode", "azimuth", "elevation", "gain"])
    az, el = patterns.grid.azimuth, patterns.grid.elevation
    for m in range(patterns.n_modes):
        for i, a in enumerate(az):
            for j, e in enumerate(el):
                writer.writerow([m, f"{a:.6g}", f"{e:.6g}", f"{patterns.gains[m, i, j]:.12g}"])
