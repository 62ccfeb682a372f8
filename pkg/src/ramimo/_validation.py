"""Input validation helpers shared by the estimators and functional API."""

import numbers

import numpy as np

from .exceptions import ContractViolation


def check_complex_array(a, ndim=None, name="array", allow_batch=False):
    """Convert ``a`` to a finite complex128 ndarray.

    ``ndim`` is the exact number of dimensions, or the minimum when
    ``allow_batch`` is set (leading axes are then treated as batch axes).
    """
    a = np.asarray(a)
    if a.dtype == object:
        raise ContractViolation(f"{name} must be numeric")
    a = a.astype(np.complex128, copy=False)
    if ndim is not None:
        if allow_batch and a.ndim < ndim:
            raise ContractViolation(f"{name} must have at least {ndim} dimensions, got {a.ndim}")
        if not allow_batch and a.ndim != ndim:
            raise ContractViolation(f"{name} must have {ndim} dimensions, got {a.ndim}")
    if not np.all(np.isfinite(a)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return a


def check_square(a, name="matrix"):
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ContractViolation(f"{name} must be square, got shape {a.shape}")
    return a


def check_pool(pool, cfg=None):
    """Validate a candidate pool array of shape ``(L, K*N_R, N_T)``."""
    pool = check_complex_array(pool, ndim=3, name="candidate pool")
    if cfg is not None:
        expected = (cfg.n_modes, cfg.n_users * cfg.n_rx, cfg.n_tx)
        if pool.shape != expected:
            raise ContractViolation(f"candidate pool shape {pool.shape} != {expected}")
    return pool


def check_modes(modes, n_modes, n_tx=None):
    """Validate a per-antenna mode vector with 0-based mode indices."""
    modes = np.asarray(modes)
    if modes.ndim != 1 or not np.issubdtype(modes.dtype, np.integer):
        raise ContractViolation("mode vector must be a 1-D integer array")
    if n_tx is not None and modes.shape[0] != n_tx:
        raise ContractViolation(f"mode vector has length {modes.shape[0]}, expected {n_tx}")
    if modes.size and (modes.min() < 0 or modes.max() >= n_modes):
        raise ContractViolation(f"mode indices must lie in [0, {n_modes})")
    return modes.astype(np.intp, copy=False)


def check_subset(indices, n_modes, name="trained modes"):
    """Validate a list of distinct 0-based mode indices."""
    idx = np.asarray(indices)
    if idx.ndim != 1 or idx.size == 0:
        raise ContractViolation(f"{name} must be a non-empty 1-D index list")
    if not np.issubdtype(idx.dtype, np.integer):
        raise ContractViolation(f"{name} must be integers")
    if idx.min() < 0 or idx.max() >= n_modes:
        raise ContractViolation(f"{name} out of range [0, {n_modes})")
    if np.unique(idx).size != idx.size:
        raise ContractViolation(f"{name} contain duplicates")
    return idx.astype(np.intp, copy=False)


def check_positive_int(value, name, minimum=1):
    if not isinstance(value, numbers.Integral) or isinstance(value, bool) or value < minimum:
        raise ContractViolation(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_nonnegative(value, name):
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ContractViolation(f"{name} must be finite and non-negative, got {value}")
    return value
