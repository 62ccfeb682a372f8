"""Fixed analog precoder, BD/RBD digital precoders and the sum spectral efficiency.

Channels are network matrices of shape ``(..., K*N_R, N_T)``; leading axes
are batch axes. Equal power per stream; the power constraint
``||F_RF F_BB||_F^2 = N_s`` is enforced with one global scalar.
"""

from dataclasses import dataclass

import numpy as np

from . import numerics
from ._validation import check_complex_array
from .exceptions import ConfigError, ContractViolation, InfeasibleError


@dataclass(frozen=True, eq=False)
class PrecoderPair:
    """Analog ``f_rf`` (N_T x N_RF) and digital ``f_bb`` (..., N_RF x N_s) precoders."""

    f_rf: np.ndarray
    f_bb: np.ndarray
    n_streams: int

    def user_block(self, k):
        return self.f_bb[..., k * self.n_streams:(k + 1) * self.n_streams]

    @property
    def transmit_matrix(self):
        return self.f_rf @ self.f_bb


def fixed_rf_precoder(cfg):
    """Block-connected analog precoder without phase shifters.

    RF chain ``j`` drives ``N_T/N_RF`` consecutive antennas with weight
    ``1/sqrt(N_T/N_RF)``, so the columns are orthonormal.
    """
    if cfg.n_tx % cfg.n_rf:
        raise ConfigError(f"N_RF={cfg.n_rf} does not divide N_T={cfg.n_tx}")
    per_chain = cfg.n_tx // cfg.n_rf
    f_rf = np.zeros((cfg.n_tx, cfg.n_rf), dtype=np.complex128)
    for j in range(cfg.n_rf):
        f_rf[j * per_chain:(j + 1) * per_chain, j] = 1.0 / np.sqrt(per_chain)
    return f_rf


def normalize_power(pre, cfg):
    """Rescale ``f_bb`` so that ``||F_RF F_BB||_F^2 = N_s`` (per batch item)."""
    norm = np.linalg.norm(pre.f_rf @ pre.f_bb, axis=(-2, -1))
    if np.any(norm == 0):
        raise ContractViolation("digital precoder is zero; cannot normalize power")
    scale = np.sqrt(cfg.total_streams) / norm
    return PrecoderPair(pre.f_rf, pre.f_bb * np.asarray(scale)[..., None, None], pre.n_streams)


def _user_rows(cfg, k):
    return slice(k * cfg.n_rx, (k + 1) * cfg.n_rx)


def _others(heff, cfg, k):
    rows = np.r_[0:k * cfg.n_rx, (k + 1) * cfg.n_rx:cfg.n_users * cfg.n_rx]
    return heff[..., rows, :]


def _top_right_vectors(a, n):
    _, _, vh = np.linalg.svd(a, full_matrices=True)
    return np.conj(np.swapaxes(vh[..., :n, :], -1, -2))


def _bd_single(h, f_rf, cfg):
    heff = h @ f_rf
    blocks = []
    for k in range(cfg.n_users):
        v0 = numerics.null_space(_others(heff, cfg, k))
        if v0.shape[1] < cfg.n_streams:
            raise InfeasibleError(
                f"user {k}: null space of the other users' channels has dimension "
                f"{v0.shape[1]} < {cfg.n_streams} streams",
                user=k,
            )
        v1 = _top_right_vectors(heff[_user_rows(cfg, k)] @ v0, cfg.n_streams)
        blocks.append(v0 @ v1)
    return np.concatenate(blocks, axis=1)


def bd_precoder(h, f_rf, cfg):
    """Block-diagonalization precoder.

    Each user's block lies in the null space of the other users' effective
    channels ``H_j F_RF`` and is aligned with the strongest right singular
    vectors of its own projected channel.

    Raises
    ------
    InfeasibleError
        When some user's null space is smaller than ``n_streams``.
    """
    h = check_complex_array(h, ndim=2, name="channel", allow_batch=True)
    batch = h.shape[:-2]
    f_bb = np.empty(batch + (cfg.n_rf, cfg.total_streams), dtype=np.complex128)
    for idx in np.ndindex(batch):
        f_bb[idx] = _bd_single(h[idx], f_rf, cfg)
    return normalize_power(PrecoderPair(f_rf, f_bb, cfg.n_streams), cfg)


def _rbd_second_stage(a, m, n):
    """Top ``n`` right singular vectors of ``a = H_k M_k``.

    When ``a`` has rank below ``n`` the missing streams are taken from its
    null space along the largest first-stage gain ``||M v||``, which keeps
    them in the other users' null space instead of an arbitrary direction.
    """
    v = _top_right_vectors(a, n)
    for idx in np.ndindex(a.shape[:-2]):
        s = np.linalg.svd(a[idx], compute_uv=False)
        rank = int(np.sum(s > numerics.NULL_RTOL * s[0])) if s[0] > 0 else 0
        if rank >= n:
            continue
        _, _, vh = np.linalg.svd(a[idx], full_matrices=True)
        null = np.conj(vh[rank:].T)
        gain = null.conj().T @ (m[idx].conj().T @ m[idx]) @ null
        _, w = numerics.hermitian_eig(0.5 * (gain + gain.conj().T))
        v[idx] = np.concatenate([np.conj(vh[:rank].T), null @ w[:, ::-1][:, :n - rank]], axis=1)
    return v


def rbd_precoder(h, f_rf, noise_power, cfg):
    """Regularized block diagonalization.

    First stage per user: ``M_k = V_k (S_k^2 + a I)^{-1/2}`` from the full
    SVD of the other users' effective channel, with loading
    ``a = N_s * noise_power / rho``. Second stage as in BD. Falls back to
    :func:`bd_precoder` for zero noise.
    """
    h = check_complex_array(h, ndim=2, name="channel", allow_batch=True)
    if noise_power <= 0:
        return bd_precoder(h, f_rf, cfg)
    alpha = cfg.total_streams * noise_power / cfg.received_power
    heff = h @ f_rf
    n_rf = cfg.n_rf
    blocks = []
    for k in range(cfg.n_users):
        hbar = _others(heff, cfg, k)
        if hbar.shape[-2] == 0:
            m = np.broadcast_to(np.eye(n_rf) / np.sqrt(alpha), heff.shape[:-2] + (n_rf, n_rf))
        else:
            _, s, vh = np.linalg.svd(hbar, full_matrices=True)
            s2 = np.zeros(s.shape[:-1] + (n_rf,))
            s2[..., :s.shape[-1]] = s**2
            m = np.conj(np.swapaxes(vh, -1, -2)) / np.sqrt(s2 + alpha)[..., None, :]
        v2 = _rbd_second_stage(heff[..., _user_rows(cfg, k), :] @ m, m, cfg.n_streams)
        blocks.append(m @ v2)
    f_bb = np.concatenate(blocks, axis=-1)
    return normalize_power(PrecoderPair(f_rf, f_bb, cfg.n_streams), cfg)


def sum_rate(h, pre, noise_power, cfg, rho=None):
    """Sum spectral efficiency in b/s/Hz, treating inter-user interference as noise.

    ``R = sum_k log2 det(I + (rho/N_s) C_k^{-1} H_k F_RF F_k F_k^H F_RF^H H_k^H)``
    where ``C_k`` holds the interference, scaled by ``rho/N_s`` like the
    signal, plus ``noise_power * I``.
    """
    if noise_power <= 0:
        raise ContractViolation("noise_power must be positive")
    rho = cfg.received_power if rho is None else rho
    h = np.asarray(h, dtype=np.complex128)
    scale = rho / cfg.total_streams
    t = h @ pre.f_rf @ pre.f_bb  # (..., K*N_R, N_s)
    eye = np.eye(cfg.n_rx)
    total = 0.0
    for k in range(cfg.n_users):
        tk = t[..., _user_rows(cfg, k), :]
        cols = slice(k * cfg.n_streams, (k + 1) * cfg.n_streams)
        signal = tk[..., cols]
        interf = np.delete(tk, np.r_[cols], axis=-1)
        cov = scale * interf @ np.conj(np.swapaxes(interf, -1, -2)) + noise_power * eye
        chol = np.linalg.cholesky(cov)
        white = np.linalg.solve(chol, signal)
        arg = eye + scale * white @ np.conj(np.swapaxes(white, -1, -2))
        total = total + numerics.log2_det_psd(0.5 * (arg + np.conj(np.swapaxes(arg, -1, -2))))
    return total


def interference_leakage(h, pre, cfg):
    """Largest relative leakage ``||H_j F_RF F_k|| / (||H_j F_RF|| ||F_k||)`` over ``j != k``."""
    heff = np.asarray(h) @ pre.f_rf
    worst = np.zeros(heff.shape[:-2])
    for j in range(cfg.n_users):
        hj = heff[..., _user_rows(cfg, j), :]
        nj = np.linalg.norm(hj, axis=(-2, -1))
        for k in range(cfg.n_users):
            if k == j:
                continue
            fk = pre.user_block(k)
            num = np.linalg.norm(hj @ fk, axis=(-2, -1))
            den = nj * np.linalg.norm(fk, axis=(-2, -1))
            ratio = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
            worst = np.maximum(worst, ratio)
    return worst
