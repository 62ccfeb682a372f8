"""Dense complex linear-algebra kernels with checked contracts.

All routines accept stacked inputs (leading batch axes) unless noted, and
are pure functions.
"""

import numpy as np

from ._validation import check_complex_array, check_square
from .exceptions import ContractViolation, SingularMatrixError

HERMITIAN_RTOL = 1e-10
NULL_RTOL = 1e-10
LOGDET_SLACK = 1e-9


def _fro(a):
    return np.linalg.norm(a, axis=(-2, -1))


def hermitian_eig(a):
    """Eigen-decomposition of a Hermitian matrix.

    Returns
    -------
    w : ndarray
        Real eigenvalues in ascending order.
    v : ndarray
        Unitary matrix whose columns are the eigenvectors.
    """
    a = check_square(check_complex_array(a, ndim=2, name="a", allow_batch=True))
    asym = _fro(a - np.conj(np.swapaxes(a, -1, -2)))
    if np.any(asym > HERMITIAN_RTOL * np.maximum(_fro(a), np.finfo(float).tiny)):
        raise ContractViolation("matrix is not Hermitian")
    return np.linalg.eigh(a)


def svd(a, full_matrices=False):
    """Singular value decomposition ``a = U @ diag(s) @ V^H``.

    Unlike :func:`numpy.linalg.svd` this returns ``V`` (not ``V^H``).
    Singular values are non-negative and descending.
    """
    a = check_complex_array(a, ndim=2, name="a", allow_batch=True)
    u, s, vh = np.linalg.svd(a, full_matrices=full_matrices)
    return u, s, np.conj(np.swapaxes(vh, -1, -2))


def null_space(a, rtol=NULL_RTOL):
    """Orthonormal basis of the right null space of a single matrix.

    Right singular vectors whose singular value is at most
    ``rtol * s_max`` are counted as null directions.
    """
    a = check_complex_array(a, ndim=2, name="a")
    n = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n, dtype=np.complex128)
    _, s, v = svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    rank = int(np.count_nonzero(s > rtol * smax)) if smax > 0 else 0
    return v[:, rank:]


def solve_hermitian_psd(a, b):
    """Solve ``a @ x = b`` for Hermitian positive definite ``a``.

    The caller is expected to have applied any diagonal loading already.
    Raises :class:`SingularMatrixError` when the Cholesky factorization
    fails or ``a`` is numerically singular.
    """
    a = check_square(check_complex_array(a, ndim=2, name="a", allow_batch=True))
    b = check_complex_array(b, name="b")
    vector = b.ndim == a.ndim - 1
    if vector:
        b = b[..., None]
    cond = np.linalg.cond(a)
    if np.any(~np.isfinite(cond)) or np.any(cond > 1.0 / np.finfo(float).eps):
        raise SingularMatrixError("matrix is singular to working precision", float(np.max(cond)))
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        raise SingularMatrixError("matrix is not positive definite", float(np.max(cond))) from None
    y = np.linalg.solve(chol, b)
    x = np.linalg.solve(np.conj(np.swapaxes(chol, -1, -2)), y)
    return x[..., 0] if vector else x


def log2_det_psd(a):
    """``log2 det(a)`` for ``a = I + (positive semi-definite)``.

    Computed from the eigenvalues, so the result is never negative.
    """
    w, _ = hermitian_eig(a)
    if np.any(w < 1.0 - LOGDET_SLACK):
        raise ContractViolation(f"eigenvalue {w.min():.3e} < 1: argument is not I + PSD")
    return np.sum(np.log2(np.maximum(w, 1.0)), axis=-1)


def project_psd(a):
    """Hermitian-symmetrize ``a`` and clip negative eigenvalues to zero."""
    a = np.asarray(a, dtype=np.complex128)
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    w, v = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    return (v * w[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))
