"""
Small dense complex linear algebra used throughout the package.

Every log-determinant in the rate expressions goes through :func:`logdet`,
which factors the (shifted) Hermitian argument with a Cholesky
decomposition. Logarithms are natural, so all rates are in nats.
"""

import math

import numpy as np

from .errors import DimensionMismatch, NonPositiveDefinite

__all__ = [
    "as_matrix",
    "hermitian",
    "is_hermitian",
    "is_psd",
    "clamp_psd",
    "logdet",
    "sqrtm_psd",
    "inv_sqrtm",
    "whiten",
    "svd",
    "eigh",
    "quad",
]

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9


def as_matrix(x, name="matrix"):
    """Coerce scalars, vectors and nested lists to a 2-D complex array.

    A scalar becomes a 1x1 matrix. Non-finite entries are rejected.
    """
    a = np.asarray(x, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(-1, 1)
    elif a.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionMismatch(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def hermitian(M):
    """Return the Hermitian part ``(M + M^H) / 2``."""
    M = np.asarray(M, dtype=complex)
    return 0.5 * (M + M.conj().T)


def is_hermitian(M, tol=HERMITIAN_TOL):
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        return False
    scale = 1.0 + np.max(np.abs(M), initial=0.0)
    return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol * scale)


def is_psd(M, tol=PSD_TOL):
    """Hermitian with smallest eigenvalue >= -tol * (1 + largest)."""
    if not is_hermitian(M):
        return False
    w = np.linalg.eigvalsh(hermitian(M))
    return bool(w[0] >= -tol * (1.0 + max(w[-1], 0.0)))


def clamp_psd(M):
    """Symmetrize and clamp negative eigenvalues to zero."""
    w, Q = np.linalg.eigh(hermitian(M))
    if w[0] >= 0.0:
        return hermitian(M)
    w = np.maximum(w, 0.0)
    return hermitian((Q * w) @ Q.conj().T)


def logdet(M, shifted=True):
    """Natural log-determinant of ``I + M`` (``shifted``) or of ``M``.

    Parameters
    ----------
    M : (n, n) array_like
        Hermitian matrix. When ``shifted`` is False it must be strictly
        positive definite.
    shifted : bool
        Evaluate ``log|I + M|`` instead of ``log|M|``.

    Raises
    ------
    NonPositiveDefinite
        If the Cholesky factorization meets a non-positive pivot.
    """
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2:
        A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"logdet needs a square matrix, got {A.shape}")
    A = 0.5 * (A + A.conj().T)
    if shifted:
        A.flat[:: A.shape[0] + 1] += 1.0
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite("matrix is not positive definite") from exc
    d = L.diagonal().real
    if not d.min() > 0.0:
        # also catches NaN from non-finite input
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix has non-finite entries")
        raise NonPositiveDefinite("matrix is not positive definite")
    value = 2.0 * float(np.log(d).sum())
    if not math.isfinite(value):
        raise ValueError("matrix has non-finite entries")
    return value


def _hermitian_power(M, power):
    w, Q = np.linalg.eigh(hermitian(M))
    if power < 0 and w[0] <= 0.0:
        raise NonPositiveDefinite("inverse root of a singular matrix")
    w = np.maximum(w, 0.0) ** power
    return hermitian((Q * w) @ Q.conj().T)


def sqrtm_psd(M):
    """Hermitian principal square root of a PSD matrix."""
    return _hermitian_power(as_matrix(M), 0.5)


def inv_sqrtm(M):
    """Hermitian principal inverse square root of a PD matrix."""
    return _hermitian_power(as_matrix(M), -0.5)


def whiten(noise_cov, H):
    """Return ``noise_cov^{-1/2} H`` using the Hermitian principal root.

    Examples
    --------
    >>> whiten([[4.0]], [[2.0]])
    array([[1.+0.j]])
    """
    Phi = as_matrix(noise_cov, "noise_cov")
    H = as_matrix(H, "H")
    if Phi.shape[0] != Phi.shape[1] or Phi.shape[0] != H.shape[0]:
        raise DimensionMismatch(
            f"noise covariance {Phi.shape} does not conform with channel {H.shape}"
        )
    return inv_sqrtm(Phi) @ H


def svd(H):
    """Thin SVD ``H = U diag(sigma) V^H`` with ``sigma`` descending.

    Returns ``(U, sigma, V)``; note ``V`` (not ``V^H``) is returned so the
    transmit eigenvectors are its columns.
    """
    H = as_matrix(H, "H")
    U, s, Vh = np.linalg.svd(H, full_matrices=False)
    return U, s, Vh.conj().T


def eigh(M):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    w, Q = np.linalg.eigh(hermitian(as_matrix(M)))
    return w[::-1].copy(), Q[:, ::-1].copy()


def quad(H, S):
    """``H S H^H``, symmetrized."""
    return hermitian(H @ S @ H.conj().T)
