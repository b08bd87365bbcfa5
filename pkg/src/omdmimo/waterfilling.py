"""
Single-user MIMO water-filling.

The optimal input covariance for ``max log|I + H S H^H|`` subject to
``tr(S) <= P`` is ``V diag(p) V^H`` where ``V`` holds the right singular
vectors of ``H`` and ``p_i = (mu - 1/sigma_i^2)^+``. The water level ``mu``
is found exactly by testing active-set sizes over the sorted gains.
"""

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, hermitian, svd, whiten

__all__ = ["WaterfillResult", "water_level", "waterfill", "sud_best_response"]

# singular values at or below this are treated as zero modes
ZERO_GAIN = 1e-12


@dataclass(frozen=True)
class WaterfillResult:
    """Output of :func:`waterfill`.

    Attributes
    ----------
    covariance : ndarray
        Optimal transmit covariance ``V diag(p) V^H``.
    power_alloc : ndarray
        Per-mode powers ``p_i``, aligned with ``singular_values``.
    water_level : float
        ``mu``; zero when nothing is allocated.
    rate : float
        ``sum_i log(1 + sigma_i^2 p_i)`` in nats.
    singular_values : ndarray
        Descending singular values of the effective channel.
    """

    covariance: np.ndarray
    power_alloc: np.ndarray
    water_level: float
    rate: float
    singular_values: np.ndarray


def water_level(gains, P):
    """Exact water level and allocation for squared gains ``gains``.

    Parameters
    ----------
    gains : array_like
        Squared singular values, any order; non-positive entries are
        never allocated power.
    P : float
        Total power.

    Returns
    -------
    mu : float
    p : ndarray
        Allocation in the same order as ``gains``.
    """
    g = np.asarray(gains, dtype=float)
    p = np.zeros_like(g)
    if P <= 0.0:
        return 0.0, p
    active = np.flatnonzero(g > ZERO_GAIN**2)
    if active.size == 0:
        return 0.0, p
    order = active[np.argsort(-g[active], kind="stable")]
    inv = 1.0 / g[order]
    csum = np.cumsum(inv)
    mu = 0.0
    n_active = 1
    for n in range(len(order), 0, -1):
        level = (P + csum[n - 1]) / n
        if level > inv[n - 1]:
            mu, n_active = level, n
            break
    p[order[:n_active]] = mu - inv[:n_active]
    return float(mu), p


def waterfill(H_eff, P):
    """Water-fill power ``P`` over the eigenmodes of ``H_eff``.

    Examples
    --------
    >>> res = waterfill(np.diag([2.0, 1.0]), 3.0)
    >>> round(res.water_level, 6), round(res.rate, 4)
    (2.125, 2.8939)
    """
    if P < 0:
        raise ValueError("power must be non-negative")
    H_eff = as_matrix(H_eff, "H_eff")
    _, sigma, V = svd(H_eff)
    mu, p = water_level(sigma**2, P)
    S = hermitian((V * p) @ V.conj().T)
    rate = float(np.sum(np.log1p(sigma**2 * p)))
    return WaterfillResult(S, p, mu, rate, sigma)


def sud_best_response(H_11, interference_cov, P):
    """Best response of a single-user decoder against colored interference.

    The receiver noise is ``I + interference_cov``; the channel is whitened
    by its inverse square root and then water-filled. The returned rate is
    ``log|I + (I + Q)^{-1} H S H^H|``.
    """
    H_11 = as_matrix(H_11, "H_11")
    Q = as_matrix(interference_cov, "interference_cov")
    noise = hermitian(Q) + np.eye(Q.shape[0])
    return waterfill(whiten(noise, H_11), P)
