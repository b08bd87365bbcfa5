"""
Rate evaluation for opportunistic multiuser detection.

Covers the piecewise two-user rate of user 1 given user 2's covariance and
rate, the interference thresholds that select the decoding regime, and
membership tests for Gaussian MIMO multiple-access capacity regions.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Callable

import numpy as np

from .errors import DimensionMismatch, InfeasibleCovariance
from .linalg import as_matrix, hermitian, is_psd, logdet, quad

__all__ = [
    "Branch",
    "Regime",
    "TwoUserContext",
    "ThresholdSet",
    "MacRegionSpec",
    "omd_rate",
    "thresholds",
    "classify_regime",
    "mac_member",
    "subsets",
]

BOUNDARY_TOL = 1e-12
POWER_TOL = 1e-9


class Branch(str, Enum):
    STRONG = "strong"
    MODERATE = "moderate"
    WEAK = "weak"


class Regime(str, Enum):
    SD_CLOSED_FORM = "SD_closed_form"
    SD_DUAL = "SD_dual"
    JD = "JD"
    SUD = "SUD"


def _as_cov(S):
    if isinstance(S, np.ndarray) and S.ndim == 2:
        return S
    return as_matrix(S, "S_1")


@dataclass(frozen=True)
class TwoUserContext:
    """What user 1 sees while it updates: the other user's covariance and rate.

    ``H_11`` is user 1's direct channel (M1 x N1), ``H_21`` the cross channel
    from user 2's transmitter into user 1's receiver (M1 x N2).
    """

    H_11: np.ndarray
    H_21: np.ndarray
    S_2: np.ndarray
    r_2: float
    P_1: float

    def __post_init__(self):
        H_11 = as_matrix(self.H_11, "H_11")
        H_21 = as_matrix(self.H_21, "H_21")
        S_2 = hermitian(as_matrix(self.S_2, "S_2"))
        if H_11.shape[0] != H_21.shape[0]:
            raise DimensionMismatch("H_11 and H_21 must share the receive dimension")
        if S_2.shape != (H_21.shape[1], H_21.shape[1]):
            raise DimensionMismatch("S_2 does not conform with H_21")
        if self.r_2 < 0 or self.P_1 < 0:
            raise ValueError("rates and powers must be non-negative")
        object.__setattr__(self, "H_11", H_11)
        object.__setattr__(self, "H_21", H_21)
        object.__setattr__(self, "S_2", S_2)
        object.__setattr__(self, "r_2", float(self.r_2))
        object.__setattr__(self, "P_1", float(self.P_1))

    @cached_property
    def interference(self):
        """``H_21 S_2 H_21^H`` at user 1's receiver."""
        return quad(self.H_21, self.S_2)

    def own_capacity(self, S_1):
        return logdet(quad(self.H_11, _as_cov(S_1)))

    def sum_capacity(self, S_1):
        return logdet(quad(self.H_11, _as_cov(S_1)) + self.interference)

    def r2_a(self, S_1):
        """Largest r_2 decodable while treating user 1's signal as noise."""
        return self.sum_capacity(S_1) - self.own_capacity(S_1)

    def r2_b(self):
        """Largest r_2 decodable once user 1's signal is removed."""
        return self._r2_b

    @cached_property
    def _r2_b(self):
        return logdet(self.interference)

    def sud_rate(self, S_1):
        return self.sum_capacity(S_1) - self.r2_b()

    def md_rate(self, S_1):
        """``min(own capacity, sum capacity - r_2)``: the multiuser-decoding rate."""
        return min(self.own_capacity(S_1), self.sum_capacity(S_1) - self.r_2)


@dataclass(frozen=True)
class ThresholdSet:
    R2_b: float
    R2_a_bar: float
    R2_a_hat: float
    regime: Regime
    R2_a_of: Callable = field(repr=False, compare=False, default=None)


def _check_covariance(S_1, n, P):
    S_1 = as_matrix(S_1, "S_1")
    if S_1.shape != (n, n):
        raise DimensionMismatch(f"S_1 must be {n}x{n}")
    if not is_psd(S_1):
        raise InfeasibleCovariance("S_1 is not Hermitian PSD")
    if np.trace(S_1).real > P + POWER_TOL:
        raise InfeasibleCovariance("tr(S_1) exceeds the power budget")
    return hermitian(S_1)


def omd_rate(ctx, S_1):
    """Maximum rate of user 1 under opportunistic multiuser detection.

    Returns ``(rate, branch)``: the strong branch decodes user 2 first
    (successive decoding), moderate decodes both jointly, weak treats user 2
    as noise.

    Examples
    --------
    >>> ctx = TwoUserContext(1.0, 1.0, 3.0, 1.2, 1.0)
    >>> rate, branch = omd_rate(ctx, 1.0)
    >>> branch.value, round(rate, 4)
    ('moderate', 0.4094)
    """
    S_1 = _check_covariance(S_1, ctx.H_11.shape[1], ctx.P_1)
    own = ctx.own_capacity(S_1)
    total = ctx.sum_capacity(S_1)
    r2_b = ctx.r2_b()
    r2_a = total - own
    if ctx.r_2 <= r2_a + BOUNDARY_TOL:
        return own, Branch.STRONG
    if ctx.r_2 <= r2_b + BOUNDARY_TOL:
        return total - ctx.r_2, Branch.MODERATE
    return total - r2_b, Branch.WEAK


def classify_regime(r_2, R2_a_hat, R2_a_bar, R2_b, tol=BOUNDARY_TOL):
    """Decoding regime for user 2's rate given the three thresholds.

    SD (closed form) below ``R2_a_hat``, SD through the dual search on
    ``[R2_a_hat, R2_a_bar]``, JD up to ``R2_b``, SUD beyond. An empty dual
    interval (``R2_a_hat == R2_a_bar``) dispatches straight to SD or JD.
    """
    if r_2 > R2_b + tol:
        return Regime.SUD
    if r_2 > R2_a_bar + tol:
        return Regime.JD
    if R2_a_bar - R2_a_hat <= tol * (1.0 + abs(R2_a_bar)):
        return Regime.SD_CLOSED_FORM
    if r_2 < R2_a_hat - tol:
        return Regime.SD_CLOSED_FORM
    return Regime.SD_DUAL


def thresholds(ctx, S_sud, S_sd, S_jd=None):
    """Interference thresholds for the two-user context.

    Parameters
    ----------
    ctx : TwoUserContext
    S_sud, S_sd : ndarray
        Water-filling optima on the whitened and on the bare direct channel.
    S_jd : ndarray, optional
        Sum-rate optimum; identical to ``S_sud``, which is used when omitted.
    """
    if S_jd is None:
        S_jd = S_sud
    R2_b = ctx.r2_b()
    R2_a_bar = ctx.r2_a(S_jd)
    R2_a_hat = ctx.r2_a(S_sd)
    regime = classify_regime(ctx.r_2, R2_a_hat, R2_a_bar, R2_b)
    return ThresholdSet(R2_b, R2_a_bar, R2_a_hat, regime, ctx.r2_a)


def subsets(items, min_size=1):
    """Subsets of ``items`` by increasing size, then lexicographically."""
    items = sorted(items)
    for size in range(min_size, len(items) + 1):
        yield from combinations(items, size)


@dataclass
class MacRegionSpec:
    """A Gaussian MIMO-MAC with fixed input covariances at one receiver.

    Parameters
    ----------
    channels : dict
        User index -> channel into the common receiver.
    covariances : dict
        User index -> transmit covariance.
    noise_cov : ndarray, optional
        Receiver noise covariance ``Phi``; identity when omitted.
    """

    channels: dict
    covariances: dict
    noise_cov: np.ndarray = None

    def __post_init__(self):
        if set(self.channels) != set(self.covariances):
            raise ValueError("channels and covariances must name the same users")
        self.channels = {u: as_matrix(H) for u, H in self.channels.items()}
        m = {H.shape[0] for H in self.channels.values()}
        if len(m) > 1:
            raise DimensionMismatch("all channels must share the receive dimension")
        dim = m.pop() if m else 1
        if self.noise_cov is None:
            self.noise_cov = np.eye(dim, dtype=complex)
        self.noise_cov = hermitian(as_matrix(self.noise_cov, "noise_cov"))
        self._received = {
            u: quad(self.channels[u], as_matrix(self.covariances[u]))
            for u in self.channels
        }
        self._noise_logdet = logdet(self.noise_cov, shifted=False)
        self._cache = {}

    @property
    def members(self):
        return tuple(sorted(self.channels))

    def received(self, u):
        return self._received[u]

    def rank(self, J, extra_noise=None):
        """``C(J) = log|I + Phi^{-1} sum_{i in J} H_i S_i H_i^H|``.

        ``extra_noise`` adds a further covariance to ``Phi`` (users decoded
        later and therefore treated as noise).
        """
        J = tuple(sorted(J))
        if extra_noise is None:
            if J in self._cache:
                return self._cache[J]
            base, base_ld = self.noise_cov, self._noise_logdet
        else:
            base = self.noise_cov + extra_noise
            base_ld = logdet(base, shifted=False)
        total = base.copy()
        for i in J:
            total = total + self._received[i]
        value = logdet(total, shifted=False) - base_ld if J else 0.0
        if extra_noise is None:
            self._cache[J] = value
        return value


def mac_member(spec, rates, tol=BOUNDARY_TOL):
    """Check whether ``rates`` lies in the MAC capacity region of ``spec``.

    Returns ``(member, violated)`` where ``violated`` lists every nonempty
    subset ``J`` with ``sum_{i in J} r_i > C(J)``, ordered by size then
    lexicographically. Points on the boundary count as inside.
    """
    if any(r < 0 for r in rates.values()):
        raise ValueError("rates must be non-negative")
    violated = []
    for J in subsets(spec.members):
        if sum(rates[i] for i in J) > spec.rank(J) + tol:
            violated.append(J)
    return not violated, violated
