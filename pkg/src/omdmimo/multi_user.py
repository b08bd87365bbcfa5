"""
Opportunistic multiuser detection with more than one interferer.

User ``k`` first finds the largest set of interferers whose messages are
decodable at its receiver with its own signal absent (that set is unique and
contains every other decodable set), treats the rest as colored noise, and
then maximizes its rate subject to the MAC constraints of the decodable set
plus itself. The dual weights of those constraints live on the simplex and
are updated with the ellipsoid method; each dual step solves a weighted
log-det problem.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, DimensionMismatch, OrderNotFound
from .linalg import as_matrix, hermitian, logdet, quad, whiten
from .rates import BOUNDARY_TOL, MacRegionSpec, subsets
from .subproblem import LogDetObjective, solve
from .waterfilling import waterfill

__all__ = [
    "MAX_USERS",
    "DecodableSet",
    "KUserSolution",
    "find_optimal_decodable_set",
    "is_decodable",
    "solve_p4",
    "extract_decode_order",
]

log = logging.getLogger(__name__)

MAX_USERS = 8
ORDER_TOL = 1e-9


@dataclass(frozen=True)
class DecodableSet:
    """A decodable interferer set with its certifying inequalities.

    ``certificates`` maps every nonempty subset ``J`` of ``members`` to
    ``(sum of rates in J, C(J))`` with the complement treated as noise.
    """

    members: Tuple[int, ...]
    complement: Tuple[int, ...]
    certificates: Dict[Tuple[int, ...], Tuple[float, float]] = field(repr=False)


@dataclass
class KUserSolution:
    user: int
    covariance: np.ndarray
    rate: float
    decodable_set: DecodableSet
    duals: Dict[Tuple[int, ...], float]
    constraint_values: Dict[Tuple[int, ...], float]
    rates: Dict[int, float]
    mac_region: MacRegionSpec = field(repr=False)
    decode_order: Optional[list] = None
    iterations: int = 0
    converged: bool = True


def _received(links, covs, others):
    out = {}
    for j in others:
        H = as_matrix(links[j], f"H[{j}]")
        S = as_matrix(covs[j], f"S[{j}]")
        if S.shape != (H.shape[1], H.shape[1]):
            raise DimensionMismatch(f"covariance of user {j} does not conform with its channel")
        out[j] = quad(H, S)
    dims = {Q.shape[0] for Q in out.values()}
    if len(dims) > 1:
        raise DimensionMismatch("cross channels disagree on the receive dimension")
    return out


def _capacity(received, J, noise):
    """``log|I + noise^{-1} sum_{i in J} Q_i|``."""
    total = noise.copy()
    for i in J:
        total = total + received[i]
    return logdet(total, shifted=False) - logdet(noise, shifted=False)


def _noise(received, excluded, dim):
    Phi = np.eye(dim, dtype=complex)
    for k in excluded:
        Phi = Phi + received[k]
    return Phi


def is_decodable(candidate, received, rates, dim, tol=BOUNDARY_TOL):
    """Whether ``candidate`` is a decodable set, checking every subset."""
    others = set(received) - set(candidate)
    noise = _noise(received, sorted(others), dim)
    return all(
        sum(rates[i] for i in J) <= _capacity(received, J, noise) + tol
        for J in subsets(candidate)
    )


def find_optimal_decodable_set(user, links, covs, rates, rng=None, tol=BOUNDARY_TOL):
    """Largest set of interferers decodable at ``user``'s receiver.

    Starting from all interferers, every nonempty subset ``V_n`` of the
    current candidate ``V`` is tested against
    ``sum_{i in V_n} r_i <= log|I + (I + sum_{k not in V} Q_k)^{-1} sum_{i in V_n} Q_i|``;
    the first violating subset is shrunk to a minimal violating subset,
    removed from ``V``, and the scan restarts.

    Parameters
    ----------
    user : int
    links : dict
        ``j -> H_{j,user}``, the channel from transmitter ``j`` into this
        user's receiver. An entry for ``user`` itself is ignored.
    covs, rates : dict
        Fixed covariances and rates of the interferers.
    rng : numpy.random.Generator, optional
        Shuffle the subset scan order (the result does not depend on it).
    tol : float
        Absolute slack on each inequality.

    Returns
    -------
    DecodableSet
    """
    others = sorted(j for j in links if j != user)
    missing = [j for j in others if j not in covs or j not in rates]
    if missing:
        raise ConfigError(f"missing covariance or rate for users {missing}")
    if len(others) + 1 > MAX_USERS:
        raise ConfigError(f"at most {MAX_USERS} users are supported")
    received = _received(links, covs, others)
    dim = as_matrix(links[others[0]]).shape[0] if others else 1

    V = list(others)
    while V:
        noise = _noise(received, [k for k in others if k not in V], dim)
        scan = list(subsets(V))
        if rng is not None:
            scan = [scan[i] for i in rng.permutation(len(scan))]
        violates = lambda J: sum(rates[i] for i in J) > _capacity(received, J, noise) + tol
        for J in scan:
            if violates(J):
                # only a minimal violating subset is safe to drop whole; a
                # larger one may contain interferers that are decodable
                J = next(G for G in subsets(J) if violates(G))
                V = [i for i in V if i not in J]
                break
        else:
            break

    members = tuple(V)
    complement = tuple(k for k in others if k not in V)
    noise = _noise(received, complement, dim)
    certificates = {
        J: (float(sum(rates[i] for i in J)), _capacity(received, J, noise))
        for J in subsets(members)
    }
    return DecodableSet(members, complement, certificates)


def _ellipsoid_min(oracle, d, max_iter, volume_tol, gap_tol):
    """Minimize a convex function on ``{x >= 0, sum x <= 1}`` in R^d.

    Deep-cut ellipsoid method. ``oracle(x)`` returns
    ``(value, subgradient, primal)``. Stops when the ellipsoid's mean axis
    has shrunk below ``volume_tol`` of its initial length, when
    ``gap_tol(best_value)`` is true, or after ``max_iter`` steps. Returns the
    best feasible ``(value, center, primal)``, the iteration count and
    whether a stopping test (not the cap) ended the run.
    """
    c = np.full(d, 1.0 / (d + 1))
    E = np.eye(d)
    best = (math.inf, None, None)
    log_tol = d * math.log(volume_tol)
    for it in range(1, max_iter + 1):
        if np.any(c < 0.0):
            i = int(np.argmin(c))
            h = np.zeros(d)
            h[i] = -1.0
            excess = -c[i]
        elif c.sum() > 1.0:
            h = np.ones(d)
            excess = c.sum() - 1.0
        else:
            value, h, primal = oracle(c)
            if value < best[0]:
                best = (value, c.copy(), primal)
            if gap_tol is not None and gap_tol(best[0]):
                return best, it, True
            excess = value - best[0]
        Eh = E @ h
        hEh = float(h @ Eh)
        if hEh <= 0.0:
            return best, it, True
        root = math.sqrt(hEh)
        alpha = excess / root
        if alpha >= 1.0:
            # nothing of the ellipsoid survives the cut: localized to precision
            return best, it, True
        gt = Eh / root
        c = c - (1.0 + d * alpha) / (d + 1) * gt
        E = (d * d * (1.0 - alpha * alpha) / (d * d - 1.0)) * (
            E - (2.0 * (1.0 + d * alpha) / ((d + 1) * (1.0 + alpha))) * np.outer(gt, gt)
        )
        E = 0.5 * (E + E.T)
        sign, logdet_E = np.linalg.slogdet(E)
        # volume ratio is sqrt(det E); compare its d-th root with volume_tol
        if sign <= 0 or 0.5 * logdet_E < log_tol:
            return best, it, True
    return best, max_iter, False


def _bisect_weight(oracle, max_iter, tol):
    """Minimize a convex function of a scalar weight on [0, 1]."""
    best = (math.inf, None, None)
    lo, hi = 0.0, 1.0
    it = 0
    for x in (0.0, 1.0):
        value, h, primal = oracle(np.array([x]))
        it += 1
        if value < best[0]:
            best = (value, np.array([x]), primal)
        if x == 0.0 and h[0] >= 0.0:
            return best, it, True
        if x == 1.0 and h[0] <= 0.0:
            return best, it, True
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        value, h, primal = oracle(np.array([mid]))
        it += 1
        if value < best[0]:
            best = (value, np.array([mid]), primal)
        if h[0] == 0.0:
            break
        if h[0] > 0.0:
            hi = mid
        else:
            lo = mid
    return best, it, True


def solve_p4(
    user,
    links,
    covs,
    rates,
    P,
    max_iter=2000,
    volume_tol=1e-8,
    gap_tol=1e-9,
    mu_tol=1e-9,
    with_order=True,
):
    """Optimal covariance and rate of ``user`` against several interferers.

    Parameters
    ----------
    user : int
    links : dict
        ``j -> H_{j,user}`` including the direct channel ``links[user]``.
    covs, rates : dict
        Covariances and rates of the other users.
    P : float
        Power budget of ``user``.
    max_iter, volume_tol : optional
        Ellipsoid stopping rules (iteration cap, remaining volume fraction).
    gap_tol : float
        Additional stop once the duality gap falls below this value.
    mu_tol : float
        Bracket width for the single-weight (one interferer) case.
    with_order : bool
        Also compute a decoding order supporting the rate point.

    Returns
    -------
    KUserSolution
    """
    if user not in links:
        raise ConfigError(f"direct channel of user {user} is missing")
    if P < 0:
        raise ConfigError("power must be non-negative")
    H = as_matrix(links[user], "direct channel")
    ds = find_optimal_decodable_set(user, links, covs, rates)
    others = [j for j in links if j != user]
    received = _received(links, covs, others)
    dim = H.shape[0]
    if any(Q.shape[0] != dim for Q in received.values()):
        raise DimensionMismatch("direct and cross channels disagree on the receive dimension")

    Phi = _noise(received, ds.complement, dim)
    groups = [()] + list(subsets(ds.members))
    bases = []
    offsets = []
    ld_phi = logdet(Phi, shifted=False)
    for J in groups:
        B = Phi.copy()
        for i in J:
            B = B + received[i]
        bases.append(hermitian(B))
        offsets.append(logdet(B, shifted=False) - ld_phi - sum(rates[i] for i in J))

    def constraints(S):
        A = quad(H, S)
        return np.array(
            [logdet(B + A, shifted=False) - logdet(B, shifted=False) + o
             for B, o in zip(bases, offsets)]
        )

    member_rates = {i: float(rates[i]) for i in ds.members}

    # water-filling against base n maximizes constraint n alone; when that
    # constraint is also the smallest at its own maximizer the problem is solved
    single = None
    for n, B in enumerate(bases):
        S = waterfill(whiten(B, H), P).covariance
        f = constraints(S)
        if f[n] <= f.min():
            single = n
            break
    if single is not None:
        duals = dict.fromkeys(groups, 0.0)
        duals[groups[single]] = 1.0
        iterations, converged = 0, True
    else:
        n = len(groups)
        state = {"warm": None, "best_primal": -math.inf, "S": None}

        def oracle(x):
            mu = np.append(x, 1.0 - x.sum())
            mu = np.clip(mu, 0.0, None)
            mu = mu / mu.sum()
            obj = LogDetObjective(list(zip(mu, bases, [H] * n)), P)
            S = solve(obj, S0=state["warm"]).S
            state["warm"] = S
            f = constraints(S)
            primal = float(f.min())
            if primal > state["best_primal"]:
                state["best_primal"], state["S"] = primal, S
            return float(mu @ f), f[:-1] - f[-1], S

        def gap_reached(best_dual):
            return best_dual - state["best_primal"] <= gap_tol

        if n == 2:
            best, iterations, converged = _bisect_weight(oracle, max_iter, mu_tol)
        else:
            best, iterations, converged = _ellipsoid_min(
                oracle, n - 1, max_iter, volume_tol, gap_reached
            )
        x = best[1]
        mu = np.clip(np.append(x, 1.0 - x.sum()), 0.0, None)
        mu = mu / mu.sum()
        duals = dict(zip(groups, mu.tolist()))
        S = state["S"]
        f = constraints(S)
        if not converged:
            log.warning("ellipsoid hit the iteration cap (%d)", max_iter)

    rate = max(float(f.min()), 0.0)
    region = MacRegionSpec(
        {user: H, **{i: links[i] for i in ds.members}},
        {user: S, **{i: covs[i] for i in ds.members}},
        Phi,
    )
    sol = KUserSolution(
        user=user,
        covariance=S,
        rate=rate,
        decodable_set=ds,
        duals=duals,
        constraint_values=dict(zip(groups, f.tolist())),
        rates={user: rate, **member_rates},
        mac_region=region,
        iterations=iterations,
        converged=converged,
    )
    if with_order:
        sol.decode_order = extract_decode_order(sol)
    return sol


def extract_decode_order(sol, spec=None, tol=ORDER_TOL):
    """Successive group decoding order that supports the solution's rates.

    Groups are decoded in order, each jointly while every later group is
    treated as noise and every earlier group has been cancelled; the group
    holding ``sol.user`` comes last. Among valid orders the one with the
    most groups (most successive, least joint decoding) is returned.

    Returns
    -------
    list of tuple
        e.g. ``[(2,), (3,), (1,)]`` or ``[(2, 1)]``.

    Raises
    ------
    OrderNotFound
    """
    spec = spec if spec is not None else sol.mac_region
    user = sol.user
    rates = sol.rates
    everyone = frozenset(spec.members)
    if user not in everyone:
        raise OrderNotFound(f"user {user} is not a member of the region")

    def group_ok(G, later):
        extra = None
        if later:
            extra = sum(spec.received(i) for i in later)
        return all(
            sum(rates[i] for i in J) <= spec.rank(J, extra) + tol for J in subsets(G)
        )

    @lru_cache(maxsize=None)
    def best(remaining):
        """Longest valid order of ``remaining`` (ending with the user's group)."""
        options = []
        if group_ok(tuple(sorted(remaining)), ()):
            options.append([tuple(sorted(remaining, key=lambda i: (i == user, i)))])
        for G in subsets(remaining - {user}):
            rest = remaining - set(G)
            if group_ok(G, tuple(sorted(rest))):
                tail = best(rest)
                if tail is not None:
                    options.append([G] + tail)
        if not options:
            return None
        return max(options, key=len)

    order = best(everyone)
    if order is None:
        raise OrderNotFound("rate point is outside every successive group decoding region")
    return order
