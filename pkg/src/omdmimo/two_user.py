"""
Optimal transmit covariance of user 1 against a single interferer.

The rate of user 1 under opportunistic multiuser detection is maximized by
one of four candidates, selected by where user 2's rate ``r_2`` falls
relative to the thresholds of :func:`omdmimo.rates.thresholds`:

* ``r_2 < R2_a_hat``: successive decoding, own-channel water-filling;
* ``R2_a_hat <= r_2 <= R2_a_bar``: successive decoding with the covariance
  from the weighted log-det problem at the optimal dual weight;
* ``R2_a_bar < r_2 <= R2_b``: joint decoding, whitened water-filling;
* ``r_2 > R2_b``: single-user decoding, whitened water-filling.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BisectionFailed
from .rates import Regime, ThresholdSet, TwoUserContext, thresholds
from .subproblem import LogDetObjective, solve
from .waterfilling import sud_best_response, waterfill

__all__ = ["TwoUserSolution", "solve_p1", "bisect_mu1", "dual_objective"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwoUserSolution:
    covariance: np.ndarray
    rate: float
    regime: Regime
    mu1: Optional[float]
    thresholds: ThresholdSet
    sud_rate: float


def _weighted_objective(ctx, mu1):
    eye = np.eye(ctx.H_11.shape[0])
    return LogDetObjective(
        [(mu1, eye, ctx.H_11), (1.0 - mu1, eye + ctx.interference, ctx.H_11)],
        ctx.P_1,
    )


def dual_objective(ctx, mu1, S=None):
    """Lagrange dual value ``g(mu1)`` of the multiuser-decoding problem.

    ``S`` is the maximizer of the weighted log-det problem at ``mu1``;
    it is computed when not supplied.
    """
    if S is None:
        S = solve(_weighted_objective(ctx, mu1)).S
    own = ctx.own_capacity(S)
    total = ctx.sum_capacity(S)
    return mu1 * own + (1.0 - mu1) * (total - ctx.r_2)


def bisect_mu1(ctx, tol_mu=1e-6, tol_g=1e-6, S_sd=None, S_jd=None, mu_hint=None, S_hint=None):
    """Root of the dual subgradient in the own-capacity weight ``mu1``.

    The subgradient of the dual at ``mu1`` is
    ``log|I + (I + H_11 S H_11^H)^{-1} H_21 S_2 H_21^H| - r_2`` with ``S``
    the weighted log-det optimizer; it is non-negative at ``mu1 = 0`` and
    non-positive at ``mu1 = 1`` whenever ``R2_a_hat <= r_2 <= R2_a_bar``.

    Parameters
    ----------
    ctx : TwoUserContext
    tol_mu, tol_g : float
        Stop when the Brent bracket is narrower than ``tol_mu`` or the
        subgradient magnitude is at most ``tol_g``.
    S_sd, S_jd : ndarray, optional
        Closed-form optimizers at ``mu1 = 1`` and ``mu1 = 0``.
    mu_hint, S_hint : optional
        A guess of the root and of its optimizer, e.g. from a previous
        solve on a nearby context.

    Returns
    -------
    mu1 : float
    S : ndarray

    Raises
    ------
    BisectionFailed
        If the endpoint subgradients do not bracket zero.
    """
    if S_sd is None:
        S_sd = waterfill(ctx.H_11, ctx.P_1).covariance
    if S_jd is None:
        S_jd = sud_best_response(ctx.H_11, ctx.interference, ctx.P_1).covariance

    g_lo = ctx.r2_a(S_jd) - ctx.r_2
    g_hi = ctx.r2_a(S_sd) - ctx.r_2
    if abs(g_lo) <= tol_g:
        return 0.0, S_jd
    if abs(g_hi) <= tol_g:
        return 1.0, S_sd
    if g_lo < 0.0 or g_hi > 0.0:
        raise BisectionFailed(
            f"subgradient does not bracket zero: g(0)={g_lo:.3e}, g(1)={g_hi:.3e}"
        )

    # g is continuous and non-increasing in mu1
    state = {"warm": 0.5 * (S_sd + S_jd) if S_hint is None else S_hint, "S": None, "mu": None}
    known = {0.0: g_lo, 1.0: g_hi}
    template = _weighted_objective(ctx, 0.5)

    def g(mu1):
        if mu1 in known:
            return known[mu1]
        S = solve(template.reweighted([mu1, 1.0 - mu1]), S0=state["warm"]).S
        state["warm"] = state["S"] = S
        state["mu"] = mu1
        value = ctx.r2_a(S) - ctx.r_2
        if abs(value) <= tol_g:
            raise _Root(mu1, S)
        known[mu1] = value
        return value

    try:
        lo, hi = 0.0, 1.0
        if mu_hint is not None and 0.0 < mu_hint < 1.0:
            # one evaluation at the hint halves the search interval
            if g(float(mu_hint)) > 0.0:
                lo = float(mu_hint)
            else:
                hi = float(mu_hint)
        mu1 = brentq(g, lo, hi, xtol=tol_mu, maxiter=200)
        if state["mu"] != mu1:
            g(mu1)
    except _Root as root:
        return root.mu1, root.S
    return mu1, state["S"]


class _Root(Exception):
    def __init__(self, mu1, S):
        super().__init__()
        self.mu1, self.S = mu1, S


def solve_p1(ctx, tol_mu=1e-6, tol_g=1e-6, warm_start=None):
    """Maximize user 1's rate over its covariance given user 2's state.

    ``warm_start`` may be a previous :class:`TwoUserSolution` for a nearby
    context; its dual weight and covariance seed the dual search. The
    result does not depend on it beyond solver tolerances.

    Examples
    --------
    >>> sol = solve_p1(TwoUserContext(1.0, 1.0, 3.0, 1.2, 1.0))
    >>> sol.regime.value, round(sol.rate, 4)
    ('JD', 0.4094)
    """
    if not isinstance(ctx, TwoUserContext):
        raise TypeError("ctx must be a TwoUserContext")
    sud = sud_best_response(ctx.H_11, ctx.interference, ctx.P_1)
    sd = waterfill(ctx.H_11, ctx.P_1)
    th = thresholds(ctx, sud.covariance, sd.covariance)

    if th.regime is Regime.SUD:
        return TwoUserSolution(sud.covariance, sud.rate, th.regime, None, th, sud.rate)
    if th.regime is Regime.JD:
        rate = sud.rate + th.R2_b - ctx.r_2
        return TwoUserSolution(sud.covariance, rate, th.regime, 0.0, th, sud.rate)
    if th.regime is Regime.SD_CLOSED_FORM:
        return TwoUserSolution(sd.covariance, sd.rate, th.regime, 1.0, th, sud.rate)

    candidates = [(1.0, sd.covariance), (0.0, sud.covariance)]
    try:
        hint = {}
        if warm_start is not None and warm_start.regime is Regime.SD_DUAL:
            hint = {"mu_hint": warm_start.mu1, "S_hint": warm_start.covariance}
        mu1, S = bisect_mu1(ctx, tol_mu, tol_g, sd.covariance, sud.covariance, **hint)
        candidates.insert(0, (mu1, S))
    except BisectionFailed as exc:
        log.warning("dual bisection failed, using best endpoint: %s", exc)
    # endpoints are feasible too; guards against an inexact interior solve
    mu1, S = max(candidates, key=lambda c: ctx.md_rate(c[1]))
    return TwoUserSolution(S, ctx.md_rate(S), th.regime, mu1, th, sud.rate)
