"""
Quick invariant battery, runnable without the test suite.

Each check draws a handful of seeded random instances and verifies a
structural property of the solvers. ``run`` returns one
:class:`CheckResult` per check; the CLI ``self-test`` command prints them.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .linalg import logdet, quad
from .multi_user import find_optimal_decodable_set, is_decodable, solve_p4
from .rates import TwoUserContext, thresholds
from .simulation import draw_channels, preset
from .subproblem import LogDetObjective, project_psd_trace
from .two_user import solve_p1
from .waterfilling import sud_best_response, waterfill


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def _psd(rng, n, trace):
    A = _cn(rng, n, n)
    S = A @ A.conj().T
    return S * (trace / np.trace(S).real)


def _context(rng, n=2):
    return TwoUserContext(_cn(rng, n, n), _cn(rng, n, n), _psd(rng, n, rng.uniform(0.5, 10)),
                          0.0, rng.uniform(0.5, 10))


def check_scalar_table(rng):
    expected = {0.5: ("SD_closed_form", math.log(2)), 1.2: ("JD", math.log(5) - 1.2),
                2.0: ("SUD", math.log(1.25))}
    worst = 0.0
    for r2, (regime, rate) in expected.items():
        sol = solve_p1(TwoUserContext(1.0, 1.0, 3.0, r2, 1.0))
        if sol.regime.value != regime:
            return False, f"r_2={r2}: regime {sol.regime.value}, expected {regime}"
        worst = max(worst, abs(sol.rate - rate))
    return worst <= 1e-9, f"max rate error {worst:.1e}"


def check_threshold_order(rng, n=200):
    worst = -math.inf
    for _ in range(n):
        ctx = _context(rng)
        sud = sud_best_response(ctx.H_11, ctx.interference, ctx.P_1).covariance
        sd = waterfill(ctx.H_11, ctx.P_1).covariance
        th = thresholds(ctx, sud, sd)
        worst = max(worst, th.R2_a_hat - th.R2_a_bar, th.R2_a_bar - th.R2_b)
    return worst <= 1e-9, f"largest ordering violation {worst:.1e}"


def check_waterfill_kkt(rng, n=200):
    worst = 0.0
    for _ in range(n):
        H = _cn(rng, rng.integers(1, 5), rng.integers(1, 5))
        P = rng.uniform(0.1, 100)
        res = waterfill(H, P)
        worst = max(worst, abs(res.power_alloc.sum() - P) / P)
        on = res.power_alloc > 0
        g = res.singular_values**2
        if on.any():
            level = res.power_alloc[on] + 1.0 / g[on]
            worst = max(worst, float(np.max(np.abs(level - res.water_level))) / res.water_level)
    return worst <= 1e-9, f"max KKT residual {worst:.1e}"


def check_decodable_set(rng, n=60):
    for _ in range(n):
        K = int(rng.integers(3, 6))
        dim = int(rng.integers(1, 3))
        links = {j: _cn(rng, dim, dim) for j in range(2, K + 1)}
        covs = {j: _psd(rng, dim, rng.uniform(0.5, 5)) for j in links}
        rates = {j: rng.uniform(0, 2) for j in links}
        got = find_optimal_decodable_set(1, links, covs, rates)
        received = {j: quad(links[j], covs[j]) for j in links}
        best = ()
        for size in range(len(links), 0, -1):
            found = [c for c in combinations(sorted(links), size)
                     if is_decodable(c, received, rates, dim)]
            if found:
                best = found[0]
                break
        if got.members != best:
            return False, f"K={K}: got {got.members}, exhaustive {best}"
    return True, f"{n} instances agree with exhaustive search"


def check_two_user_consistency(rng, n=8):
    worst = 0.0
    for _ in range(n):
        ctx = _context(rng)
        sud = sud_best_response(ctx.H_11, ctx.interference, ctx.P_1).covariance
        sd = waterfill(ctx.H_11, ctx.P_1).covariance
        th = thresholds(ctx, sud, sd)
        r2 = rng.uniform(0.0, 1.2 * th.R2_b)
        ctx = TwoUserContext(ctx.H_11, ctx.H_21, ctx.S_2, r2, ctx.P_1)
        a = solve_p1(ctx)
        b = solve_p4(1, {1: ctx.H_11, 2: ctx.H_21}, {2: ctx.S_2}, {2: r2}, ctx.P_1,
                     with_order=False)
        worst = max(worst, abs(a.rate - b.rate))
    return worst <= 1e-4, f"max rate gap {worst:.1e}"


def check_gradient(rng, n=20, h=1e-6):
    worst = 0.0
    for _ in range(n):
        N = int(rng.integers(1, 4))
        M = int(rng.integers(1, 4))
        w = rng.dirichlet(np.ones(2))
        terms = [(w[i], np.eye(M) + quad(_cn(rng, M, M), np.eye(M)), _cn(rng, M, N))
                 for i in range(2)]
        obj = LogDetObjective(terms, 1.0)
        S = _psd(rng, N, 1.0)
        G = obj.gradient(S)
        for a in range(N):
            for b in range(N):
                for unit in (1.0, 1j):
                    E = np.zeros((N, N), dtype=complex)
                    E[a, b] += unit
                    E[b, a] += np.conj(unit)
                    fd = (obj.value(S + h * E) - obj.value(S - h * E)) / (2 * h)
                    worst = max(worst, abs(fd - np.vdot(E, G).real))
    return worst <= 1e-5, f"max directional FD error {worst:.1e}"


def check_projection(rng, n=100):
    worst = 0.0
    for _ in range(n):
        N = int(rng.integers(1, 5))
        S = _psd(rng, N, rng.uniform(0.1, 5))
        worst = max(worst, float(np.max(np.abs(project_psd_trace(S, 5.0) - S))))
    return worst <= 1e-10, f"max change on feasible points {worst:.1e}"


def check_channel_determinism(rng):
    cfg = preset("fig2")
    a = draw_channels(cfg, 7)
    b = draw_channels(cfg, 7)
    same = all(np.array_equal(a[key], b[key]) for key in a)
    return same, "repeated draws are bit-identical" if same else "draws differ"


def check_sud_logdet(rng, n=50):
    worst = 0.0
    for _ in range(n):
        ctx = _context(rng)
        res = sud_best_response(ctx.H_11, ctx.interference, ctx.P_1)
        A = quad(ctx.H_11, res.covariance)
        direct = logdet(np.eye(2) + ctx.interference + A, False) - logdet(np.eye(2) + ctx.interference, False)
        worst = max(worst, abs(direct - res.rate))
    return worst <= 1e-9, f"max rate mismatch {worst:.1e}"


CHECKS = [
    ("scalar regime table", check_scalar_table),
    ("threshold ordering", check_threshold_order),
    ("water-filling KKT", check_waterfill_kkt),
    ("SUD rate equals whitened log-det", check_sud_logdet),
    ("decodable set vs exhaustive search", check_decodable_set),
    ("two-user vs K-user solver", check_two_user_consistency),
    ("gradient vs finite differences", check_gradient),
    ("projection fixes feasible points", check_projection),
    ("channel draws deterministic", check_channel_determinism),
]


def run(seed=0):
    """Run every check; exceptions count as failures."""
    results = []
    for name, fn in CHECKS:
        rng = np.random.default_rng([seed, len(results)])
        try:
            passed, detail = fn(rng)
        except Exception as exc:  # report, do not abort the battery
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail))
    return results
