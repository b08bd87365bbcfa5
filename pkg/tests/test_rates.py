import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omdmimo.errors import DimensionMismatch, InfeasibleCovariance
from omdmimo.rates import (
    Branch,
    MacRegionSpec,
    Regime,
    TwoUserContext,
    classify_regime,
    mac_member,
    omd_rate,
    subsets,
    thresholds,
)
from omdmimo.waterfilling import sud_best_response, waterfill

from _helpers import cn, logdet_eye_plus, random_psd, thresholds_oracle

SCALAR = dict(H_11=1.0, H_21=1.0, S_2=3.0, P_1=1.0)


@pytest.mark.parametrize(
    "r2, branch, rate",
    [
        (0.5, Branch.STRONG, math.log(2)),
        (1.2, Branch.MODERATE, math.log(5) - 1.2),
        (2.0, Branch.WEAK, math.log(1.25)),
    ],
)
def test_scalar_branches(r2, branch, rate):
    got, b = omd_rate(TwoUserContext(r_2=r2, **SCALAR), 1.0)
    assert b is branch
    assert got == pytest.approx(rate, abs=1e-12)


def test_scalar_threshold_values():
    ctx = TwoUserContext(r_2=0.5, **SCALAR)
    assert ctx.r2_a(1.0) == pytest.approx(math.log(2.5), abs=1e-12)
    assert ctx.r2_b() == pytest.approx(math.log(4), abs=1e-12)
    th = thresholds(ctx, sud_best_response(1.0, 3.0, 1.0).covariance, waterfill(1.0, 1.0).covariance)
    assert th.R2_b == pytest.approx(math.log(4), abs=1e-12)
    assert th.R2_a_bar == pytest.approx(math.log(2.5), abs=1e-12)
    assert th.R2_a_hat == pytest.approx(math.log(2.5), abs=1e-12)
    assert th.regime is Regime.SD_CLOSED_FORM


def test_no_interference_thresholds():
    rng = np.random.default_rng(0)
    H = cn(rng, 2, 2)
    ctx = TwoUserContext(H, cn(rng, 2, 2), np.zeros((2, 2)), 0.1, 2.0)
    S = waterfill(H, 2.0).covariance
    th = thresholds(ctx, S, S)
    assert th.R2_b == th.R2_a_bar == th.R2_a_hat == 0.0
    assert th.regime is Regime.SUD


def test_infeasible_covariance():
    ctx = TwoUserContext(r_2=0.5, **SCALAR)
    with pytest.raises(InfeasibleCovariance):
        omd_rate(ctx, 1.5)
    with pytest.raises(InfeasibleCovariance):
        omd_rate(ctx, -0.1)
    with pytest.raises(DimensionMismatch):
        omd_rate(ctx, np.eye(2) * 0.1)


def test_context_validation():
    with pytest.raises(DimensionMismatch):
        TwoUserContext(np.eye(2), np.eye(3), np.eye(3), 0.0, 1.0)
    with pytest.raises(DimensionMismatch):
        TwoUserContext(np.eye(2), np.eye(2), np.eye(3), 0.0, 1.0)
    with pytest.raises(ValueError):
        TwoUserContext(1.0, 1.0, 1.0, -0.1, 1.0)


def test_classify_boundaries():
    hat, bar, b = 0.2, 0.5, 0.9
    assert classify_regime(0.1, hat, bar, b) is Regime.SD_CLOSED_FORM
    assert classify_regime(hat, hat, bar, b) is Regime.SD_DUAL
    assert classify_regime(bar, hat, bar, b) is Regime.SD_DUAL
    assert classify_regime(0.7, hat, bar, b) is Regime.JD
    assert classify_regime(b, hat, bar, b) is Regime.JD
    assert classify_regime(1.0, hat, bar, b) is Regime.SUD
    # empty dual interval
    assert classify_regime(0.5, 0.5, 0.5, b) is Regime.SD_CLOSED_FORM


def test_threshold_order_many():
    rng = np.random.default_rng(21)
    worst = -np.inf
    for _ in range(1000):
        H11, H21 = cn(rng, 2, 2), cn(rng, 2, 2)
        S2 = random_psd(rng, 2, rng.uniform(0.1, 20))
        P = rng.uniform(0.1, 20)
        ctx = TwoUserContext(H11, H21, S2, 0.0, P)
        th = thresholds(ctx, sud_best_response(H11, ctx.interference, P).covariance,
                        waterfill(H11, P).covariance)
        worst = max(worst, th.R2_a_hat - th.R2_a_bar, th.R2_a_bar - th.R2_b)
    assert worst <= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_thresholds_match_oracle(seed):
    rng = np.random.default_rng(seed)
    H11, H21 = cn(rng, 2, 2), cn(rng, 2, 2)
    S2 = random_psd(rng, 2, rng.uniform(0.1, 20))
    P = rng.uniform(0.1, 20)
    ctx = TwoUserContext(H11, H21, S2, 0.0, P)
    th = thresholds(ctx, sud_best_response(H11, ctx.interference, P).covariance,
                    waterfill(H11, P).covariance)
    hat, bar, b = thresholds_oracle(H11, H21, S2, P)
    assert th.R2_a_hat == pytest.approx(hat, abs=1e-7)
    assert th.R2_a_bar == pytest.approx(bar, abs=1e-7)
    assert th.R2_b == pytest.approx(b, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 6.0))
def test_omd_dominates_sud(seed, r2):
    rng = np.random.default_rng(seed)
    H11, H21 = cn(rng, 2, 2), cn(rng, 2, 2)
    S2 = random_psd(rng, 2, rng.uniform(0.1, 20))
    P = rng.uniform(0.1, 20)
    S1 = random_psd(rng, 2, P * rng.uniform(0, 1))
    ctx = TwoUserContext(H11, H21, S2, r2, P)
    rate, _ = omd_rate(ctx, S1)
    assert rate >= ctx.sud_rate(S1) - 1e-9


def test_moderate_meets_weak_at_r2b():
    rng = np.random.default_rng(2)
    for _ in range(200):
        H11, H21 = cn(rng, 2, 2), cn(rng, 2, 2)
        S2 = random_psd(rng, 2, rng.uniform(0.1, 20))
        S1 = random_psd(rng, 2, rng.uniform(0.1, 20))
        A = H11 @ S1 @ H11.conj().T
        Q = H21 @ S2 @ H21.conj().T
        moderate = float(logdet_eye_plus(A + Q) - logdet_eye_plus(Q))
        w, V = np.linalg.eigh(np.eye(2) + Q)
        W = (V * w**-0.5) @ V.conj().T
        weak = float(logdet_eye_plus(W @ A @ W))
        assert moderate == pytest.approx(weak, abs=1e-8)
        ctx = TwoUserContext(H11, H21, S2, 0.0, 20.0)
        ctx_b = TwoUserContext(H11, H21, S2, ctx.r2_b(), 20.0)
        assert omd_rate(ctx_b, S1)[0] == pytest.approx(weak, abs=1e-8)


def test_subset_order():
    assert list(subsets([3, 1, 2])) == [(1,), (2,), (3,), (1, 2), (1, 3), (2, 3), (1, 2, 3)]


def test_mac_member_examples():
    spec = MacRegionSpec({1: 1.0, 2: 1.0}, {1: 3.0, 2: 1.0})
    assert mac_member(spec, {1: 0.0, 2: 0.0}) == (True, [])
    single = MacRegionSpec({1: 1.0}, {1: 1.0})
    assert mac_member(single, {1: math.log(2)})[0]
    member, violated = mac_member(spec, {1: 1.386, 2: 0.8})
    assert not member
    assert (2,) in violated
    # 1.386 + 0.8 also exceeds ln 5, so the pair is reported too
    assert violated == [(2,), (1, 2)]


def test_mac_rank_with_noise():
    spec = MacRegionSpec({1: 1.0, 2: 1.0}, {1: 3.0, 2: 1.0}, noise_cov=2.0)
    assert spec.rank((1,)) == pytest.approx(math.log(2.5))
    assert spec.rank((1, 2)) == pytest.approx(math.log(3.0))
    assert spec.rank((1,), extra_noise=np.array([[1.0]])) == pytest.approx(math.log(2.0))
    assert spec.rank(()) == 0.0


def test_rank_function_polymatroid():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        n = int(rng.integers(1, 6))
        dim = int(rng.integers(1, 3))
        users = list(range(1, n + 1))
        spec = MacRegionSpec({u: cn(rng, dim, dim) for u in users},
                             {u: random_psd(rng, dim, rng.uniform(0.1, 5)) for u in users},
                             np.eye(dim) + random_psd(rng, dim, rng.uniform(0, 2)))
        all_sets = [()] + list(subsets(users))
        C = {J: spec.rank(J) for J in all_sets}
        for A in all_sets:
            assert C[A] >= -1e-12
            for B in all_sets:
                union = tuple(sorted(set(A) | set(B)))
                inter = tuple(sorted(set(A) & set(B)))
                assert C[A] + C[B] >= C[union] + C[inter] - 1e-9
                if set(A) <= set(B):
                    assert C[A] <= C[B] + 1e-12
