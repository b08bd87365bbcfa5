import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omdmimo.errors import DimensionMismatch, MaxIterExceeded
from omdmimo.linalg import whiten
from omdmimo.subproblem import (
    LogDetObjective,
    gradient,
    objective_value,
    project_psd_trace,
    solve,
)
from omdmimo.waterfilling import waterfill

from _helpers import cn, fd_gradient, logdet_pd, random_covariances, random_psd

seeds = st.integers(0, 2**32 - 1)


def _objective(rng, n_terms=2, M=2, N=2, P=None, weights=None):
    if weights is None:
        weights = rng.dirichlet(np.ones(n_terms))
    H = cn(rng, M, N)
    terms = [(w, np.eye(M) + random_psd(rng, M, rng.uniform(0, 5)), H) for w in weights]
    return LogDetObjective(terms, rng.uniform(0.1, 10) if P is None else P)


def _oracle_value(obj, S):
    """Objective recomputed from the stored terms with slogdet."""
    total = 0.0
    for w, B, H in obj.all_terms:
        total += w * (logdet_pd(B + H @ S @ H.conj().T) - logdet_pd(B))
    return total


def test_single_term_is_waterfilling():
    rng = np.random.default_rng(0)
    for _ in range(20):
        H = cn(rng, 2, 2)
        P = rng.uniform(0.1, 20)
        res = solve(LogDetObjective([(1.0, np.eye(2), H)], P))
        assert res.converged
        assert res.value == pytest.approx(waterfill(H, P).rate, abs=1e-6)


def test_zero_power():
    rng = np.random.default_rng(1)
    obj = _objective(rng, P=0.0)
    res = solve(obj)
    assert np.all(res.S == 0) and res.value == 0.0


def test_zero_weight_term_gives_whitened_waterfilling():
    rng = np.random.default_rng(2)
    for _ in range(20):
        H = cn(rng, 2, 2)
        B2 = np.eye(2) + random_psd(rng, 2, rng.uniform(0.1, 10))
        P = rng.uniform(0.1, 20)
        obj = LogDetObjective([(0.0, np.eye(2), H), (1.0, B2, H)], P)
        res = solve(obj)
        assert res.value == pytest.approx(waterfill(whiten(B2, H), P).rate, abs=1e-6)


def test_gradient_examples():
    obj = LogDetObjective([(1.0, np.eye(2), np.eye(2))], 1.0)
    np.testing.assert_allclose(gradient(obj, np.zeros((2, 2))), np.eye(2), atol=1e-15)
    scalar = LogDetObjective([(1.0, 1.0, 1.0)], 1.0)
    np.testing.assert_allclose(gradient(scalar, np.array([[1.0]])), [[0.5]], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4), st.integers(1, 3))
def test_gradient_matches_finite_differences(seed, M, N, n_terms):
    rng = np.random.default_rng(seed)
    obj = _objective(rng, n_terms, M, N)
    S = random_psd(rng, N, obj.power)
    G = gradient(obj, S)
    np.testing.assert_allclose(G, G.conj().T, atol=1e-10)
    np.testing.assert_allclose(G, fd_gradient(lambda X: objective_value(obj, X), S), atol=1e-5)


def test_projection_examples():
    np.testing.assert_allclose(project_psd_trace(np.diag([3.0, -1.0]), 2.0), np.diag([2.0, 0.0]), atol=1e-12)
    np.testing.assert_allclose(project_psd_trace(np.eye(2), 1.0), 0.5 * np.eye(2), atol=1e-12)
    with pytest.raises(ValueError):
        project_psd_trace(np.eye(2), -1.0)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(1, 5), st.floats(0.0, 10.0))
def test_projection_idempotent_and_nonexpansive(seed, n, P):
    rng = np.random.default_rng(seed)
    X = cn(rng, n, n) * 3
    Y = cn(rng, n, n) * 3
    X, Y = X + X.conj().T, Y + Y.conj().T
    pX, pY = project_psd_trace(X, P), project_psd_trace(Y, P)
    assert np.trace(pX).real <= P + 1e-9
    assert np.linalg.eigvalsh(pX).min() >= -1e-9
    np.testing.assert_allclose(project_psd_trace(pX, P), pX, atol=1e-10)
    assert np.linalg.norm(pX - pY) <= np.linalg.norm(X - Y) + 1e-9


def test_projection_is_nearest():
    rng = np.random.default_rng(5)
    for _ in range(50):
        X = cn(rng, 2, 2) * 2
        X = X + X.conj().T
        P = rng.uniform(0.1, 4)
        p = project_psd_trace(X, P)
        S = random_covariances(rng, 5000, 2, P) * rng.uniform(0, 1, size=(5000, 1, 1))
        d = np.linalg.norm(S - X, axis=(1, 2))
        assert np.linalg.norm(p - X) <= d.min() + 1e-9


def test_concavity_certificate():
    rng = np.random.default_rng(6)
    for _ in range(200):
        obj = _objective(rng, int(rng.integers(1, 4)))
        Sa = random_psd(rng, 2, obj.power * rng.uniform(0, 1))
        Sb = random_psd(rng, 2, obj.power * rng.uniform(0, 1))
        fa, fb = objective_value(obj, Sa), objective_value(obj, Sb)
        for lam in (0.25, 0.5, 0.75):
            mix = objective_value(obj, lam * Sa + (1 - lam) * Sb)
            assert mix >= lam * fa + (1 - lam) * fb - 1e-9


def test_solver_dominates_random_points():
    rng = np.random.default_rng(7)
    for _ in range(20):
        obj = _objective(rng, int(rng.integers(1, 4)))
        res = solve(obj)
        assert res.converged and res.residual <= 1e-8
        assert np.trace(res.S).real <= obj.power + 1e-9
        assert np.linalg.eigvalsh(res.S).min() >= -1e-9
        assert res.value == pytest.approx(_oracle_value(obj, res.S), abs=1e-10)
        S = random_covariances(rng, 10000, 2, obj.power)
        vals = sum(w * (logdet_pd(B + H @ S @ H.conj().T) - logdet_pd(B)) for w, B, H in obj.all_terms)
        assert res.value >= vals.max() - 1e-6


def test_iteration_cap_warns():
    rng = np.random.default_rng(8)
    obj = _objective(rng, 2, 3, 3, P=50.0)
    with pytest.warns(MaxIterExceeded):
        res = solve(obj, max_iter=1)
    assert not res.converged
    assert np.trace(res.S).real <= obj.power + 1e-9


def test_warm_start_is_projected():
    rng = np.random.default_rng(9)
    obj = _objective(rng, 2)
    a = solve(obj)
    b = solve(obj, S0=np.eye(2) * 100)
    assert a.value == pytest.approx(b.value, abs=1e-9)


def test_reweighted_matches_fresh_objective():
    rng = np.random.default_rng(10)
    obj = _objective(rng, 3)
    new = obj.reweighted([0.2, 0.0, 0.8])
    fresh = LogDetObjective([(w, B, H) for w, (_, B, H) in zip([0.2, 0.0, 0.8], obj.all_terms)], obj.power)
    S = random_psd(rng, 2, obj.power)
    assert new.value(S) == pytest.approx(fresh.value(S), abs=1e-12)
    np.testing.assert_allclose(new.gradient(S), fresh.gradient(S), atol=1e-12)
    with pytest.raises(ValueError):
        obj.reweighted([0.5, 0.6, 0.0])


def test_objective_validation():
    H = np.eye(2)
    with pytest.raises(ValueError):
        LogDetObjective([(0.5, np.eye(2), H)], 1.0)
    with pytest.raises(ValueError):
        LogDetObjective([(1.5, np.eye(2), H), (-0.5, np.eye(2), H)], 1.0)
    with pytest.raises(ValueError):
        LogDetObjective([(1.0, np.eye(2), H)], -1.0)
    with pytest.raises(DimensionMismatch):
        LogDetObjective([(1.0, np.eye(3), H)], 1.0)
    with pytest.raises(DimensionMismatch):
        LogDetObjective([(0.5, np.eye(2), H), (0.5, np.eye(3), np.eye(3))], 1.0)
