import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from omdmimo.errors import DimensionMismatch, NonPositiveDefinite
from omdmimo.linalg import (
    as_matrix,
    clamp_psd,
    eigh,
    hermitian,
    inv_sqrtm,
    is_hermitian,
    is_psd,
    logdet,
    sqrtm_psd,
    svd,
    whiten,
)

from _helpers import cn, random_psd

seeds = st.integers(0, 2**32 - 1)


def test_logdet_examples():
    assert logdet(np.zeros((2, 2))) == 0.0
    assert logdet(np.diag([1.0, 3.0])) == pytest.approx(math.log(2) + math.log(4), abs=1e-12)
    with pytest.raises(NonPositiveDefinite):
        logdet(np.diag([-0.5]), shifted=False)


def test_logdet_scalar_and_errors():
    assert logdet(4.0, shifted=False) == pytest.approx(math.log(4))
    with pytest.raises(DimensionMismatch):
        logdet(np.ones((2, 3)))
    with pytest.raises(ValueError):
        logdet(np.array([[np.nan]]))


def test_whiten_examples():
    rng = np.random.default_rng(1)
    H = cn(rng, 3, 2)
    np.testing.assert_allclose(whiten(np.eye(3), H), H, atol=1e-14)
    np.testing.assert_allclose(whiten(4.0, 2.0), [[1.0]], atol=1e-14)
    with pytest.raises(DimensionMismatch):
        whiten(np.eye(2), cn(rng, 3, 2))


def test_svd_examples():
    _, s, _ = svd(np.eye(2))
    np.testing.assert_allclose(s, [1, 1])
    _, s, _ = svd(np.diag([3.0, 4.0]))
    np.testing.assert_allclose(s, [4, 3])


def test_eigh_examples():
    w, _ = eigh(2 * np.eye(2))
    np.testing.assert_allclose(w, [2, 2])
    w, _ = eigh(np.diag([1.0, 5.0]))
    np.testing.assert_allclose(w, [5, 1])


def test_as_matrix_shapes():
    assert as_matrix(2.0).shape == (1, 1)
    assert as_matrix([1.0, 2.0]).shape == (2, 1)
    with pytest.raises(DimensionMismatch):
        as_matrix(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        as_matrix([[np.inf]])


def test_hermitian_and_psd_predicates():
    M = np.array([[2.0, 1 + 1j], [1 - 1j, 3.0]])
    assert is_hermitian(M) and is_psd(M)
    assert not is_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert not is_psd(np.diag([1.0, -0.1]))
    # within the relative tolerance counts as PSD
    assert is_psd(np.diag([1.0, -1e-12]))
    np.testing.assert_allclose(clamp_psd(np.diag([1.0, -0.1])), np.diag([1.0, 0.0]), atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_logdet_product_rule(seed):
    rng = np.random.default_rng(seed)
    A = random_psd(rng, 4, 4.0) + 0.1 * np.eye(4)
    B = random_psd(rng, 4, 4.0) + 0.1 * np.eye(4)
    # A B is not Hermitian; use the congruence A^{1/2} B A^{1/2}
    R = sqrtm_psd(A)
    lhs = logdet(R @ B @ R, shifted=False)
    assert lhs == pytest.approx(logdet(A, shifted=False) + logdet(B, shifted=False), abs=1e-8)
    assert logdet(A, shifted=False) == pytest.approx(np.linalg.slogdet(A)[1], abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_whiten_roundtrip(seed, m, n):
    rng = np.random.default_rng(seed)
    noise = np.eye(m) + random_psd(rng, m, rng.uniform(0.1, 10))
    H = cn(rng, m, n)
    np.testing.assert_allclose(sqrtm_psd(noise) @ whiten(noise, H), H, atol=1e-8)
    np.testing.assert_allclose(inv_sqrtm(noise) @ sqrtm_psd(noise), np.eye(m), atol=1e-9)


def test_reconstruction_many():
    rng = np.random.default_rng(7)
    worst_svd = worst_eig = worst_unit = 0.0
    for _ in range(1000):
        m, n = rng.integers(1, 7, size=2)
        H = cn(rng, m, n)
        U, s, V = svd(H)
        assert len(s) == min(m, n) and np.all(np.diff(s) <= 0)
        worst_svd = max(worst_svd, np.linalg.norm(U * s @ V.conj().T - H) / np.linalg.norm(H))
        M = hermitian(cn(rng, m, m))
        w, Q = eigh(M)
        assert np.all(np.diff(w) <= 0)
        worst_eig = max(worst_eig, np.linalg.norm((Q * w) @ Q.conj().T - M) / max(np.linalg.norm(M), 1e-300))
        worst_unit = max(worst_unit, np.abs(Q.conj().T @ Q - np.eye(m)).max())
    assert worst_svd <= 1e-9 and worst_eig <= 1e-9 and worst_unit <= 1e-9
