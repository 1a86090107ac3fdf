import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intforce.channel import compute_m
from intforce.errors import CapacityExceeded, DimensionMismatch, NotPositiveDefinite
from intforce.lattice import (
    canonical_signs,
    enumerate_rows,
    exhaustive_sivp,
    kz_reduce_approx,
    l1_ball_count,
    lagrange_reduce,
    lll_reduce,
    row_forms,
    score,
)
from intforce.numerics import cholesky_lower, int_det


def gram_from_seed(seed, n, snr_db=20.0):
    rng = np.random.default_rng(seed)
    return compute_m(rng.standard_normal((n, n)), 10 ** (snr_db / 10))


def lovasz_ok(U, M, delta):
    Q = U @ M @ U.T
    L = cholesky_lower(0.5 * (Q + Q.T))
    d = np.diag(L) ** 2
    mu = L / np.diag(L)
    for k in range(1, len(d)):
        if d[k] < (delta - mu[k, k - 1] ** 2) * d[k - 1] * (1 + 1e-9):
            return False
        if np.any(np.abs(mu[k, :k]) > 0.5 + 1e-9):
            return False
    return True


def test_identity_gram():
    for n in (2, 3, 4):
        assert np.array_equal(lll_reduce(np.eye(n)), np.eye(n))
    assert np.array_equal(lagrange_reduce(np.eye(2)), np.eye(2))


def test_lll_known_2d():
    M = np.array([[1.0, 0.9], [0.9, 1.0]])
    U = lll_reduce(M)
    assert abs(int_det(U)) == 1
    assert sorted(row_forms(U, M).round(12)) == [0.2, 1.0]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6), st.floats(0, 30))
def test_lll_properties(seed, n, snr_db):
    M = gram_from_seed(seed, n, snr_db)
    U = lll_reduce(M)
    assert abs(int_det(U)) == 1
    assert lovasz_ok(U, M, 0.75)
    # sign-canonical rows
    for row in U:
        assert row[np.flatnonzero(row)[0]] > 0


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 6))
def test_kz_unimodular_and_first_row_bound(seed, n):
    M = gram_from_seed(seed, n)
    U = kz_reduce_approx(M)
    assert abs(int_det(U)) == 1
    # LLL guarantee for the first row, with lambda_1 bounded by the unit vectors
    alpha = 1 / (0.99 - 0.25)
    assert row_forms(U, M)[0] <= alpha ** (n - 1) * np.min(np.diag(M)) * (1 + 1e-9)


def test_lagrange_dim_check():
    with pytest.raises(DimensionMismatch):
        lagrange_reduce(np.eye(3))


def test_non_spd_rejected():
    with pytest.raises(NotPositiveDefinite):
        lll_reduce(np.array([[1.0, 2.0], [2.0, 1.0]]))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 20))
def test_lagrange_matches_exhaustive(seed, snr_db):
    M = gram_from_seed(seed, 2, snr_db)
    assert score(lagrange_reduce(M), M) == pytest.approx(score(exhaustive_sivp(M), M), rel=1e-12)


def test_enumerate_counts():
    rows = enumerate_rows(2, 15).rows
    assert len(rows) == 240
    assert len(rows) == (l1_ball_count(2, 15) - 1) // 2
    assert np.all(np.abs(rows).sum(axis=1) <= 15)
    assert np.array_equal(canonical_signs(rows), rows)
    assert len({tuple(r) for r in rows}) == len(rows)
    assert len(enumerate_rows(3, 2).rows) == (l1_ball_count(3, 2) - 1) // 2


def test_capacity_guard():
    with pytest.raises(CapacityExceeded):
        enumerate_rows(8, 15, cap=10**6)


def test_exhaustive_matches_brute_force_3d():
    from itertools import combinations

    for seed in range(5):
        M = gram_from_seed(seed, 3, 15)
        cand = enumerate_rows(3, 2).rows
        best = min(
            score(cand[list(t)], M)
            for t in combinations(range(len(cand)), 3)
            if int_det(cand[list(t)]) != 0
        )
        U = exhaustive_sivp(M, l1_bound=2)
        assert int_det(U) != 0
        assert score(U, M) == pytest.approx(best, rel=1e-12)
