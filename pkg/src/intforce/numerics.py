"""Small dense linear algebra used throughout the package.

All matrices here are tiny (dimension <= 16), so the routines favour
clarity and explicit failure over blocking or packing tricks.
"""
import math

import numpy as np

from .errors import DimensionMismatch, NotPositiveDefinite

PIVOT_FLOOR = 1e-12
SYMMETRY_RTOL = 1e-10


def _check_square(K):
    K = np.asarray(K, dtype=float)
    if K.ndim < 2 or K.shape[-1] != K.shape[-2]:
        raise DimensionMismatch(f"expected square matrices, got shape {K.shape}")
    if not np.isfinite(K).all():
        raise ValueError("matrix has non-finite entries")
    return K


def cholesky_lower(K, check_symmetry=True):
    """Lower-triangular L with L @ L.T == K and a strictly positive diagonal.

    Accepts a single matrix or a stack of shape (..., n, n). Raises
    NotPositiveDefinite when K is not symmetric or when a squared pivot falls
    below ``PIVOT_FLOOR * max(diag(K))``. No jitter is ever added. Callers
    that build K symmetric by construction may skip the symmetry test.
    """
    K = _check_square(K)
    if check_symmetry:
        asym = np.abs(K - K.swapaxes(-1, -2)).max(initial=0.0)
        if asym > SYMMETRY_RTOL * np.abs(K).max(initial=0.0):
            raise NotPositiveDefinite("matrix is not symmetric")
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    d = L.diagonal(axis1=-2, axis2=-1)
    floor = PIVOT_FLOOR * K.diagonal(axis1=-2, axis2=-1).max(axis=-1, keepdims=True)
    if not ((floor > 0.0).all() and (d * d > floor).all()):
        raise NotPositiveDefinite("pivot below floor")
    return L


def spd_inverse(K):
    """Inverse of a symmetric positive definite matrix through its Cholesky factor."""
    L = cholesky_lower(K)
    Linv = np.linalg.inv(L)
    inv = Linv.T @ Linv
    return 0.5 * (inv + inv.T)


def det_sign_and_logabs(A):
    """(sign, log|det A|). Singular matrices give (0, -inf).

    Integer input goes through the exact fraction-free path so that the sign
    is never a rounding artefact.
    """
    arr = np.asarray(A)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {arr.shape}")
    if np.issubdtype(arr.dtype, np.integer):
        d = int_det(arr)
        if d == 0:
            return 0, -math.inf
        return (1 if d > 0 else -1), math.log(abs(d))
    sign, logabs = np.linalg.slogdet(arr.astype(float))
    if sign == 0:
        return 0, -math.inf
    return int(sign), float(logabs)


def int_det(A):
    """Exact determinant of an integer matrix (Bareiss elimination)."""
    M = [[int(x) for x in row] for row in np.asarray(A).tolist()]
    n = len(M)
    if any(len(row) != n for row in M):
        raise DimensionMismatch("expected a square matrix")
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for r in range(k + 1, n):
                if M[r][k] != 0:
                    M[k], M[r] = M[r], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def int_rank(rows):
    """Exact rank of a list of integer vectors."""
    M = [[int(x) for x in row] for row in rows]
    if not M:
        return 0
    ncols = len(M[0])
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(M)) if M[r][col] != 0), None)
        if pivot is None:
            continue
        M[rank], M[pivot] = M[pivot], M[rank]
        p = M[rank][col]
        for r in range(rank + 1, len(M)):
            f = M[r][col]
            if f:
                row = [M[r][j] * p - f * M[rank][j] for j in range(ncols)]
                g = math.gcd(*row)
                M[r] = [x // g for x in row] if g > 1 else row
        rank += 1
        if rank == len(M):
            break
    return rank


def is_unimodular(A):
    return abs(int_det(A)) == 1
