"""Integer-matrix search over the quadratic form a @ M @ a.T.

Every reduction here returns an integer matrix U whose rows are coefficient
vectors; the lattice vectors themselves are U @ G where G @ G.T == M. The
routines only ever touch M (inner products), never G, and keep U in Python
integers so size reduction cannot drift.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import comb, floor

import numpy as np

from .errors import CapacityExceeded, DimensionMismatch, NotPositiveDefinite
from .numerics import cholesky_lower, int_rank

DEFAULT_DELTA = 0.75
DEFAULT_L1_BOUND = 15
DEFAULT_CAP = 10**7


def _gram(M):
    M = np.asarray(M, dtype=float)
    cholesky_lower(M)  # certifies SPD
    return M


def row_forms(U, M):
    """Quadratic form of each row of U, i.e. diag(U @ M @ U.T)."""
    U = np.asarray(U, dtype=float)
    return np.einsum("ij,jk,ik->i", U, np.asarray(M, dtype=float), U)


def score(U, M):
    """Largest row quadratic form; the min-max objective of IF selection."""
    return float(np.max(row_forms(U, M)))


def canonical_signs(U):
    """Flip rows so that the first nonzero entry of each row is positive."""
    U = np.array(U, dtype=np.int64)
    for row in U:
        nz = np.flatnonzero(row)
        if nz.size and row[nz[0]] < 0:
            row *= -1
    return U


def _round(x):
    return int(floor(x + 0.5))


class _GramBasis:
    """Integer coefficient rows U with cached products U @ M."""

    def __init__(self, M, U=None):
        self.M = M.tolist()
        self.n = len(self.M)
        n = self.n
        if U is None:
            U = [[int(i == j) for j in range(n)] for i in range(n)]
        self.U = [list(map(int, row)) for row in U]
        self.V = [self._times_m(row) for row in self.U]

    def _times_m(self, u):
        M, n = self.M, self.n
        return [sum(u[i] * M[i][j] for i in range(n) if u[i]) for j in range(n)]

    def dot(self, k, j):
        v, u = self.V[k], self.U[j]
        return sum(v[i] * u[i] for i in range(self.n) if u[i])

    def sub(self, k, l, q):
        self.U[k] = [a - q * b for a, b in zip(self.U[k], self.U[l])]
        self.V[k] = self._times_m(self.U[k])

    def swap(self, k, l):
        self.U[k], self.U[l] = self.U[l], self.U[k]
        self.V[k], self.V[l] = self.V[l], self.V[k]


def _lll(basis, delta):
    n = basis.n
    if n == 1:
        return
    mu = [[0.0] * n for _ in range(n)]
    B = [0.0] * n

    def gram_schmidt_row(k):
        for j in range(k):
            r = basis.dot(k, j) - sum(mu[j][i] * mu[k][i] * B[i] for i in range(j))
            mu[k][j] = r / B[j]
        B[k] = basis.dot(k, k) - sum(mu[k][j] ** 2 * B[j] for j in range(k))
        if not B[k] > 0.0:
            raise NotPositiveDefinite("degenerate Gram-Schmidt norm in LLL")

    def size_reduce(k, l):
        if abs(mu[k][l]) > 0.5:
            q = _round(mu[k][l])
            basis.sub(k, l, q)
            mu[k][l] -= q
            for i in range(l):
                mu[k][i] -= q * mu[l][i]

    gram_schmidt_row(0)
    kmax, k = 0, 1
    while k < n:
        if k > kmax:
            gram_schmidt_row(k)
            kmax = k
        size_reduce(k, k - 1)
        if B[k] < (delta - mu[k][k - 1] ** 2) * B[k - 1]:
            basis.swap(k, k - 1)
            # Rows >= k-1 changed; recompute their Gram-Schmidt data lazily.
            if k == 1:
                gram_schmidt_row(0)
                kmax = 0
            else:
                k -= 1
                kmax = k - 1
        else:
            for l in range(k - 2, -1, -1):
                size_reduce(k, l)
            k += 1


def lll_reduce(M, delta=DEFAULT_DELTA):
    """LLL-reduce the lattice whose Gram matrix is M.

    Returns a unimodular integer matrix U such that the basis U @ G (with
    G @ G.T == M) is size-reduced and satisfies the Lovasz condition with
    parameter ``delta``.
    """
    if not 0.25 < delta < 1.0:
        raise ValueError("delta must lie in (0.25, 1)")
    M = _gram(M)
    basis = _GramBasis(M)
    _lll(basis, delta)
    return canonical_signs(basis.U)


def lagrange_reduce(M):
    """Exact two-dimensional reduction: rows attain both successive minima."""
    M = _gram(M)
    if M.shape != (2, 2):
        raise DimensionMismatch("Lagrange reduction needs a 2x2 Gram matrix")
    (m00, m01), (_, m11) = M.tolist()

    def bil(u, v):
        return u[0] * (m00 * v[0] + m01 * v[1]) + u[1] * (m01 * v[0] + m11 * v[1])

    a, b = (1, 0), (0, 1)
    qa, qb = m00, m11
    if qb < qa:
        a, b, qa, qb = b, a, qb, qa
    while True:
        q = _round(bil(a, b) / qa)
        if q:
            b = (b[0] - q * a[0], b[1] - q * a[1])
            qb = bil(b, b)
        if qb < qa:
            a, b, qa, qb = b, a, qb, qa
            continue
        break
    return canonical_signs([a, b])


def _size_reduce_all(basis):
    """Size-reduce every row against its predecessors (keeps the GS profile)."""
    n = basis.n
    Q = np.array([[basis.dot(k, j) for j in range(n)] for k in range(n)])
    R = cholesky_lower(0.5 * (Q + Q.T))
    mu = (R / np.diag(R)).tolist()
    for k in range(1, n):
        for l in range(k - 1, -1, -1):
            if abs(mu[k][l]) > 0.5:
                q = _round(mu[k][l])
                basis.sub(k, l, q)
                for i in range(l + 1):
                    mu[k][i] -= q * mu[l][i]


def kz_reduce_approx(M, delta=0.99):
    """Approximate Korkin-Zolotarev reduction by LLL on shrinking projections.

    Step k LLL-reduces the projection of rows k.. onto the orthogonal
    complement of rows ..k-1 and applies the resulting unimodular transform
    to those rows, so the lattice dimension drops by one per step. A final
    size reduction shortens the rows without changing the profile.
    """
    M = _gram(M)
    n = M.shape[0]
    U = np.eye(n, dtype=np.int64)
    for k in range(n - 1):
        Q = U @ M @ U.T
        if k == 0:
            P = Q
        else:
            P = Q[k:, k:] - Q[k:, :k] @ np.linalg.solve(Q[:k, :k], Q[:k, k:])
        P = 0.5 * (P + P.T)
        sub = _GramBasis(P)
        _lll(sub, delta)
        V = np.array(sub.U, dtype=np.int64)
        U[k:] = V @ U[k:]
    basis = _GramBasis(M, U.tolist())
    _size_reduce_all(basis)
    return canonical_signs(basis.U)


@dataclass(frozen=True)
class RowCandidateSet:
    l1_bound: int
    rows: np.ndarray


def l1_ball_count(dim, bound):
    """Number of integer points with l1 norm <= bound in dimension dim."""
    return sum(2**k * comb(dim, k) * comb(bound, k) for k in range(min(dim, bound) + 1))


@lru_cache(maxsize=32)
def _enumerate(dim, bound):
    out = []

    def rec(prefix, remaining, leading):
        if len(prefix) == dim:
            if not leading:
                out.append(tuple(prefix))
            return
        lo = 0 if leading else -remaining
        for v in range(lo, remaining + 1):
            rec(prefix + [v], remaining - abs(v), leading and v == 0)

    rec([], bound, True)
    out.sort()
    rows = np.array(out, dtype=np.int64).reshape(-1, dim)
    rows.setflags(write=False)
    return rows


def enumerate_rows(dim, l1_bound=DEFAULT_L1_BOUND, cap=DEFAULT_CAP):
    """All sign-canonical nonzero integer vectors with l1 norm <= l1_bound."""
    if dim < 1 or l1_bound < 1:
        raise ValueError("dim and l1_bound must be positive")
    count = (l1_ball_count(dim, l1_bound) - 1) // 2
    if count > cap:
        raise CapacityExceeded(f"{count} candidate rows exceed the cap of {cap}")
    return RowCandidateSet(l1_bound, _enumerate(dim, l1_bound))


def greedy_independent(rows, cost):
    """Indices of len(rows[0]) independent rows picked in ascending cost order.

    Picking greedily over a cost-sorted list is optimal for the min-max
    objective because linearly independent sets form a matroid. Ties go to
    the earlier (lexicographically smaller) row since the sort is stable.
    """
    dim = rows.shape[1]
    order = np.argsort(cost, kind="stable")
    chosen = []
    for idx in order:
        trial = chosen + [int(idx)]
        if dim == 2 and len(chosen) == 1:
            a, b = rows[chosen[0]], rows[idx]
            independent = a[0] * b[1] - a[1] * b[0] != 0
        else:
            independent = int_rank(rows[trial]) == len(trial)
        if independent:
            chosen = trial
            if len(chosen) == dim:
                return chosen
    raise CapacityExceeded("candidate set does not span the space")


def exhaustive_sivp(M, l1_bound=DEFAULT_L1_BOUND, cap=DEFAULT_CAP):
    """Best independent set of rows within the l1 budget (min of max row form)."""
    M = _gram(M)
    cand = enumerate_rows(M.shape[0], l1_bound, cap).rows
    forms = row_forms(cand, M)
    return cand[greedy_independent(cand, forms)].copy()
