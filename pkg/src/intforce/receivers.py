"""Achievable-rate functionals and integer-matrix selection strategies.

Rates are in bits per real dimension. ``per_row_variance`` in a RateReport
is an array of shape (blocks, n_t) in units of sigma^2:

* IF family: a_m @ M_i @ a_m.T
* SIF family: squared Cholesky diagonal of A @ M_i @ A.T
* AM-SIF-SNC: squared Cholesky diagonal of A @ M_AM @ A.T, repeated per block

AM functionals average the variances over blocks before taking the log;
GM functionals apply log+ block by block and then average, which keeps the
clipping per block rather than using the unclipped geometric mean.

Method table (functional, selection):

=============  ===========  ==============================================
method         functional   selection
=============  ===========  ==============================================
am-mmse        AM-IF        identity
gm-mmse        GM-IF        identity
am-if          AM-IF        LLL (Lagrange for n_t=2) on M_AM
gm-if          GM-IF        LLL (Lagrange for n_t=2) on M_AM
am-sif         AM-SIF       LLL (Lagrange for n_t=2) on M_AM
gm-sif         GM-SIF       LLL (Lagrange for n_t=2) on M_AM
am-sif-snc     AM-SIF-SNC   approximate KZ on M_AM
am-sic         AM-SIF       best row permutation of the identity
gm-sic         GM-SIF       best row permutation of the identity
prop1          GM-IF        best of {I, A_AM-IF}
prop2          GM-IF        best of {I, A_AM-IF, A_(1), ..., A_(F)}
prop3          AM-SIF       approximate KZ on M_AM
prop4          GM-SIF       best of {KZ(M_AM), KZ(M_1), ..., KZ(M_F)}
exh-gm-if      GM-IF        exhaustive over rows with l1 <= bound
exh-am-sif     AM-SIF       exhaustive ordered row pairs (n_t = 2)
exh-gm-sif     GM-SIF       exhaustive ordered row pairs (n_t = 2)
=============  ===========  ==============================================
"""
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from itertools import permutations

import numpy as np

from .errors import CapacityExceeded, RankDeficient, UnsupportedDimension
from .lattice import (
    DEFAULT_L1_BOUND,
    enumerate_rows,
    greedy_independent,
    kz_reduce_approx,
    lagrange_reduce,
    lll_reduce,
)
from .numerics import cholesky_lower, int_det

SIC_PERMUTATION_CAP = 8
SIF_TUPLE_CAP = 10**8


class Flavor(str, Enum):
    AM = "AM"
    GM = "GM"


class MethodKind(str, Enum):
    AM_MMSE = "am-mmse"
    GM_MMSE = "gm-mmse"
    AM_IF = "am-if"
    GM_IF = "gm-if"
    AM_SIC = "am-sic"
    GM_SIC = "gm-sic"
    AM_SIF = "am-sif"
    GM_SIF = "gm-sif"
    AM_SIF_SNC = "am-sif-snc"
    PROP1 = "prop1"
    PROP2 = "prop2"
    PROP3 = "prop3"
    PROP4 = "prop4"
    EXH_GM_IF = "exh-gm-if"
    EXH_AM_SIF = "exh-am-sif"
    EXH_GM_SIF = "exh-gm-sif"

    @classmethod
    def parse(cls, name):
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("_", "-")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown method {name!r}; choose from {[m.value for m in cls]}") from None

    @property
    def flavor(self):
        return _FUNCTIONAL[self][1]

    @property
    def family(self):
        return _FUNCTIONAL[self][0]

    @property
    def is_exhaustive(self):
        return self.value.startswith("exh-")


_FUNCTIONAL = {
    MethodKind.AM_MMSE: ("IF", Flavor.AM),
    MethodKind.GM_MMSE: ("IF", Flavor.GM),
    MethodKind.AM_IF: ("IF", Flavor.AM),
    MethodKind.GM_IF: ("IF", Flavor.GM),
    MethodKind.AM_SIC: ("SIF", Flavor.AM),
    MethodKind.GM_SIC: ("SIF", Flavor.GM),
    MethodKind.AM_SIF: ("SIF", Flavor.AM),
    MethodKind.GM_SIF: ("SIF", Flavor.GM),
    MethodKind.AM_SIF_SNC: ("SNC", Flavor.AM),
    MethodKind.PROP1: ("IF", Flavor.GM),
    MethodKind.PROP2: ("IF", Flavor.GM),
    MethodKind.PROP3: ("SIF", Flavor.AM),
    MethodKind.PROP4: ("SIF", Flavor.GM),
    MethodKind.EXH_GM_IF: ("IF", Flavor.GM),
    MethodKind.EXH_AM_SIF: ("SIF", Flavor.AM),
    MethodKind.EXH_GM_SIF: ("SIF", Flavor.GM),
}


@dataclass(frozen=True)
class RateReport:
    method: MethodKind
    a_matrix: np.ndarray
    per_row_variance: np.ndarray
    rate: float
    flavor: Flavor
    note: str = ""

    def recompute(self, snr):
        return functional_rate(self.per_row_variance, snr, self.flavor)


@dataclass(frozen=True)
class SuccessiveProfile:
    l_per_block: np.ndarray  # (blocks, n_t, n_t)

    @property
    def squared_diagonals(self):
        d = np.diagonal(self.l_per_block, axis1=-2, axis2=-1)
        return d * d


def half_log_plus(snr, variance):
    """0.5 * log2+(snr / variance), elementwise."""
    return np.maximum(0.5 * np.log2(snr / np.asarray(variance, dtype=float)), 0.0)


def am_rate_per_row(variance, snr):
    return half_log_plus(snr, np.mean(variance, axis=0))


def gm_rate_per_row(variance, snr):
    return np.mean(half_log_plus(snr, variance), axis=0)


def functional_rate(variance, snr, flavor):
    per_row = am_rate_per_row(variance, snr) if flavor == Flavor.AM else gm_rate_per_row(variance, snr)
    return float(np.min(per_row))


def _integer_matrix(A, n_t):
    A = np.asarray(A, dtype=np.int64)
    if A.shape != (n_t, n_t):
        raise RankDeficient(f"A must be {n_t}x{n_t}, got {A.shape}")
    if int_det(A) == 0:
        raise RankDeficient("integer matrix is singular")
    return A


def if_variances(bundle, A):
    A = np.asarray(A, dtype=float)
    return np.einsum("mj,fjk,mk->fm", A, bundle.m_per_block, A)


def _report(method, A, var, snr, flavor, note=""):
    return RateReport(method, np.asarray(A, dtype=np.int64), var, functional_rate(var, snr, flavor), flavor, note)


def rate_am_if(bundle, A, method=MethodKind.AM_IF):
    A = _integer_matrix(A, bundle.n_t)
    return _report(method, A, if_variances(bundle, A), bundle.snr, Flavor.AM)


def rate_gm_if(bundle, A, method=MethodKind.GM_IF):
    A = _integer_matrix(A, bundle.n_t)
    return _report(method, A, if_variances(bundle, A), bundle.snr, Flavor.GM)


def rate_mmse(bundle, flavor):
    eye = np.eye(bundle.n_t, dtype=np.int64)
    if Flavor(flavor) == Flavor.AM:
        return rate_am_if(bundle, eye, MethodKind.AM_MMSE)
    return rate_gm_if(bundle, eye, MethodKind.GM_MMSE)


def successive_profile(bundle, A):
    """Per-block Cholesky factors of A @ M_i @ A.T (units of sigma^2)."""
    A = _integer_matrix(A, bundle.n_t).astype(float)
    K = A @ bundle.m_per_block @ A.T
    K = 0.5 * (K + np.swapaxes(K, -1, -2))
    return SuccessiveProfile(cholesky_lower(K, check_symmetry=False))


def rate_am_sif(bundle, A, method=MethodKind.AM_SIF):
    var = successive_profile(bundle, A).squared_diagonals
    return _report(method, A, var, bundle.snr, Flavor.AM)


def rate_gm_sif(bundle, A, method=MethodKind.GM_SIF):
    var = successive_profile(bundle, A).squared_diagonals
    return _report(method, A, var, bundle.snr, Flavor.GM)


def rate_am_sif_snc(bundle, A, method=MethodKind.AM_SIF_SNC):
    A = _integer_matrix(A, bundle.n_t).astype(float)
    K = A @ bundle.m_am @ A.T
    L = cholesky_lower(0.5 * (K + K.T), check_symmetry=False)
    d2 = np.diag(L) ** 2
    var = np.tile(d2, (bundle.blocks, 1))
    return _report(method, A, var, bundle.snr, Flavor.AM)


def _reduce(M):
    return lagrange_reduce(M) if M.shape[0] == 2 else lll_reduce(M)


def select_am_if(bundle):
    """Approximate AM-IF optimum: lattice reduction of M_AM."""
    return _reduce(bundle.m_am)


def select_per_block_if(bundle):
    return [_reduce(M) for M in bundle.m_per_block]


def _best(reports):
    """First report with the highest rate (list order breaks ties)."""
    best = reports[0]
    for r in reports[1:]:
        if r.rate > best.rate:
            best = r
    return best


class _Selections:
    """Per-bundle memo of the reductions shared between methods."""

    def __init__(self, bundle):
        self.bundle = bundle
        self._memo = {}

    def get(self, key, fn):
        if key not in self._memo:
            self._memo[key] = fn(self.bundle)
        return self._memo[key]

    @property
    def am_if(self):
        return self.get("am_if", select_am_if)

    @property
    def per_block_if(self):
        return self.get("per_block_if", select_per_block_if)

    @property
    def kz_am(self):
        return self.get("kz_am", lambda b: kz_reduce_approx(b.m_am))

    @property
    def kz_blocks(self):
        return self.get("kz_blocks", lambda b: [kz_reduce_approx(M) for M in b.m_per_block])


def prop1(bundle, sel=None):
    """GM-IF with the better of the identity and the AM-IF matrix."""
    sel = sel or _Selections(bundle)
    eye = np.eye(bundle.n_t, dtype=np.int64)
    r_am = rate_gm_if(bundle, sel.am_if, MethodKind.PROP1)
    r_eye = rate_gm_if(bundle, eye, MethodKind.PROP1)
    return r_eye if r_eye.rate > r_am.rate else r_am


def prop2(bundle, sel=None):
    """GM-IF over {I, A_AM-IF, A_(1), ..., A_(F)}."""
    sel = sel or _Selections(bundle)
    cands = [np.eye(bundle.n_t, dtype=np.int64), sel.am_if, *sel.per_block_if]
    return _best([rate_gm_if(bundle, A, MethodKind.PROP2) for A in cands])


def prop3(bundle, sel=None):
    """AM-SIF with the matrix that (approximately) maximises AM-SIF-SNC."""
    sel = sel or _Selections(bundle)
    return rate_am_sif(bundle, sel.kz_am, MethodKind.PROP3)


def prop4(bundle, sel=None):
    """GM-SIF over {A_AM-SIF-SNC, A_SIF,(1), ..., A_SIF,(F)}; identity excluded."""
    sel = sel or _Selections(bundle)
    cands = [sel.kz_am, *sel.kz_blocks]
    return _best([rate_gm_sif(bundle, A, MethodKind.PROP4) for A in cands])


def _greedy_sic_order(bundle, flavor):
    var = if_variances(bundle, np.eye(bundle.n_t))
    per_user = np.mean(var, axis=0) if flavor == Flavor.AM else np.exp(np.mean(np.log(var), axis=0))
    order = np.argsort(per_user, kind="stable")
    return np.eye(bundle.n_t, dtype=np.int64)[order]


def sic_best_permutation(bundle, flavor, permutation_cap=SIC_PERMUTATION_CAP):
    """Conventional SIC: best decoding order over all row permutations of I.

    Beyond ``permutation_cap`` users the search is replaced by the
    strongest-user-first ordering and the report is flagged in ``note``.
    """
    flavor = Flavor(flavor)
    n = bundle.n_t
    method = MethodKind.AM_SIC if flavor == Flavor.AM else MethodKind.GM_SIC
    rate_fn = rate_am_sif if flavor == Flavor.AM else rate_gm_sif
    if n > permutation_cap:
        A = _greedy_sic_order(bundle, flavor)
        r = rate_fn(bundle, A, method)
        return RateReport(r.method, r.a_matrix, r.per_row_variance, r.rate, r.flavor, "greedy-order")
    perms = np.array(list(permutations(range(n))), dtype=np.intp)
    Ms = bundle.m_per_block
    K = Ms[:, perms[:, :, None], perms[:, None, :]]  # (blocks, P, n, n)
    L = cholesky_lower(K, check_symmetry=False)
    d2 = L.diagonal(axis1=-2, axis2=-1) ** 2  # (blocks, P, n)
    if flavor == Flavor.AM:
        per_row = half_log_plus(bundle.snr, np.mean(d2, axis=0))
    else:
        per_row = np.mean(half_log_plus(bundle.snr, d2), axis=0)
    best = int(np.argmax(np.min(per_row, axis=1)))
    A = np.eye(n, dtype=np.int64)[perms[best]]
    return rate_fn(bundle, A, method)


@lru_cache(maxsize=8)
def _min_det_partner(l1_bound):
    """For each 2-D candidate row, the smallest nonzero |det| with another candidate."""
    C = enumerate_rows(2, l1_bound).rows
    if len(C) ** 2 > SIF_TUPLE_CAP:
        raise CapacityExceeded("ordered row tuples exceed the evaluation cap")
    det = np.abs(C[:, None, 0] * C[None, :, 1] - C[:, None, 1] * C[None, :, 0]).astype(float)
    det[det == 0] = np.inf
    partner = np.argmin(det, axis=1)
    dmin = det[np.arange(len(C)), partner]
    return dmin, partner


_EXH_TARGET = {
    MethodKind.EXH_GM_IF: MethodKind.EXH_GM_IF,
    MethodKind.GM_IF: MethodKind.EXH_GM_IF,
    MethodKind.AM_IF: MethodKind.AM_IF,
    MethodKind.EXH_AM_SIF: MethodKind.EXH_AM_SIF,
    MethodKind.AM_SIF: MethodKind.EXH_AM_SIF,
    MethodKind.EXH_GM_SIF: MethodKind.EXH_GM_SIF,
    MethodKind.GM_SIF: MethodKind.EXH_GM_SIF,
}


def exhaustive_best(bundle, functional, l1_bound=DEFAULT_L1_BOUND):
    """Optimal A within the l1 row budget for an IF or SIF functional.

    IF functionals are row-separable, so the best independent set comes
    from the matroid greedy over rows sorted by their own score. SIF
    functionals are only supported for two users: for an ordered pair
    (a1, a2) the Cholesky profile of A @ M_i @ A.T is
    (a1 M_i a1.T, det(A)^2 det(M_i) / a1 M_i a1.T), so every ordered pair is
    covered by scanning a1 and pairing it with the partner of smallest
    nonzero |det| (which is the best partner for every block at once).
    """
    functional = MethodKind(functional)
    if functional not in _EXH_TARGET:
        raise ValueError(f"no exhaustive search for {functional.value}")
    method = _EXH_TARGET[functional]
    flavor = method.flavor
    n = bundle.n_t
    snr = bundle.snr
    Ms = bundle.m_per_block
    if method.family == "IF":
        C = enumerate_rows(n, l1_bound).rows
        Cf = C.astype(float)
        q = np.einsum("kj,fjl,kl->fk", Cf, Ms, Cf)
        if flavor == Flavor.AM:
            cost = np.mean(q, axis=0)
            A = C[greedy_independent(C, cost)]
            return rate_am_if(bundle, A, method)
        cost = -np.mean(half_log_plus(snr, q), axis=0)
        A = C[greedy_independent(C, cost)]
        return rate_gm_if(bundle, A, method)
    if n != 2:
        raise UnsupportedDimension("exhaustive SIF search supports two users only")
    C = enumerate_rows(2, l1_bound).rows
    dmin, partner = _min_det_partner(l1_bound)
    Cf = C.astype(float)
    q1 = np.einsum("kj,fjl,kl->fk", Cf, Ms, Cf)
    det_m = Ms[:, 0, 0] * Ms[:, 1, 1] - Ms[:, 0, 1] * Ms[:, 1, 0]
    q2 = dmin[None, :] ** 2 * det_m[:, None] / q1
    if flavor == Flavor.AM:
        r1 = half_log_plus(snr, np.mean(q1, axis=0))
        r2 = half_log_plus(snr, np.mean(q2, axis=0))
    else:
        r1 = np.mean(half_log_plus(snr, q1), axis=0)
        r2 = np.mean(half_log_plus(snr, q2), axis=0)
    k = int(np.argmax(np.minimum(r1, r2)))
    A = np.stack([C[k], C[partner[k]]])
    fn = rate_am_sif if flavor == Flavor.AM else rate_gm_sif
    return fn(bundle, A, method)


def evaluate(bundle, method, l1_bound=DEFAULT_L1_BOUND, sel=None):
    """Rate report of one method on one bundle."""
    method = MethodKind.parse(method) if not isinstance(method, MethodKind) else method
    sel = sel or _Selections(bundle)
    M = MethodKind
    if method == M.AM_MMSE:
        return rate_mmse(bundle, Flavor.AM)
    if method == M.GM_MMSE:
        return rate_mmse(bundle, Flavor.GM)
    if method == M.AM_IF:
        return rate_am_if(bundle, sel.am_if)
    if method == M.GM_IF:
        return rate_gm_if(bundle, sel.am_if)
    if method == M.AM_SIF:
        return rate_am_sif(bundle, sel.am_if)
    if method == M.GM_SIF:
        return rate_gm_sif(bundle, sel.am_if)
    if method == M.AM_SIF_SNC:
        return rate_am_sif_snc(bundle, sel.kz_am)
    if method == M.AM_SIC:
        return sic_best_permutation(bundle, Flavor.AM)
    if method == M.GM_SIC:
        return sic_best_permutation(bundle, Flavor.GM)
    if method == M.PROP1:
        return prop1(bundle, sel)
    if method == M.PROP2:
        return prop2(bundle, sel)
    if method == M.PROP3:
        return prop3(bundle, sel)
    if method == M.PROP4:
        return prop4(bundle, sel)
    return exhaustive_best(bundle, method, l1_bound)


def evaluate_all(bundle, methods, l1_bound=DEFAULT_L1_BOUND):
    """Reports for several methods on one bundle, sharing the reductions."""
    sel = _Selections(bundle)
    return {MethodKind(m): evaluate(bundle, m, l1_bound, sel) for m in methods}
