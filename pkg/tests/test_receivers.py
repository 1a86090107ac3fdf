from itertools import combinations, permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intforce.channel import BlockChannel, ChannelConfig, make_bundle, sample_channel
from intforce.errors import RankDeficient, UnsupportedDimension
from intforce.lattice import enumerate_rows
from intforce.numerics import int_det
from intforce.receivers import (
    Flavor,
    MethodKind,
    evaluate,
    evaluate_all,
    exhaustive_best,
    half_log_plus,
    prop1,
    prop2,
    rate_am_if,
    rate_am_sif,
    rate_am_sif_snc,
    rate_gm_if,
    rate_gm_sif,
    sic_best_permutation,
)

TOL = 1e-12


def bundle_for(seed, n=2, blocks=2, snr_db=20.0, trial=0):
    return make_bundle(sample_channel(ChannelConfig.from_db(n, n, blocks, snr_db), seed, trial))


def identity_bundle(snr=1.0, blocks=2):
    cfg = ChannelConfig(2, 2, blocks, snr)
    return make_bundle(BlockChannel(cfg, np.stack([np.eye(2)] * blocks)))


def test_identity_half_bit():
    b = identity_bundle()
    eye = np.eye(2, dtype=int)
    for fn in (rate_am_if, rate_gm_if, rate_am_sif, rate_gm_sif, rate_am_sif_snc):
        assert fn(b, eye).rate == pytest.approx(0.5, abs=1e-12)


def test_parse():
    assert MethodKind.parse("PROP2") is MethodKind.PROP2
    assert MethodKind.parse("exh_gm_if") is MethodKind.EXH_GM_IF
    assert MethodKind.parse(MethodKind.AM_IF) is MethodKind.AM_IF
    with pytest.raises(ValueError):
        MethodKind.parse("nope")


def test_rank_deficient():
    with pytest.raises(RankDeficient):
        rate_am_if(bundle_for(0), np.array([[1, 1], [2, 2]]))


def test_half_log_plus_clips():
    assert half_log_plus(1.0, 4.0) == 0.0
    assert half_log_plus(4.0, 1.0) == pytest.approx(1.0)


def test_recompute():
    b = bundle_for(1)
    r = evaluate(b, MethodKind.PROP2)
    assert r.recompute(b.snr) == pytest.approx(r.rate, abs=1e-12)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 30), st.integers(2, 3))
def test_dominance_per_matrix(seed, snr_db, n):
    b = bundle_for(seed, n, 2, snr_db)
    A = evaluate(b, MethodKind.AM_IF).a_matrix
    assert rate_gm_if(b, A).rate >= rate_am_if(b, A).rate - TOL
    assert rate_gm_sif(b, A).rate >= rate_am_sif(b, A).rate - TOL
    assert rate_am_sif(b, A).rate >= rate_am_if(b, A).rate - TOL
    assert rate_gm_sif(b, A).rate >= rate_gm_if(b, A).rate - TOL
    assert rate_am_sif(b, A).rate >= rate_am_sif_snc(b, A).rate - TOL


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6), st.floats(0, 30))
def test_proposed_ordering(seed, snr_db):
    reps = evaluate_all(bundle_for(seed, 2, 2, snr_db), list(MethodKind))
    r = {k: v.rate for k, v in reps.items()}
    assert r[MethodKind.PROP2] >= r[MethodKind.PROP1] - TOL
    assert r[MethodKind.PROP1] >= max(r[MethodKind.GM_MMSE], r[MethodKind.AM_IF]) - TOL
    assert r[MethodKind.EXH_GM_SIF] >= r[MethodKind.GM_SIC] - TOL
    assert r[MethodKind.EXH_AM_SIF] >= r[MethodKind.AM_SIC] - TOL


def test_static_collapse():
    for seed in range(20):
        b = bundle_for(seed, 2, 1)
        A = evaluate(b, MethodKind.AM_IF).a_matrix
        assert rate_gm_if(b, A).rate == rate_am_if(b, A).rate
        assert rate_gm_sif(b, A).rate == rate_am_sif(b, A).rate
        assert rate_am_sif_snc(b, A).rate == rate_am_sif(b, A).rate


def test_prop1_tie_prefers_am_if():
    b = identity_bundle(snr=10.0)
    r = prop1(b)
    assert np.array_equal(r.a_matrix, evaluate(b, MethodKind.AM_IF).a_matrix)
    assert prop2(b).rate == r.rate


def test_sic_is_best_permutation():
    for seed in range(10):
        b = bundle_for(seed, 3, 2, 15)
        for flavor, fn in ((Flavor.AM, rate_am_sif), (Flavor.GM, rate_gm_sif)):
            best = max(fn(b, np.eye(3, dtype=int)[list(p)]).rate for p in permutations(range(3)))
            assert sic_best_permutation(b, flavor).rate == pytest.approx(best, abs=1e-12)


def test_sic_greedy_beyond_cap():
    r = sic_best_permutation(bundle_for(0, 3, 2, 15), Flavor.GM, permutation_cap=2)
    assert r.note == "greedy-order"


def _brute_sif(b, fn, bound):
    cand = enumerate_rows(2, bound).rows
    best = -1.0
    for i, j in combinations(range(len(cand)), 2):
        for A in (cand[[i, j]], cand[[j, i]]):
            if int_det(A) != 0:
                best = max(best, fn(b, A).rate)
    return best


@pytest.mark.parametrize("seed", range(4))
def test_exhaustive_sif_matches_brute_force(seed):
    b = bundle_for(seed, 2, 2, 20)
    assert exhaustive_best(b, MethodKind.EXH_AM_SIF, 4).rate == pytest.approx(_brute_sif(b, rate_am_sif, 4), abs=1e-12)
    assert exhaustive_best(b, MethodKind.EXH_GM_SIF, 4).rate == pytest.approx(_brute_sif(b, rate_gm_sif, 4), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_exhaustive_if_matches_brute_force(seed):
    b = bundle_for(seed, 2, 2, 20)
    cand = enumerate_rows(2, 4).rows
    best = max(
        rate_gm_if(b, cand[[i, j]]).rate
        for i, j in combinations(range(len(cand)), 2)
        if int_det(cand[[i, j]]) != 0
    )
    assert exhaustive_best(b, MethodKind.EXH_GM_IF, 4).rate == pytest.approx(best, abs=1e-12)


def test_exhaustive_sif_needs_two_users():
    with pytest.raises(UnsupportedDimension):
        exhaustive_best(bundle_for(0, 3), MethodKind.EXH_GM_SIF)
