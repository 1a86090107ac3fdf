"""Rate-1/F root LDPC codes and a log-domain sum-product decoder.

Column layout: block j (0-based) occupies columns j*n/F .. (j+1)*n/F, and
its first n/F^2 columns carry information bits. Check rows come in F groups
of F-1 sub-rows, each n/F^2 checks tall. In group i, every sub-row has the
identity over the information bits of block i and exactly one "free"
sub-block against another block j: j = k when k < i, j = k + 1 otherwise.
"""
from dataclasses import dataclass

import numpy as np

from ..channel import Stream, stream_rng
from ..errors import BadLength, BadShape, ConstructionFailed

COLUMN_WEIGHT = 3
CYCLE_RETRIES = 100
MAX_REDRAWS = 50
LLR_CLAMP = 30.0
MAX_ITERS = 50


def gf2_inverse(M):
    """Inverse over GF(2), or None when M is singular."""
    M = (np.asarray(M) & 1).astype(np.uint8)
    n = M.shape[0]
    aug = np.concatenate([M, np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        rows = np.flatnonzero(aug[col:, col]) + col
        if rows.size == 0:
            return None
        p = rows[0]
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        others = np.flatnonzero(aug[:, col])
        others = others[others != col]
        aug[others] ^= aug[col]
    return aug[:, n:].copy()


def gf2_matmul(A, B):
    return (np.asarray(A, dtype=np.int64) @ np.asarray(B, dtype=np.int64)) & 1


def free_subblocks(f):
    """(group i, sub-row k, block j) triples of the randomly filled sub-blocks."""
    out = []
    for i in range(f):
        for k in range(f - 1):
            out.append((i, k, k if k < i else k + 1))
    return out


def structure_mask(n, f):
    """Expected layout: 1 = forced one, 0 = forced zero, -1 = free position."""
    nb, ni = n // f, n // (f * f)
    mask = np.zeros(((f - 1) * nb, n), dtype=np.int8)
    for i in range(f):
        for k in range(f - 1):
            r0 = (i * (f - 1) + k) * ni
            mask[r0:r0 + ni, i * nb:i * nb + ni] = np.eye(ni, dtype=np.int8)
    for i, k, j in free_subblocks(f):
        r0 = (i * (f - 1) + k) * ni
        mask[r0:r0 + ni, j * nb:(j + 1) * nb] = -1
    return mask


def _fill_subblock(rows, cols, rng, weight=COLUMN_WEIGHT):
    """Sparse rows x cols block with column weight ``weight``, avoiding 4-cycles when it can."""
    weight = min(weight, rows)
    block = np.zeros((rows, cols), dtype=np.uint8)
    degree = np.zeros(rows, dtype=np.int64)
    used_pairs = set()
    for c in range(cols):
        pick = None
        for attempt in range(CYCLE_RETRIES):
            # Prefer lightly used rows so the row degrees stay close to regular.
            noise = rng.random(rows)
            if attempt < CYCLE_RETRIES // 2:
                order = np.lexsort((noise, degree))
            else:
                order = np.argsort(noise)
            if attempt == 0:
                cand = np.sort(order[:weight])
            else:
                pool = order[: max(weight, rows // 2 + weight)]
                cand = np.sort(rng.choice(pool, weight, replace=False))
            pairs = {(int(a), int(b)) for x, a in enumerate(cand) for b in cand[x + 1:]}
            pick = cand
            if not pairs & used_pairs:
                break
        pairs = {(int(a), int(b)) for x, a in enumerate(pick) for b in pick[x + 1:]}
        used_pairs |= pairs
        block[pick, c] = 1
        degree[pick] += 1
    return block


@dataclass(frozen=True)
class RootLdpcCode:
    n: int
    f: int
    parity: np.ndarray  # ((f-1)n/f, n) uint8
    info_positions: np.ndarray
    parity_positions: np.ndarray
    encoder_map: np.ndarray  # parity bits = encoder_map @ info bits (mod 2)
    seed: int
    redraws: int

    @property
    def k(self):
        return len(self.info_positions)

    @property
    def rate(self):
        return self.k / self.n

    @property
    def block_length(self):
        return self.n // self.f

    def block_index(self):
        """Fading-block id of every code position."""
        return np.arange(self.n) // self.block_length

    def syndrome(self, word):
        return gf2_matmul(self.parity, np.asarray(word).T).T

    def encode(self, message):
        return encode(self, message)


def _check_shape(n, f):
    if f < 2:
        raise BadShape("root LDPC codes need at least two blocks")
    if n <= 0 or n % (f * f):
        raise BadShape(f"blocklength {n} is not a positive multiple of F^2 = {f * f}")


def draw_parity_matrix(n, f, rng):
    """One random check matrix with the root structure (no invertibility check)."""
    _check_shape(n, f)
    nb, ni = n // f, n // (f * f)
    H = np.clip(structure_mask(n, f), 0, 1).astype(np.uint8)
    for i, k, j in free_subblocks(f):
        r0 = (i * (f - 1) + k) * ni
        H[r0:r0 + ni, j * nb:(j + 1) * nb] = _fill_subblock(ni, nb, rng)
    return H


def build_root_ldpc(n, f, seed=0):
    """Random root LDPC code with the block structure fixed and the free parts filled.

    The whole code is redrawn (with a derived seed) until the parity part of
    the check matrix is invertible over GF(2).
    """
    _check_shape(n, f)
    nb, ni = n // f, n // (f * f)
    info = np.concatenate([np.arange(j * nb, j * nb + ni) for j in range(f)])
    parity_pos = np.setdiff1d(np.arange(n), info)
    for attempt in range(MAX_REDRAWS):
        H = draw_parity_matrix(n, f, stream_rng(seed, attempt, Stream.CODE))
        inv = gf2_inverse(H[:, parity_pos])
        if inv is None:
            continue
        enc = gf2_matmul(inv, H[:, info]).astype(np.uint8)
        H.setflags(write=False)
        enc.setflags(write=False)
        return RootLdpcCode(n, f, H, info, parity_pos, enc, seed, attempt)
    raise ConstructionFailed(f"no invertible parity part after {MAX_REDRAWS} draws; try another seed")


def encode(code, message):
    """Systematic codeword(s): information bits in place, parity from the precomputed solve."""
    msg = np.asarray(message, dtype=np.uint8)
    if msg.shape[-1] != code.k:
        raise BadLength(f"message length {msg.shape[-1]} != {code.k}")
    word = np.zeros(msg.shape[:-1] + (code.n,), dtype=np.uint8)
    word[..., code.info_positions] = msg
    word[..., code.parity_positions] = gf2_matmul(msg, code.encoder_map.T)
    return word


def export_sparse(code):
    """Plain-text sparse format: 'n m' then the 0-based variable indices of each check."""
    m, n = code.parity.shape
    lines = [f"{n} {m}"]
    for row in code.parity:
        lines.append(" ".join(str(v) for v in np.flatnonzero(row)))
    return "\n".join(lines) + "\n"


class _Graph:
    def __init__(self, H):
        ce, ve = np.nonzero(H)  # row-major, so edges are grouped by check
        self.m, self.n = H.shape
        self.ce, self.ve = ce, ve
        self.check_starts = np.flatnonzero(np.r_[True, ce[1:] != ce[:-1]])
        self.var_order = np.argsort(ve, kind="stable")
        vs = ve[self.var_order]
        self.var_starts = np.flatnonzero(np.r_[True, vs[1:] != vs[:-1]])
        if len(self.check_starts) != self.m or len(self.var_starts) != self.n:
            raise BadShape("every check and every variable needs at least one edge")


_GRAPHS = {}


def _graph(code):
    key = id(code.parity)
    g = _GRAPHS.get(key)
    if g is None or g[0] is not code.parity:
        g = (code.parity, _Graph(code.parity))
        _GRAPHS[key] = g
    return g[1]


def bp_decode_batch(code, llr, max_iters=MAX_ITERS):
    """Flooding sum-product on a batch of LLR vectors (positive favours 0).

    Returns (hard words, converged flags, iterations used). A word counts as
    converged once its syndrome is zero and no bit is left exactly undecided.
    """
    g = _graph(code)
    L = np.clip(np.atleast_2d(np.asarray(llr, dtype=float)), -LLR_CLAMP, LLR_CLAMP)
    if L.shape[1] != code.n:
        raise BadLength(f"LLR length {L.shape[1]} != {code.n}")
    batch = L.shape[0]
    words = (L < 0).astype(np.uint8)
    converged = np.zeros(batch, dtype=bool)
    iters = np.zeros(batch, dtype=np.int64)
    active = np.arange(batch)
    La = L
    v2c = La[:, g.ve]
    for it in range(1, max_iters + 1):
        t = np.tanh(0.5 * v2c)
        neg = t < 0
        logmag = np.log(np.maximum(np.abs(t), 1e-300))
        sum_log = np.add.reduceat(logmag, g.check_starts, axis=1)[:, g.ce]
        sum_neg = np.add.reduceat(neg.astype(np.int64), g.check_starts, axis=1)[:, g.ce]
        prod = np.exp(sum_log - logmag)
        prod = np.where((sum_neg - neg) % 2 == 1, -prod, prod)
        c2v = np.clip(2.0 * np.arctanh(np.clip(prod, -1 + 1e-15, 1 - 1e-15)), -LLR_CLAMP, LLR_CLAMP)
        var_sum = np.add.reduceat(c2v[:, g.var_order], g.var_starts, axis=1)
        total = La + var_sum
        hard = (total < 0).astype(np.uint8)
        synd = np.add.reduceat(hard[:, g.ve], g.check_starts, axis=1) & 1
        done = ~synd.any(axis=1) & (total != 0).all(axis=1)
        words[active] = hard
        iters[active] = it
        if done.any():
            converged[active[done]] = True
            keep = ~done
            active, La, total, c2v = active[keep], La[keep], total[keep], c2v[keep]
            if active.size == 0:
                break
        v2c = np.clip(total[:, g.ve] - c2v, -LLR_CLAMP, LLR_CLAMP)
    return words, converged, iters


def bp_decode(code, llr, max_iters=MAX_ITERS):
    """Decode one LLR vector; returns (hard word, converged flag)."""
    words, converged, _ = bp_decode_batch(code, np.asarray(llr, dtype=float)[None, :], max_iters)
    return words[0], bool(converged[0])
