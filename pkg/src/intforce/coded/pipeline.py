"""End-to-end coded chain: encode, dither, transmit, equalize, decode, recover.

Every frame is keyed by (seed, frame index): the channel, the noise, the
messages and the dithers come from their own counter-based streams, so a
frame looks the same whatever SNR or method decodes it and whichever
worker process runs it.
"""
import io
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..channel import ChannelConfig, Stream, box_muller, make_bundle, sample_channel, stream_rng
from ..numerics import cholesky_lower, int_det
from ..outage import fmt
from ..receivers import Flavor, MethodKind, evaluate
from .ldpc import bp_decode_batch, encode, gf2_inverse
from .mod2 import POWER, centered_wrap, effective_output, llr_approx, mod2, modulate, require_mod2_invertible

FER_HEADER = "snr_db,method,frames,frame_errors,fer"
log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CodedFrame:
    messages: np.ndarray  # (n_t, k)
    codewords: np.ndarray  # (n_t, n)
    dithers: np.ndarray  # (n_t, n)
    modulated: np.ndarray  # (n_t, n)
    received: tuple = None  # per-block (n_r, n/F) outputs once transmitted


def make_frame(code, n_t, seed, index):
    msg = stream_rng(seed, index, Stream.MESSAGE).integers(0, 2, (n_t, code.k), dtype=np.uint8)
    bits = stream_rng(seed, index, Stream.DITHER).integers(0, 2, (n_t, code.n))
    dither = bits - 0.5
    words = encode(code, msg)
    return CodedFrame(msg, words, dither, modulate(words, dither))


def transmit(code, frame, channel, seed, index):
    """Block outputs Y_i = H_i X_i + Z_i with noise variance P / snr."""
    f, n_r, _ = channel.h.shape
    nb = code.n // f
    sigma = math.sqrt(POWER / channel.config.snr)
    z = box_muller(stream_rng(seed, index, Stream.NOISE), (f, n_r, nb))
    ys = tuple(channel.h[i] @ frame.modulated[:, i * nb:(i + 1) * nb] + sigma * z[i] for i in range(f))
    return replace(frame, received=ys)


def select_matrix(bundle, method):
    """Integer matrix for a method, restricted to odd determinant.

    Every reduction-based selection is unimodular and passes unchanged; an
    exhaustive choice with even determinant falls back to the identity.
    """
    if not isinstance(method, (str, MethodKind)):
        return require_mod2_invertible(method), False
    A = np.asarray(evaluate(bundle, MethodKind.parse(method)).a_matrix, dtype=np.int64)
    if int_det(A) % 2:
        return A, False
    log.debug("method %s picked an even-determinant matrix; using the identity", method)
    return np.eye(bundle.n_t, dtype=np.int64), True


def is_successive(method):
    if not isinstance(method, (str, MethodKind)):
        return False
    return MethodKind.parse(method).family in ("SIF", "SNC")


def _recover(code, A, v_info):
    """C = A^-1 V over GF(2), on information bits (re-encoding is linear)."""
    inv = gf2_inverse(A)
    return ((inv.astype(np.int64) @ v_info.astype(np.int64)) & 1).astype(np.uint8)


def _prepare(code, frame, channel, method):
    bundle = make_bundle(channel)
    A, fallback = select_matrix(bundle, method)
    B = bundle.b_per_block(A)
    y_eff = effective_output(frame.received, B, A, frame.dithers)
    return bundle, A, y_eff, fallback


def _position_variance(code, per_block, flavor):
    """(n_t, n) noise variance of every code position from (F, n_t) block values."""
    if Flavor(flavor) == Flavor.AM:
        per_block = np.broadcast_to(per_block.mean(axis=0), per_block.shape)
    return per_block.T[:, code.block_index()]


def decode_parallel_batch(code, frames, channels, method, flavor):
    """Parallel decoding of several frames; returns (info estimates, error flags, fallbacks)."""
    prepared = [_prepare(code, fr, ch, method) for fr, ch in zip(frames, channels)]
    llrs = []
    for (bundle, A, y_eff, _), ch in zip(prepared, channels):
        sigma2 = POWER / ch.config.snr
        K = A.astype(float) @ bundle.m_per_block @ A.T.astype(float)
        per_block = sigma2 * np.diagonal(K, axis1=1, axis2=2)
        llrs.append(llr_approx(y_eff, _position_variance(code, per_block, flavor)))
    words, _, _ = bp_decode_batch(code, np.concatenate(llrs))
    n_t = frames[0].messages.shape[0]
    words = words.reshape(len(frames), n_t, code.n)
    est = np.stack([_recover(code, p[1], w[:, code.info_positions]) for p, w in zip(prepared, words)])
    truth = np.stack([fr.messages for fr in frames])
    return est, (est != truth).any(axis=2), sum(p[3] for p in prepared)


def decode_successive_batch(code, frames, channels, method, flavor, cancel_with=None):
    """Successive decoding of several frames.

    Row m is decoded after the wrapped noise estimates of rows < m have been
    cancelled. ``cancel_with`` optionally supplies, per frame, the (n_t, n)
    binary rows used to form those estimates in place of the decoded ones.
    Returns (info estimates, error flags, fallbacks, decoded V info bits).
    """
    prepared = [_prepare(code, fr, ch, method) for fr, ch in zip(frames, channels)]
    blk = code.block_index()
    n_t = frames[0].messages.shape[0]
    factors, y_work = [], []
    for (bundle, A, y_eff, _), ch in zip(prepared, channels):
        sigma2 = POWER / ch.config.snr
        K = A.astype(float) @ bundle.m_per_block @ A.T.astype(float)
        L = cholesky_lower(sigma2 * 0.5 * (K + np.swapaxes(K, 1, 2)), check_symmetry=False)
        factors.append((L, L[blk]))  # per block, and as seen by each position
        y_work.append(y_eff.copy())
    noise = np.zeros((len(frames), n_t, code.n))
    v_hat = np.zeros((len(frames), n_t, code.n), dtype=np.uint8)
    am = Flavor(flavor) == Flavor.AM
    for m in range(n_t):
        llrs = []
        for b, (Lb, L) in enumerate(factors):
            y = y_work[b][m] - np.einsum("pj,jp->p", L[:, m, :m], noise[b, :m])
            y_work[b][m] = mod2(y)
            d2 = L[:, m, m] ** 2
            if am:
                d2 = np.full_like(d2, np.mean(Lb[:, m, m] ** 2))
            llrs.append(llr_approx(y_work[b][m], d2))
        words, _, _ = bp_decode_batch(code, np.stack(llrs))
        v_row = encode(code, words[:, code.info_positions])
        v_hat[:, m] = v_row
        for b, (_, L) in enumerate(factors):
            ref = v_row[b] if cancel_with is None else np.asarray(cancel_with[b])[m]
            noise[b, m] = centered_wrap(y_work[b][m] - ref) / L[:, m, m]
    est = np.stack([_recover(code, p[1], v[:, code.info_positions]) for p, v in zip(prepared, v_hat)])
    truth = np.stack([fr.messages for fr in frames])
    return est, (est != truth).any(axis=2), sum(p[3] for p in prepared), v_hat[:, :, code.info_positions]


def decode_frame_parallel(code, frame, channel, method, flavor):
    est, flags, _ = decode_parallel_batch(code, [frame], [channel], method, flavor)
    return est[0], flags[0]


def decode_frame_successive(code, frame, channel, method, flavor):
    est, flags, _, _ = decode_successive_batch(code, [frame], [channel], method, flavor)
    return est[0], flags[0]


@dataclass(frozen=True)
class FerRow:
    snr_db: float
    method: str
    frames: int
    frame_errors: int

    @property
    def fer(self):
        return self.frame_errors / self.frames


def diversity_bound(f, rate_bits, q=2):
    if rate_bits <= 0 or q < 2:
        raise ValueError("need rate_bits > 0 and q >= 2")
    return 1 + math.floor(f * (1.0 - rate_bits / math.log2(q)) + 1e-9)


def method_label(method):
    return MethodKind.parse(method).value


def frame_errors(code, n_t, n_r, snr_db, methods, seed, lo, hi):
    """Per-method boolean frame-error arrays for frames lo..hi-1 at one SNR."""
    config = ChannelConfig.from_db(n_t, n_r, code.f, snr_db)
    frames, channels = [], []
    for t in range(lo, hi):
        ch = sample_channel(config, seed, t)
        frames.append(transmit(code, make_frame(code, n_t, seed, t), ch, seed, t))
        channels.append(ch)
    out = {}
    for m in methods:
        kind = MethodKind.parse(m)
        if is_successive(kind):
            _, flags, fb, _ = decode_successive_batch(code, frames, channels, kind, kind.flavor)
        else:
            _, flags, fb = decode_parallel_batch(code, frames, channels, kind, kind.flavor)
        if fb:
            log.info("snr %s method %s: %d frames fell back to the identity", snr_db, kind.value, fb)
        out[kind.value] = flags.any(axis=1)
    return out


def _job(args):
    return frame_errors(*args)


def fer_sim(code, n_t, n_r, methods, snr_db_list, max_frames, max_errors, seed=0, threads=1, batch=100):
    """FER rows per (snr, method).

    Frames run in fixed batches; a method stops at the exact frame index
    where its error count reaches max_errors, so the counts do not depend on
    the batch size or on the number of worker processes.
    """
    labels = [method_label(m) for m in methods]
    rows = []
    pool = ProcessPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for snr_db in snr_db_list:
            state = {m: [0, 0, False] for m in labels}  # frames, errors, done
            lo = 0
            while lo < max_frames and not all(s[2] for s in state.values()):
                active = [m for m in labels if not state[m][2]]
                spans = []
                for _ in range(max(1, threads)):
                    if lo >= max_frames:
                        break
                    spans.append((lo, min(max_frames, lo + batch)))
                    lo = spans[-1][1]
                jobs = [(code, n_t, n_r, snr_db, active, seed, a, b) for a, b in spans]
                results = list(pool.map(_job, jobs)) if pool else [_job(j) for j in jobs]
                for m in active:
                    err = np.concatenate([r[m] for r in results])
                    cum = state[m][1] + np.cumsum(err)
                    hit = np.flatnonzero(cum >= max_errors)
                    if hit.size:
                        state[m] = [state[m][0] + int(hit[0]) + 1, max_errors, True]
                    else:
                        state[m] = [state[m][0] + len(err), int(cum[-1]) if len(cum) else state[m][1], False]
            for m in labels:
                rows.append(FerRow(float(snr_db), m, state[m][0], state[m][1]))
    finally:
        if pool:
            pool.shutdown()
    return rows


def format_fer_csv(rows):
    out = io.StringIO()
    out.write(FER_HEADER + "\n")
    for r in rows:
        out.write(f"{fmt(r.snr_db)},{r.method},{r.frames},{r.frame_errors},{fmt(r.fer)}\n")
    return out.getvalue()


def emit_fer_csv(rows, destination):
    text = format_fer_csv(rows)
    if destination is None or destination == "-":
        sys.stdout.write(text)
    elif hasattr(destination, "write"):
        destination.write(text)
    else:
        with open(destination, "w", newline="\n") as fh:
            fh.write(text)
