"""Dithered 2-PAM over the mod-2 effective channel."""
import numpy as np

from ..errors import BadAlphabet, BadLength, BadShape, NotMod2Invertible
from ..numerics import int_det

POWER = 0.25  # per-symbol power of the {-1/2, +1/2} alphabet


def mod2(x):
    """Reduce onto (-1, 1]."""
    x = np.asarray(x, dtype=float)
    return x - 2.0 * np.ceil((x - 1.0) / 2.0)


def centered_wrap(x):
    """Reduce onto [-1, 1); used for noise estimates."""
    x = np.asarray(x, dtype=float)
    return np.mod(x + 1.0, 2.0) - 1.0


def modulate(codeword, dither):
    c = np.asarray(codeword)
    d = np.asarray(dither, dtype=float)
    if c.shape != d.shape:
        raise BadLength(f"codeword shape {c.shape} != dither shape {d.shape}")
    if not np.isin(c, (0, 1)).all():
        raise BadAlphabet("codeword entries must be 0 or 1")
    if not np.isin(d, (-0.5, 0.5)).all():
        raise BadAlphabet("dither entries must be -1/2 or +1/2")
    return mod2(c + d)


def require_mod2_invertible(A):
    A = np.asarray(A, dtype=np.int64)
    if int_det(A) % 2 == 0:
        raise NotMod2Invertible(f"det of {A.tolist()} is even")
    return A


def effective_output(y_blocks, b_blocks, A, dithers):
    """[B_1 Y_1 ... B_F Y_F] - A D, reduced onto (-1, 1]."""
    A = require_mod2_invertible(A)
    if len(y_blocks) != len(b_blocks):
        raise BadShape("need one equalizer per block")
    eq = np.concatenate([np.asarray(B) @ np.asarray(Y) for B, Y in zip(b_blocks, y_blocks)], axis=1)
    D = np.asarray(dithers, dtype=float)
    if D.shape != (A.shape[1], eq.shape[1]):
        raise BadShape(f"dither shape {D.shape} does not match {(A.shape[1], eq.shape[1])}")
    return mod2(eq - A @ D)


def llr_approx(y, variance):
    """Dominant-term LLR (1 - 2|y|) / (2 variance); positive favours bit 0."""
    variance = np.asarray(variance, dtype=float)
    if np.any(variance <= 0):
        raise ValueError("variance must be positive")
    return (1.0 - 2.0 * np.abs(np.asarray(y, dtype=float))) / (2.0 * variance)


def llr_exact(y, variance, shifts=20):
    """Wrapped-Gaussian LLR summed over the shifts 2k, |k| <= shifts."""
    y = np.asarray(y, dtype=float)[..., None]
    k = 2.0 * np.arange(-shifts, shifts + 1)
    e0 = -((y - k) ** 2) / (2.0 * variance)
    e1 = -((y - 1.0 - k) ** 2) / (2.0 * variance)
    return np.logaddexp.reduce(e0, axis=-1) - np.logaddexp.reduce(e1, axis=-1)
