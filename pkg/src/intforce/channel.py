"""Block-fading real MIMO MAC: sampling and per-block MMSE quantities.

Variances are expressed in multiples of the noise variance sigma^2, so an
achievable rate always reads 0.5 * log2+(snr / variance).
"""
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import BadShape
from .numerics import spd_inverse


class Stream(IntEnum):
    CHANNEL = 0
    NOISE = 1
    MESSAGE = 2
    DITHER = 3
    CODE = 4


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def stream_rng(seed, index, tag):
    """Counter-based generator keyed by (master seed, trial index, stream tag).

    Each key gets its own Philox stream, so a trial's draws never depend on
    which other trials ran before it or on which worker ran it.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(tag), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def box_muller(rng, size):
    """Standard normals from pairs of uniforms; consumes exactly 2*ceil(n/2) uniforms."""
    n = int(np.prod(size))
    pairs = (n + 1) // 2
    u = rng.random((2, pairs))
    r = np.sqrt(-2.0 * np.log1p(-u[0]))  # 1 - u lies in (0, 1]
    theta = 2.0 * np.pi * u[1]
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
    return z.reshape(size)


@dataclass(frozen=True)
class ChannelConfig:
    n_t: int
    n_r: int
    blocks: int
    snr: float

    def __post_init__(self):
        if self.n_t < 1 or self.n_r < 1 or self.blocks < 1:
            raise ValueError("n_t, n_r and blocks must be >= 1")
        if not self.snr > 0:
            raise ValueError("snr must be positive")

    @classmethod
    def from_db(cls, n_t, n_r, blocks, snr_db):
        return cls(n_t, n_r, blocks, float(db_to_linear(snr_db)))


@dataclass(frozen=True)
class BlockChannel:
    config: ChannelConfig
    h: np.ndarray  # (blocks, n_r, n_t)

    def __post_init__(self):
        c = self.config
        if self.h.shape != (c.blocks, c.n_r, c.n_t):
            raise BadShape(f"expected {(c.blocks, c.n_r, c.n_t)}, got {self.h.shape}")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channel has non-finite entries")

    def with_snr(self, snr):
        cfg = ChannelConfig(self.config.n_t, self.config.n_r, self.config.blocks, snr)
        return BlockChannel(cfg, self.h)


def sample_channel(config, seed, trial):
    """I.i.d. N(0, 1) fading coefficients for every block, keyed by (seed, trial)."""
    rng = stream_rng(seed, trial, Stream.CHANNEL)
    h = box_muller(rng, (config.blocks, config.n_r, config.n_t))
    return BlockChannel(config, h)


def compute_m(H, snr):
    """(I/snr + H.T @ H)^-1 for one block."""
    H = np.asarray(H, dtype=float)
    n_t = H.shape[1]
    return spd_inverse(np.eye(n_t) / snr + H.T @ H)


def compute_b(A, H, snr):
    """MMSE equalizer A @ H.T @ (I/snr + H @ H.T)^-1 for one block."""
    A = np.asarray(A, dtype=float)
    H = np.asarray(H, dtype=float)
    if A.shape[1] != H.shape[1]:
        raise BadShape("A and H disagree on the number of transmitters")
    n_r = H.shape[0]
    return A @ H.T @ spd_inverse(np.eye(n_r) / snr + H @ H.T)


def effective_variance_direct(a, b, H, snr):
    """||b @ H - a||^2 * snr + ||b||^2 in units of sigma^2."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    resid = b @ np.asarray(H, dtype=float) - a
    return float(resid @ resid * snr + b @ b)


@dataclass(frozen=True)
class EqualizerBundle:
    """Per-block Gram matrices of one channel realization at one SNR."""

    channel: BlockChannel
    m_per_block: np.ndarray  # (blocks, n_t, n_t)
    m_am: np.ndarray
    _b_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def snr(self):
        return self.channel.config.snr

    @property
    def n_t(self):
        return self.channel.config.n_t

    @property
    def blocks(self):
        return self.channel.config.blocks

    def b_per_block(self, A):
        key = np.asarray(A, dtype=np.int64).tobytes()
        if key not in self._b_cache:
            self._b_cache[key] = [compute_b(A, H, self.snr) for H in self.channel.h]
        return self._b_cache[key]


def make_bundle(channel):
    snr = channel.config.snr
    ms = np.stack([compute_m(H, snr) for H in channel.h])
    m_am = ms[0].copy()
    for m in ms[1:]:
        m_am = m_am + m
    m_am = m_am / len(ms)
    return EqualizerBundle(channel, ms, m_am)
