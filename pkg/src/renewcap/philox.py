"""Philox4x32-10 counter-based generator, vectorized over counters.

A uniform is a pure function of ``(seed, replication, draw, tag)``, so any
replication can be regenerated in isolation and the result never depends on
how replications are batched or scheduled.
"""

from __future__ import annotations

import numpy as np

MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_SHIFT32 = np.uint64(32)

TAG_EVENT = 0
TAG_AGE = 1


def philox4x32(ctr, key, rounds: int = 10):
    """Apply Philox4x32 to counters ``ctr = (c0, c1, c2, c3)`` under ``key = (k0, k1)``.

    Every component is a uint64 array (or scalar) holding a 32-bit value;
    returns the four output words the same way.
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) for c in ctr)
    k0, k1 = (np.uint64(k) for k in key)
    for i in range(rounds):
        if i:
            k0 = (k0 + _W0) & MASK32
            k1 = (k1 + _W1) & MASK32
        p0 = _M0 * c0
        p1 = _M1 * c2
        c0, c1, c2, c3 = (p1 >> _SHIFT32) ^ c1 ^ k0, p1 & MASK32, (p0 >> _SHIFT32) ^ c3 ^ k1, p0 & MASK32
    return c0, c1, c2, c3


def seed_key(seed: int) -> tuple[int, int]:
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def uniforms(seed: int, replication, draw, tag: int = TAG_EVENT) -> np.ndarray:
    """53-bit uniforms in [0, 1) for each (replication, draw) pair."""
    rep = np.asarray(replication, dtype=np.uint64)
    draw = np.broadcast_to(np.asarray(draw, dtype=np.uint64), rep.shape)
    w0, w1, _, _ = philox4x32(
        (rep & MASK32, rep >> _SHIFT32, draw, np.full(rep.shape, tag, dtype=np.uint64)),
        seed_key(seed),
    )
    hi = (w0 >> np.uint64(5)).astype(np.float64)
    lo = (w1 >> np.uint64(6)).astype(np.float64)
    return (hi * 67108864.0 + lo) * (1.0 / 9007199254740992.0)


class ReplicationStream:
    """Sequential view of one replication's substream.

    ``next_uniform`` walks the event draws 0, 1, 2, ...; ``age_uniform`` is
    the single draw reserved for a random replacement age.
    """

    def __init__(self, seed: int, replication: int):
        self.seed = seed
        self.replication = replication
        self.draws = 0

    def next_uniform(self) -> float:
        u = uniforms(self.seed, np.array([self.replication]), self.draws)[0]
        self.draws += 1
        return float(u)

    def age_uniform(self) -> float:
        return float(uniforms(self.seed, np.array([self.replication]), 0, TAG_AGE)[0])
