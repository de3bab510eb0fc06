"""Counter-based random number streams for reproducible parallel simulation.

Every photon owns an independent stream addressed by (seed, photon index);
draw number ``block`` of that stream is a pure function of
(seed, photon index, block), so simulation results do not depend on batch
boundaries, worker count, or scheduling order.

The generator is Philox4x32-10 (Salmon et al., counter-based), implemented
directly on numpy uint64 lanes so that whole batches of photons can be
advanced in one vectorized call.
"""

from __future__ import annotations

import numpy as np

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)  # key schedule Weyl constants
PHILOX_W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

#: scale turning a 32-bit word into a float in [0, 1)
U32_TO_UNIT = 2.0 ** -32


def philox4x32(c0, c1, c2, c3, k0, k1, rounds: int = 10):
    """Philox4x32 block cipher on 32-bit lanes stored in uint64 arrays.

    Inputs may be scalars or equal-shaped arrays; values must fit in 32 bits.
    Returns the four output words as uint64 arrays with values < 2**32.
    """
    c0 = np.asarray(c0, dtype=np.uint64)
    c1 = np.asarray(c1, dtype=np.uint64)
    c2 = np.asarray(c2, dtype=np.uint64)
    c3 = np.asarray(c3, dtype=np.uint64)
    k0 = np.asarray(k0, dtype=np.uint64)
    k1 = np.asarray(k1, dtype=np.uint64)
    for _ in range(rounds):
        prod0 = PHILOX_M0 * c0
        prod1 = PHILOX_M1 * c2
        hi0 = prod0 >> _SHIFT32
        lo0 = prod0 & MASK32
        hi1 = prod1 >> _SHIFT32
        lo1 = prod1 & MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = (k0 + PHILOX_W0) & MASK32
        k1 = (k1 + PHILOX_W1) & MASK32
    return c0, c1, c2, c3


def photon_block_words(seed: int, photon_index, block):
    """Four 32-bit words for draw block ``block`` of the given photon streams.

    ``photon_index`` may be a scalar or uint64 array; ``block`` broadcasts
    against it.  Counter layout: (block, index lo32, index hi32, 0); the
    64-bit seed is the key.
    """
    idx = np.asarray(photon_index, dtype=np.uint64)
    blk = np.asarray(block, dtype=np.uint64)
    seed = np.uint64(seed)
    return philox4x32(
        blk,
        idx & MASK32,
        idx >> _SHIFT32,
        np.zeros_like(idx),
        seed & MASK32,
        seed >> _SHIFT32,
    )


def u01(word):
    """Map a 32-bit word to a uniform float in [0, 1)."""
    return np.asarray(word, dtype=np.float64) * U32_TO_UNIT


def u01_positive(word):
    """Map a 32-bit word to a uniform float in (0, 1] (safe for log)."""
    return (np.asarray(word, dtype=np.float64) + 1.0) * U32_TO_UNIT


class PhotonStream:
    """Per-photon view of the counter-based stream, for scalar consumers."""

    def __init__(self, seed: int, photon_index: int):
        self.seed = int(seed)
        self.photon_index = int(photon_index)

    def block_words(self, block: int):
        """The four words of draw block ``block`` as plain ints."""
        w0, w1, w2, w3 = photon_block_words(self.seed, self.photon_index, block)
        return int(w0), int(w1), int(w2), int(w3)
