"""Counter-based random numbers (Philox4x32-10).

Every draw is a pure function of ``(key, counter)``, so a particle's stream
is addressed by ``(master_seed, particle_index, step_index)`` and never
depends on how particles are split across threads.

Counter layout::

    c0 = step index // 4            c1 = stream tag (0 for walk steps)
    c2 = particle index, low word   c3 = particle index, high word
    key = master seed, split into two 32-bit words

Each step consumes one 32-bit word, word ``step % 4`` of its block.
"""

import numba as nb
import numpy as np

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint32(0x9E3779B9)
_W1 = np.uint32(0xBB67AE85)
_MASK32 = np.uint64(0xFFFFFFFF)
_SHIFT32 = np.uint64(32)

TAG_STEP = 0
TAG_INIT = 1

_TO_UNIT = 1.0 / 4294967296.0


@nb.njit(inline="always", cache=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on a 4x32 counter block; all inputs are uint32."""
    for _ in range(10):
        p0 = _M0 * np.uint64(c0)
        p1 = _M1 * np.uint64(c2)
        hi0 = np.uint32(p0 >> _SHIFT32)
        lo0 = np.uint32(p0 & _MASK32)
        hi1 = np.uint32(p1 >> _SHIFT32)
        lo1 = np.uint32(p1 & _MASK32)
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        k0 = np.uint32(k0 + _W0)
        k1 = np.uint32(k1 + _W1)
    return c0, c1, c2, c3


@nb.njit(inline="always", cache=True)
def split_seed(seed):
    s = np.uint64(seed)
    return np.uint32(s & _MASK32), np.uint32(s >> _SHIFT32)


@nb.njit(inline="always", cache=True)
def split_index(p):
    q = np.uint64(p)
    return np.uint32(q & _MASK32), np.uint32(q >> _SHIFT32)


@nb.njit(inline="always", cache=True)
def unit(word):
    """Map a uint32 to the open interval (0, 1)."""
    return (np.float64(word) + 0.5) * _TO_UNIT


@nb.njit(inline="always", cache=True)
def step_word(step, plo, phi, k0, k1):
    """The 32-bit word owned by one particle step."""
    w0, w1, w2, w3 = philox4x32(np.uint32(step >> 2), np.uint32(TAG_STEP), plo, phi, k0, k1)
    r = step & 3
    if r == 0:
        return w0
    if r == 1:
        return w1
    if r == 2:
        return w2
    return w3


# (cos, sin) at the centres of 1024 equal angular bins; the low 22 bits of a
# word give the offset from the bin centre, |d| < pi / 1024, where three
# series terms are exact to double precision.
_TABLE_BITS = 10
_FINE_BITS = 32 - _TABLE_BITS
_centres = (np.arange(1 << _TABLE_BITS) + 0.5) * (2.0 * np.pi / (1 << _TABLE_BITS))
COS_TABLE = np.cos(_centres)
SIN_TABLE = np.sin(_centres)
_FINE_MASK = np.uint32((1 << _FINE_BITS) - 1)
_FINE_HALF = float(1 << (_FINE_BITS - 1))
_ANGLE_UNIT = 2.0 * np.pi / 4294967296.0


@nb.njit(inline="always", cache=True, error_model="numpy")
def angle_direction(word):
    """Unit vector at angle ``2 pi (word + 1/2) / 2**32``."""
    k = word >> np.uint32(_FINE_BITS)
    d = (np.float64(np.int32(word & _FINE_MASK)) + 0.5 - _FINE_HALF) * _ANGLE_UNIT
    d2 = d * d
    sd = d * (1.0 + d2 * (-1.0 / 6.0 + d2 * (1.0 / 120.0)))
    cd = 1.0 + d2 * (-0.5 + d2 * (1.0 / 24.0 + d2 * (-1.0 / 720.0)))
    c = COS_TABLE[k]
    s = SIN_TABLE[k]
    return c * cd - s * sd, s * cd + c * sd


@nb.njit(inline="always", cache=True)
def word_sign(word):
    """Fair +-1 from the top bit of a word."""
    return 1.0 if (word >> np.uint32(31)) == np.uint32(0) else -1.0


def word_angle(word) -> float:
    """The angle encoded by :func:`angle_direction`, for reference checks."""
    return 2.0 * np.pi * (float(word) + 0.5) * _TO_UNIT


@nb.njit(cache=True)
def _block_array(counters, k0, k1):
    out = np.empty_like(counters)
    for i in range(counters.shape[0]):
        a, b, c, d = philox4x32(counters[i, 0], counters[i, 1], counters[i, 2],
                                counters[i, 3], k0, k1)
        out[i, 0] = a
        out[i, 1] = b
        out[i, 2] = c
        out[i, 3] = d
    return out


def philox_blocks(counters, key):
    """Vectorised Philox4x32-10: ``counters`` is (n, 4) uint32, ``key`` two uint32."""
    counters = np.ascontiguousarray(counters, dtype=np.uint32).reshape(-1, 4)
    return _block_array(counters, np.uint32(key[0]), np.uint32(key[1]))


@nb.njit(cache=True)
def _step_words(seed, particle, steps):
    k0, k1 = split_seed(seed)
    plo, phi = split_index(particle)
    out = np.empty(steps.size, dtype=np.uint32)
    for i in range(steps.size):
        out[i] = step_word(steps[i], plo, phi, k0, k1)
    return out


def step_words(seed: int, particle: int, steps) -> np.ndarray:
    """Words that particle ``particle`` consumes at the given step indices."""
    return _step_words(np.uint64(seed), np.uint64(particle), np.asarray(steps, dtype=np.int64))
