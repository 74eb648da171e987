"""Counter-based random numbers for reproducible path ensembles.

Path ``j`` of an ensemble draws from Philox4x64-10 keyed by a 64-bit
seed derived from ``(base_seed, j)``; the counter is the step index.
A path's normals therefore depend only on ``(base_seed, j, step)``,
never on which worker ran it or in what order.

The block function is bit-compatible with ``numpy.random.Philox``.
"""

import math

import numba as nb
import numpy as np
from scipy import stats

__all__ = ["philox4x64", "derive_seed", "normals", "wilson_interval"]

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_MASK32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)


@nb.njit(inline="always")
def _mulhilo(a, b):
    a_lo = a & _MASK32
    a_hi = a >> _S32
    b_lo = b & _MASK32
    b_hi = b >> _S32
    lo_lo = a_lo * b_lo
    hi_lo = a_hi * b_lo
    lo_hi = a_lo * b_hi
    hi_hi = a_hi * b_hi
    cross = (lo_lo >> _S32) + (hi_lo & _MASK32) + lo_hi
    hi = hi_hi + (hi_lo >> _S32) + (cross >> _S32)
    return hi, a * b


@nb.njit(nogil=True)
def philox4x64_block(c0, c1, c2, c3, k0, k1):
    """Ten Philox rounds on counter ``(c0..c3)`` with key ``(k0, k1)``."""
    for _ in range(10):
        hi0, lo0 = _mulhilo(_M0, c0)
        hi1, lo1 = _mulhilo(_M1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = k0 + _W0
        k1 = k1 + _W1
    return c0, c1, c2, c3


def philox4x64(counter, key):
    """Python wrapper: ``counter`` is four ints, ``key`` two ints."""
    c = [np.uint64(v) for v in counter]
    k = [np.uint64(v) for v in key]
    return tuple(int(v) for v in philox4x64_block(*c, *k))


@nb.njit(inline="always")
def _splitmix(z):
    z = z + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(nogil=True)
def derive_seed_nb(base_seed, j):
    return _splitmix(_splitmix(base_seed) ^ _splitmix(j + np.uint64(0x632BE59BD9B4E019)))


def derive_seed(base_seed, j):
    """64-bit key of path ``j``; distinct ``j`` give unrelated streams."""
    return int(derive_seed_nb(np.uint64(base_seed % 2**64), np.uint64(j)))


_TWO_M53 = 1.0 / 9007199254740992.0


@nb.njit(inline="always")
def _unit(x):
    # 53 high bits -> (0, 1); the half-ulp offset keeps log() finite
    return (float(x >> np.uint64(11)) + 0.5) * _TWO_M53


@nb.njit(nogil=True)
def normal_pair(key, step):
    """Two standard normals for ``(key, step)`` by Box-Muller on one block."""
    x0, x1, _, _ = philox4x64_block(np.uint64(step), np.uint64(0), np.uint64(0),
                                    np.uint64(0), key, np.uint64(0))
    u1 = _unit(x0)
    u2 = _unit(x1)
    rad = math.sqrt(-2.0 * math.log(u1))
    return rad * math.cos(2.0 * math.pi * u2), rad * math.sin(2.0 * math.pi * u2)


def normals(key, steps):
    """First normal of each step, for tests and diagnostics."""
    return np.array([normal_pair(np.uint64(key), s)[0] for s in steps])


def wilson_interval(k, n, level=0.95):
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = float(stats.norm.ppf(0.5 + level / 2))
    p = k / n
    den = 1 + z * z / n
    mid = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else min(p, max(0.0, mid - half))
    hi = 1.0 if k == n else max(p, min(1.0, mid + half))
    return lo, hi
