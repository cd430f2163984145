"""Counter-based random numbers (Philox4x32-10) and keyed gamma sampling, numba-compiled.

Every draw is a pure function of (key, counter).  The counter is laid out as
(x, y, channel << 24 | draw index, tag) where the tag is a hash of the shape
parameter for gamma channels and the replica index for the coupling uniforms.
"""
import math
import struct

import numpy as np
from numba import njit

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = np.uint64(0x9E3779B9)
W1 = np.uint64(0xBB67AE85)
MASK = np.uint64(0xFFFFFFFF)
S32 = np.uint64(32)

# channels
BULK = 1
THETA = 2
SW_H = 3
SW_V = 4
NE_H = 5
NE_V = 6
DIA_H = 7
DIA_V = 8

_BOOST_DRAW = 0xFFFFFF  # reserved draw index for the shape < 1 boost uniform
TWO_M32 = 2.0 ** -32


def split_seed(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return seed & 0xFFFFFFFF, seed >> 32


def shape_tag(shape: float) -> int:
    """32-bit tag of the float64 bit pattern (murmur3 finalizer on the folded word)."""
    bits = struct.unpack("<Q", struct.pack("<d", float(shape)))[0]
    h = (bits ^ (bits >> 32)) & 0xFFFFFFFF
    h ^= h >> 16
    h = (h * 0x85EBCA6B) & 0xFFFFFFFF
    h ^= h >> 13
    h = (h * 0xC2B2AE35) & 0xFFFFFFFF
    h ^= h >> 16
    return h


@njit(cache=True)
def philox(c0, c1, c2, c3, k0, k1):
    c0 = np.uint64(c0) & MASK
    c1 = np.uint64(c1) & MASK
    c2 = np.uint64(c2) & MASK
    c3 = np.uint64(c3) & MASK
    k0 = np.uint64(k0) & MASK
    k1 = np.uint64(k1) & MASK
    for i in range(10):
        p0 = M0 * c0
        p1 = M1 * c2
        n0 = ((p1 >> S32) ^ c1 ^ k0) & MASK
        n1 = p1 & MASK
        n2 = ((p0 >> S32) ^ c3 ^ k1) & MASK
        n3 = p0 & MASK
        c0, c1, c2, c3 = n0, n1, n2, n3
        if i < 9:
            k0 = (k0 + W0) & MASK
            k1 = (k1 + W1) & MASK
    return c0, c1, c2, c3


@njit(cache=True)
def _u01(w):
    return (np.float64(w) + 0.5) * TWO_M32


@njit(cache=True)
def _wrap(v):
    return np.uint64(np.int64(v) & np.int64(0xFFFFFFFF))


@njit(cache=True)
def log_gamma_at(k0, k1, x, y, channel, shape, tag):
    """log of a Gamma(shape) variate keyed by (x, y, channel, tag)."""
    cx = _wrap(x)
    cy = _wrap(y)
    base = np.uint64(channel) << np.uint64(24)
    a = shape
    boost = 0.0
    if shape < 1.0:
        w0, w1, w2, w3 = philox(cx, cy, base | np.uint64(_BOOST_DRAW), tag, k0, k1)
        boost = math.log(_u01(w0)) / shape
        a = shape + 1.0
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    draw = 0
    while True:
        w0, w1, w2, w3 = philox(cx, cy, base | np.uint64(draw), tag, k0, k1)
        draw += 1
        z = math.sqrt(-2.0 * math.log(_u01(w0))) * math.cos(2.0 * math.pi * _u01(w1))
        t = 1.0 + c * z
        if t <= 0.0:
            continue
        v = t * t * t
        lv = math.log(v)
        if math.log(_u01(w2)) < 0.5 * z * z + d - d * v + d * lv:
            return math.log(d) + lv + boost


@njit(cache=True)
def theta_at(k0, k1, x, y, replica):
    w0, w1, w2, w3 = philox(_wrap(x), _wrap(y), np.uint64(THETA) << np.uint64(24),
                            np.uint64(replica), k0, k1)
    # 53-bit uniform in [0, 1)
    return (np.float64(w0 >> np.uint64(5)) * 67108864.0 + np.float64(w1 >> np.uint64(6))) \
        * (1.0 / 9007199254740992.0)


@njit(cache=True)
def fill_log_gamma_rect(k0, k1, channel, shape, tag, x0, y0, out):
    nx, ny = out.shape
    for i in range(nx):
        for j in range(ny):
            out[i, j] = log_gamma_at(k0, k1, x0 + i, y0 + j, channel, shape, tag)


@njit(cache=True)
def fill_log_gamma_points(k0, k1, channel, shape, tag, xs, ys, out):
    for i in range(xs.shape[0]):
        out[i] = log_gamma_at(k0, k1, xs[i], ys[i], channel, shape, tag)


@njit(cache=True)
def fill_theta_rect(k0, k1, replica, x0, y0, out):
    nx, ny = out.shape
    for i in range(nx):
        for j in range(ny):
            out[i, j] = theta_at(k0, k1, x0 + i, y0 + j, replica)
