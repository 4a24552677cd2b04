"""Portable 64-bit pseudo-random streams.

Everything that needs reproducible randomness (bootstrap resampling, random
splits, synthetic fixtures) goes through the generator defined here so that
outputs do not depend on the numpy version installed.

Generator
---------
* Seeding: SplitMix64. Output ``k`` (k = 1, 2, ...) of the stream seeded
  with ``seed`` is ``mix(seed + k * 0x9E3779B97F4A7C15 mod 2**64)``.
* Core: xoshiro256** (Blackman & Vigna). A stream with index ``j`` takes its
  256-bit state from SplitMix64 outputs ``4j+1 .. 4j+4`` of the master seed,
  so independent streams (one per bootstrap replicate) are cheap to derive.
* Bounded integers in ``[0, n)``: draw ``x``; reject while
  ``x >= 2**64 - (2**64 mod n)``; return ``x mod n``. This is exactly
  unbiased; the rejection probability is below ``n / 2**64``.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U = np.uint64


def _mix64(z):
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64(seed, count, start=0):
    """Return SplitMix64 outputs ``start+1 .. start+count`` as a uint64 array."""
    k = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = _U(seed & MASK64) + k * _U(GOLDEN)
    z = (z ^ (z >> _U(30))) * _U(_MIX1)
    z = (z ^ (z >> _U(27))) * _U(_MIX2)
    return z ^ (z >> _U(31))


def rejection_limit(n):
    """Largest multiple of ``n`` not exceeding 2**64; draws at or above it are rejected."""
    if n < 1:
        raise ValueError("bound must be >= 1")
    return (1 << 64) - ((1 << 64) % n)


class Xoshiro256:
    """Scalar xoshiro256** stream (pure Python integers).

    Used where only a few thousand draws are needed (shuffles, jitter).
    """

    def __init__(self, seed, stream=0):
        words = splitmix64(seed, 4, start=4 * stream)
        self.s = [int(w) for w in words]
        if not any(self.s):
            self.s[0] = 1

    def next_u64(self):
        s0, s1, s2, s3 = self.s
        result = (((s1 * 5) & MASK64) << 7 | ((s1 * 5) & MASK64) >> 57) & MASK64
        result = (result * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & MASK64
        self.s = [s0, s1, s2, s3]
        return result

    def integers(self, n):
        """Unbiased integer in ``[0, n)``."""
        limit = rejection_limit(n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def random(self):
        """Float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self):
        """Standard normal via Box-Muller (uses two uniforms per call)."""
        u1 = 1.0 - self.random()
        u2 = self.random()
        return float(np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2))

    def shuffle_indices(self, n):
        """Fisher-Yates permutation of ``range(n)``."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return perm


class XoshiroLanes:
    """Many independent xoshiro256** streams stepped in lockstep with numpy.

    Lane ``i`` is identical to ``Xoshiro256(seed, stream=first_stream + i)``.
    """

    def __init__(self, seed, n_lanes, first_stream=0):
        words = splitmix64(seed, 4 * n_lanes, start=4 * first_stream)
        state = words.reshape(n_lanes, 4).T.copy()
        dead = ~state.any(axis=0)
        state[0, dead] = 1
        self._s = state  # shape (4, n_lanes)
        self.n_lanes = n_lanes

    def _step(self, s, out=None):
        s0, s1, s2, s3 = s
        x = s1 * _U(5)
        x = (x << _U(7)) | (x >> _U(57))
        x *= _U(9)
        t = s1 << _U(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        np.bitwise_or(s3 << _U(45), s3 >> _U(19), out=s3)
        if out is not None:
            out[...] = x
            return out
        return x

    def next_u64(self):
        return self._step(self._s)

    def integers(self, n, size):
        """Return a ``(n_lanes, size)`` block of unbiased integers in ``[0, n)``.

        Column ``j`` holds each lane's next draw; a rejected draw is replaced
        by that lane's following output, so every lane consumes its own stream
        in order regardless of what the other lanes do.
        """
        limit = rejection_limit(n)
        out = np.empty((self.n_lanes, size), dtype=np.uint64)
        col = np.empty(self.n_lanes, dtype=np.uint64)
        check = limit < (1 << 64)
        lim = _U(limit % (1 << 64)) if check else None
        for j in range(size):
            self._step(self._s, out=col)
            if check:
                bad = np.flatnonzero(col >= lim)
                while bad.size:
                    sub = self._s[:, bad]
                    redraw = self._step(sub)
                    self._s[:, bad] = sub
                    col[bad] = redraw
                    bad = bad[redraw >= lim]
            out[:, j] = col
        out %= _U(n)
        return out
