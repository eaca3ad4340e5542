"""Deterministic, splittable random streams.

Streams are built on the counter-based Philox generator keyed by a
(seed, stream_id) pair, so distinct stream ids give statistically
independent sequences with no shared mutable state and no counter
overlap.  Every uniform or normal variate consumes exactly one 64-bit
draw; normals are produced by the inverse-CDF transform, never by
rejection, so the stream position is a pure function of how many
variates have been requested.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    """One splitmix64 avalanche round on a 64-bit integer."""
    x = (x + _GOLDEN) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def derive_stream_id(seed: int, chain_index: int) -> int:
    """Stable 64-bit stream id for worker/chain ``chain_index`` under ``seed``."""
    return _splitmix64(_splitmix64(seed & _MASK64) ^ _splitmix64((chain_index + 1) & _MASK64))


class RngStream:
    """A single deterministic random stream.

    Identical ``(seed, stream_id)`` pairs reproduce identical sequences
    across runs and platforms.  A stream is meant to be owned by exactly
    one worker; use :meth:`substream` to derive independent streams for
    parallel chains or replicas.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed = int(seed)
        stream_id = int(stream_id)
        if not 0 <= seed < 2**64 or not 0 <= stream_id < 2**64:
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")
        self.seed = seed
        self.stream_id = stream_id
        self.counter = 0
        key = np.array([seed, stream_id], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def _raw(self, n: int) -> np.ndarray:
        self.counter += int(n)
        return self._gen.integers(0, 1 << 64, size=int(n), dtype=np.uint64)

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` independent uniforms in (0, 1), one 64-bit draw each.

        Values are of the form (k + 1/2) * 2**-52 with k the top 52 bits of
        the raw draw, so 0.0 and 1.0 are never produced and the map from raw
        bits to floats is exact.
        """
        if n < 0:
            raise ValueError("n must be nonnegative")
        k = (self._raw(n) >> np.uint64(12)).astype(np.float64)
        return (k + 0.5) * 2.0**-52

    def uniform(self) -> float:
        """One uniform variate in [0, 1)."""
        return float(self.uniforms(1)[0])

    def normal_vector(self, n: int) -> np.ndarray:
        """``n`` independent standard normal variates."""
        if n < 1:
            raise ValueError("n must be positive")
        return ndtri(self.uniforms(n))

    def normal_array(self, shape) -> np.ndarray:
        """Standard normals reshaped to ``shape``."""
        shape = tuple(int(s) for s in np.atleast_1d(shape))
        count = int(np.prod(shape)) if shape else 1
        return self.normal_vector(count).reshape(shape)

    def substream(self, index: int) -> "RngStream":
        """Independent stream for chain/replica ``index``.

        Derived ids never collide with the parent or with other indices, so
        parallel workers need no coordination.
        """
        mixed = _splitmix64(self.seed) ^ _splitmix64(self.stream_id)
        return RngStream(self.seed, derive_stream_id(mixed, index))
