"""Counter-based random streams with O(1) skip-ahead.

Every property table gets its own stream, keyed by ``(master_seed, table_tag)``.
The i-th value of a stream is a pure function of the derived seed and ``i``, so
any single value can be regenerated without touching its neighbours.

The construction is splitmix64 evaluated at an arbitrary counter: the i-th
output of a splitmix64 generator seeded with ``s`` is
``mix(s + (i + 1) * GOLDEN)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3

DEFAULT_SEED = 42

_U53 = 2.0**-53


def mix64(z: int) -> int:
    """splitmix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorised finalizer. ``z`` must be uint64; arithmetic wraps mod 2**64."""
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(MIX2)
    return z ^ (z >> np.uint64(31))


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


@dataclass(frozen=True)
class StreamKey:
    master_seed: int
    table_tag: str


@dataclass(frozen=True)
class RandomStream:
    derived_seed: int

    def value_at(self, i: int) -> int:
        if i < 0:
            raise ValueError(f"stream index must be non-negative, got {i}")
        return mix64(self.derived_seed + (i + 1) * GOLDEN)

    def values_at(self, ids) -> np.ndarray:
        """Vectorised :meth:`value_at` over an integer array of indices."""
        idx = np.asarray(ids).astype(np.uint64, copy=False)
        with np.errstate(over="ignore"):
            z = (idx + np.uint64(1)) * np.uint64(GOLDEN) + np.uint64(self.derived_seed)
            return mix64_array(z)

    def uniforms_at(self, ids) -> np.ndarray:
        """Floats in [0, 1): the draw divided by 2**64, truncated to 53 bits."""
        return to_unit(self.values_at(ids))

    def substream(self, tag: str) -> "RandomStream":
        """Independent child stream, e.g. one per recursion level of a generator."""
        return RandomStream(mix64(self.derived_seed ^ fnv1a64(tag.encode("utf-8"))))


def derive_stream(key: StreamKey) -> RandomStream:
    seed = mix64(key.master_seed & MASK64)
    return RandomStream(mix64(seed ^ fnv1a64(key.table_tag.encode("utf-8"))))


def stream_for(master_seed: int, table_tag: str) -> RandomStream:
    return derive_stream(StreamKey(master_seed, table_tag))


def value_at(s: RandomStream, i: int) -> int:
    return s.value_at(i)


def to_unit(draws: np.ndarray) -> np.ndarray:
    return (np.asarray(draws, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * _U53


def permutation(stream: RandomStream, n: int) -> np.ndarray:
    """Seeded uniform permutation of ``range(n)``: sort ids by their draw."""
    draws = stream.values_at(np.arange(n, dtype=np.uint64))
    return np.argsort(draws, kind="stable").astype(np.int64)
