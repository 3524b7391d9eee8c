"""HyperLogLog distinct-count sketch for 64-bit integer keys."""

from __future__ import annotations

import math

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)


def splitmix64(x: np.ndarray, seed: int = 0) -> np.ndarray:
    """Vectorised splitmix64 finaliser; a good 64-bit mixer for integer keys."""
    with np.errstate(over="ignore"):
        z = np.asarray(x).astype(np.uint64) + np.uint64((0x9E3779B97F4A7C15 * (seed + 1)) & 0xFFFFFFFFFFFFFFFF)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _leading_zeros(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    count = np.zeros(x.shape, dtype=np.int64)
    for s in (32, 16, 8, 4, 2, 1):
        top_clear = x < np.uint64(1 << (64 - s))
        count[top_clear] += s
        x[top_clear] <<= np.uint64(s)
    count[x == 0] = 64
    return count


class HyperLogLog:
    def __init__(self, precision: int = 14, seed: int = 0):
        if not 4 <= precision <= 18:
            raise ValueError("precision must lie in [4, 18]")
        self.precision = precision
        self.seed = seed
        self.m = 1 << precision
        self.registers = np.zeros(self.m, dtype=np.uint8)

    def add_many(self, keys) -> None:
        h = splitmix64(np.asarray(keys, dtype=np.int64).ravel(), self.seed)
        idx = (h >> np.uint64(64 - self.precision)).astype(np.int64)
        rest = (h << np.uint64(self.precision)) & _MASK
        width = 64 - self.precision
        rank = np.minimum(_leading_zeros(rest) + 1, width + 1).astype(np.uint8)
        np.maximum.at(self.registers, idx, rank)

    def merge(self, other: "HyperLogLog") -> None:
        if (other.precision, other.seed) != (self.precision, self.seed):
            raise ValueError("sketches are incompatible")
        np.maximum(self.registers, other.registers, out=self.registers)

    def estimate(self) -> float:
        m = self.m
        alpha = 0.7213 / (1 + 1.079 / m)
        raw = alpha * m * m / float(np.sum(np.ldexp(1.0, -self.registers.astype(np.int64))))
        zeros = int(np.count_nonzero(self.registers == 0))
        if raw <= 2.5 * m and zeros:
            return m * math.log(m / zeros)
        return raw
