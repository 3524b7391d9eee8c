"""Streaming n! mod p over index windows.

Windows are evaluated with a two-phase block scan: the index range is cut
into blocks, each block's running product is formed independently (one
numpy lane per block), the block totals are chained sequentially, and the
resulting offsets are folded back into every block. The output is
bit-identical to the plain sequential recurrence.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .modular import PrimeModulus, as_modulus

DEFAULT_STRIDE = 1 << 20
CHUNK = 1 << 22


class WindowError(ValueError):
    """Window parameters are invalid or cross n = p without permission."""


class CheckpointCorruption(ValueError):
    pass


@dataclass(frozen=True)
class FactorialCheckpoint:
    p: int
    n: int
    value: int

    @property
    def checksum(self) -> int:
        return zlib.crc32(f"{self.p},{self.n},{self.value}".encode())

    def to_line(self) -> str:
        return f"{self.p},{self.n},{self.value},{self.checksum}\n"

    @classmethod
    def from_line(cls, line: str) -> "FactorialCheckpoint":
        try:
            p, n, value, checksum = (int(x) for x in line.strip().split(","))
        except ValueError as exc:
            raise CheckpointCorruption(f"malformed checkpoint record {line!r}") from exc
        cp = cls(p, n, value)
        if cp.checksum != checksum:
            raise CheckpointCorruption(f"checksum mismatch in record {line!r}")
        return cp


def write_checkpoints(path, checkpoints: Iterable[FactorialCheckpoint]) -> None:
    with open(path, "w", newline="\n") as fh:
        for cp in checkpoints:
            fh.write(cp.to_line())


def read_checkpoints(path) -> list[FactorialCheckpoint]:
    return [FactorialCheckpoint.from_line(line) for line in Path(path).read_text().splitlines() if line]


def factorial_mod(n: int, m: PrimeModulus) -> int:
    """n! mod p; zero once n >= p."""
    m = as_modulus(m)
    if n < 0:
        raise ValueError("n must be non-negative")
    if n >= m.p:
        return 0
    if n < 4096 or not m.numpy_safe:
        acc = 1
        for k in range(2, n + 1):
            acc = acc * k % m.p
        return acc
    return int(range_product(1, n, m))


def _block_prefix(lo: int, count: int, p: int, start: int, blocks: int | None) -> np.ndarray:
    """start * lo * (lo+1) * ... * (lo+j) mod p for j < count, by block scan."""
    nblocks = blocks or max(1, math.isqrt(count))
    nblocks = min(nblocks, count)
    width = -(-count // nblocks)
    factors = np.ones(nblocks * width, dtype=np.int64)
    factors[:count] = np.arange(lo, lo + count, dtype=np.int64) % p
    factors = factors.reshape(nblocks, width)

    run = np.empty_like(factors)
    acc = np.ones(nblocks, dtype=np.int64)
    for j in range(width):
        acc = acc * factors[:, j] % p
        run[:, j] = acc

    offsets = np.empty(nblocks, dtype=np.int64)
    carry = start % p
    for b in range(nblocks):
        offsets[b] = carry
        carry = carry * int(run[b, -1]) % p

    return (run * offsets[:, None] % p).ravel()[:count]


def _sequential_prefix(lo: int, count: int, p: int, start: int) -> np.ndarray:
    out = np.empty(count, dtype=np.int64 if p < (1 << 63) else object)
    acc = start % p
    for j in range(count):
        acc = acc * ((lo + j) % p) % p
        out[j] = acc
    return out


def range_product(lo: int, hi: int, m: PrimeModulus) -> int:
    """lo * (lo+1) * ... * hi mod p (1 for an empty range)."""
    acc = 1
    for _, chunk in _prefix_chunks(lo, hi - lo + 1, m, 1, method="auto", blocks=None):
        acc = int(chunk[-1])
    return acc


def _prefix_chunks(lo, count, m, start, method, blocks) -> Iterator[tuple[int, np.ndarray]]:
    p = m.p
    acc = start % p
    pos = 0
    while pos < count:
        size = min(CHUNK, count - pos)
        if method == "sequential" or not m.numpy_safe:
            values = _sequential_prefix(lo + pos, size, p, acc)
        else:
            values = _block_prefix(lo + pos, size, p, acc, blocks)
        yield lo + pos, values
        acc = int(values[-1])
        pos += size


def stream_factorials(L: int, N: int, m: PrimeModulus, resume: FactorialCheckpoint | None = None,
                      method: str = "auto", blocks: int | None = None) -> Iterator[tuple[int, np.ndarray]]:
    """Yield (first index, values) chunks covering n! mod p for n = L+1..L+N."""
    m = as_modulus(m)
    if resume is not None:
        if resume.p != m.p:
            raise CheckpointCorruption(f"checkpoint is for p={resume.p}, not {m.p}")
        if resume.n > L:
            raise WindowError(f"resume checkpoint n={resume.n} lies beyond window start L={L}")
        if not 0 <= resume.value < m.p:
            raise CheckpointCorruption("checkpoint value is not a reduced residue")
        start_n, start_val = resume.n, resume.value
    else:
        start_n, start_val = 0, 1
    if L > start_n:
        start_val = start_val * range_product(start_n + 1, L, m) % m.p
    yield from _prefix_chunks(L + 1, N, m, start_val, method, blocks)


@dataclass(frozen=True)
class FactorialWindow:
    modulus: PrimeModulus
    L: int
    N: int
    values: np.ndarray = field(repr=False)
    checkpoints: tuple[FactorialCheckpoint, ...] = field(default=(), repr=False)

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.L + 1, self.L + self.N + 1, dtype=np.int64)

    def __len__(self):
        return self.N

    def __iter__(self):
        return zip(range(self.L + 1, self.L + self.N + 1), (int(v) for v in self.values))

    def value(self, n: int) -> int:
        if not self.L < n <= self.L + self.N:
            raise IndexError(n)
        return int(self.values[n - self.L - 1])


def check_window(L: int, N: int, m: PrimeModulus, allow_zero_tail: bool = False) -> None:
    if L < 0 or N < 1:
        raise WindowError(f"need L >= 0 and N >= 1, got L={L}, N={N}")
    if L + N >= m.p and not allow_zero_tail:
        raise WindowError(
            f"window L+N={L + N} reaches p={m.p}; factorials vanish there (pass allow_zero_tail)")


def factorial_range(L: int, N: int, m: PrimeModulus, resume: FactorialCheckpoint | None = None,
                    stride: int = DEFAULT_STRIDE, allow_zero_tail: bool = False,
                    method: str = "auto", blocks: int | None = None) -> FactorialWindow:
    """Window of (n, n! mod p) for n = L+1..L+N.

    Checkpoints are emitted at every absolute index divisible by `stride`,
    so the checkpoint stream depends only on (p, stride).
    """
    m = as_modulus(m)
    check_window(L, N, m, allow_zero_tail)
    parts = []
    checkpoints = []
    for first, chunk in stream_factorials(L, N, m, resume, method, blocks):
        parts.append(np.asarray(chunk, dtype=np.int64))
        k0 = -(-first // stride) * stride
        for n in range(k0, first + len(chunk), stride):
            checkpoints.append(FactorialCheckpoint(m.p, n, int(chunk[n - first])))
    values = parts[0] if len(parts) == 1 else np.concatenate(parts)
    values.setflags(write=False)
    if L + 1 <= m.p - 1 <= L + N and int(values[m.p - 2 - L]) != m.p - 1:
        raise ArithmeticError(f"Wilson check failed: (p-1)! != -1 mod {m.p}")
    return FactorialWindow(m, L, N, values, tuple(checkpoints))


def factorial_table(m: PrimeModulus, upto: int | None = None) -> np.ndarray:
    """Array t with t[n] = n! mod p for 0 <= n <= upto (default p - 1)."""
    m = as_modulus(m)
    upto = m.p - 1 if upto is None else upto
    table = np.empty(upto + 1, dtype=np.int64)
    table[0] = 1
    if upto:
        table[1:] = factorial_range(0, upto, m, allow_zero_tail=True).values
    return table
