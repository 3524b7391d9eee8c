"""Residue arithmetic modulo a prime and primality utilities."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Known-complete Miller-Rabin witnesses for every n < 3.3 * 10**24.
_MR_WITNESSES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)
_SMALL_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

MAX_MODULUS = 1 << 63
# products of two residues fit in int64 below this bound
NUMPY_SAFE = 1 << 31
PHASE_TABLE_LIMIT = 1 << 20


class NotInvertibleError(ZeroDivisionError):
    pass


def is_prime(n: int) -> bool:
    """Deterministic primality test, exact on the whole 64-bit range."""
    if n < 2:
        return False
    for q in _SMALL_PRIMES:
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_WITNESSES:
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    n = max(n, 2)
    if n > 2 and n % 2 == 0:
        n += 1
    while not is_prime(n):
        n += 1 if n == 2 else 2
    return n


def primes_in_range(lo: int, hi: int) -> list[int]:
    """All primes in [lo, hi], by next-prime iteration from lo."""
    out = []
    q = next_prime(lo)
    while q <= hi:
        out.append(q)
        q = next_prime(q + 1)
    return out


def prime_sieve(n: int) -> np.ndarray:
    """Boolean array flags[k] = k is prime, for 0 <= k <= n."""
    flags = np.ones(n + 1, dtype=bool)
    flags[: min(2, n + 1)] = False
    for q in range(2, math.isqrt(n) + 1):
        if flags[q]:
            flags[q * q :: q] = False
    return flags


@dataclass(frozen=True)
class PrimeModulus:
    """A verified prime p.

    Construction fails unless p is prime and below 2**63. Instances are
    immutable and hashable, so they can key caches.
    """

    p: int
    numpy_safe: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = int(self.p)
        if not 2 <= p < MAX_MODULUS or not is_prime(p):
            raise ValueError(f"modulus must be a prime below 2**63, got {self.p}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "numpy_safe", p < NUMPY_SAFE)

    def __int__(self):
        return self.p

    def reduce(self, x: int) -> int:
        return x % self.p

    def mul_array(self, a, b) -> np.ndarray:
        """Elementwise a*b mod p for integer arrays (broadcasting)."""
        p = self.p
        if self.numpy_safe:
            return (np.asarray(a, dtype=np.int64) * np.asarray(b, dtype=np.int64)) % p
        prod = np.asarray(a, dtype=object) * np.asarray(b, dtype=object) % p
        return prod.astype(np.int64)


def as_modulus(m) -> PrimeModulus:
    return m if isinstance(m, PrimeModulus) else PrimeModulus(int(m))


def mod_mul(a: int, b: int, m: PrimeModulus) -> int:
    # Python ints are arbitrary precision: the intermediate never wraps.
    return a * b % m.p


def mod_inv(a: int, m: PrimeModulus) -> int:
    a %= m.p
    if a == 0:
        raise NotInvertibleError(f"0 has no inverse modulo {m.p}")
    return pow(a, -1, m.p)


def inv_array(values, m: PrimeModulus) -> np.ndarray:
    """Inverses of a nonzero residue array, by Fermat's little theorem."""
    values = np.asarray(values, dtype=np.int64)
    if np.any(values % m.p == 0):
        raise NotInvertibleError(f"0 has no inverse modulo {m.p}")
    p = m.p
    if not m.numpy_safe:
        return np.array([pow(int(v), -1, p) for v in values], dtype=np.int64)
    result = np.ones_like(values)
    base = values % p
    e = p - 2
    while e:
        if e & 1:
            result = result * base % p
        base = base * base % p
        e >>= 1
    return result


@lru_cache(maxsize=16)
def phase_table(p: int) -> np.ndarray:
    """All p-th roots of unity exp(2*pi*i*k/p), k = 0..p-1."""
    if p > PHASE_TABLE_LIMIT:
        raise ValueError(f"phase table refused for p={p} > {PHASE_TABLE_LIMIT}")
    k = np.arange(p, dtype=np.float64)
    table = np.exp(2j * np.pi * k / p)
    table.setflags(write=False)
    return table


def unit_phase(t: int, m: PrimeModulus) -> complex:
    """exp(2*pi*i*t/p)."""
    t %= m.p
    if m.p <= PHASE_TABLE_LIMIT:
        return complex(phase_table(m.p)[t])
    return cmath.exp(2j * math.pi * t / m.p)


def phases(t: np.ndarray, m: PrimeModulus) -> np.ndarray:
    """Vectorised unit_phase for an array of residues."""
    t = np.asarray(t, dtype=np.int64) % m.p
    if m.p <= PHASE_TABLE_LIMIT:
        return phase_table(m.p)[t]
    return np.exp(2j * np.pi * (t.astype(np.float64) / m.p))
