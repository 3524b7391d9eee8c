"""Residue sets modulo p: factorial sets, product/quotient/sum sets, energy.

A ResidueSet stores its elements either as a dense boolean mask over
[0, p-1] or as a sparse frozenset. Dense is used whenever p <= 2**27 or
the set is denser than 1/64; both forms answer every query identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

import numpy as np

from .errors import BudgetExceeded, ModulusMismatch
from .factorials import factorial_range
from .modular import PrimeModulus, as_modulus, inv_array, prime_sieve
from .sketch import HyperLogLog

DENSE_LIMIT = 1 << 27
DEFAULT_BUDGET = 1 << 34
# elements per vectorised pair block
PAIR_BLOCK = 1 << 22


def _prefer_dense(p: int, size: int) -> bool:
    return p <= DENSE_LIMIT or size * 64 > p


class ResidueSet:
    """Immutable set of residues modulo a prime."""

    __slots__ = ("modulus", "_mask", "_keys", "_card")

    def __init__(self, modulus: PrimeModulus, mask: np.ndarray | None = None,
                 keys: frozenset | None = None):
        if (mask is None) == (keys is None):
            raise ValueError("give exactly one of mask or keys")
        self.modulus = as_modulus(modulus)
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != (self.modulus.p,):
                raise ValueError("mask length must equal p")
            mask = mask.copy()
            mask.setflags(write=False)
            self._card = int(np.count_nonzero(mask))
        else:
            keys = frozenset(int(k) for k in keys)
            if any(not 0 <= k < self.modulus.p for k in keys):
                raise ValueError("sparse keys must be reduced residues")
            self._card = len(keys)
        self._mask = mask
        self._keys = keys

    @classmethod
    def from_values(cls, modulus, values: Iterable[int], representation: str = "auto") -> "ResidueSet":
        m = as_modulus(modulus)
        arr = np.unique(np.asarray(list(values) if not isinstance(values, np.ndarray) else values,
                                   dtype=np.int64) % m.p)
        if representation == "auto":
            representation = "dense" if _prefer_dense(m.p, arr.size) else "sparse"
        if representation == "dense":
            mask = np.zeros(m.p, dtype=bool)
            mask[arr] = True
            return cls(m, mask=mask)
        if representation == "sparse":
            return cls(m, keys=frozenset(arr.tolist()))
        raise ValueError(f"unknown representation {representation!r}")

    @property
    def p(self) -> int:
        return self.modulus.p

    @property
    def representation(self) -> str:
        return "dense" if self._mask is not None else "sparse"

    def __len__(self) -> int:
        return self._card

    @property
    def cardinality(self) -> int:
        return self._card

    def __contains__(self, x) -> bool:
        x = int(x) % self.p
        if self._mask is not None:
            return bool(self._mask[x])
        return x in self._keys

    def contains_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64) % self.p
        if self._mask is not None:
            return self._mask[xs]
        return np.isin(xs, self.to_array())

    def to_array(self) -> np.ndarray:
        """Sorted int64 array of the elements."""
        if self._mask is not None:
            return np.flatnonzero(self._mask).astype(np.int64)
        return np.array(sorted(self._keys), dtype=np.int64)

    def __iter__(self) -> Iterator[int]:
        return iter(self.to_array().tolist())

    def mask(self) -> np.ndarray:
        if self._mask is not None:
            return self._mask
        out = np.zeros(self.p, dtype=bool)
        out[self.to_array()] = True
        return out

    def as_dense(self) -> "ResidueSet":
        return self if self._mask is not None else ResidueSet(self.modulus, mask=self.mask())

    def as_sparse(self) -> "ResidueSet":
        return self if self._keys is not None else ResidueSet(self.modulus, keys=frozenset(self.to_array().tolist()))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResidueSet):
            return NotImplemented
        return self.p == other.p and len(self) == len(other) and np.array_equal(self.to_array(), other.to_array())

    __hash__ = None

    def __repr__(self) -> str:
        return f"ResidueSet(p={self.p}, n={len(self)}, {self.representation})"

    def export_text(self) -> str:
        body = "".join(f"{v}\n" for v in self.to_array().tolist())
        return f"p={self.p} n={len(self)}\n{body}"

    def export(self, path) -> None:
        Path(path).write_text(self.export_text(), newline="\n")

    @classmethod
    def from_text(cls, text: str, representation: str = "auto") -> "ResidueSet":
        lines = text.splitlines()
        header = dict(field.split("=") for field in lines[0].split())
        values = [int(line) for line in lines[1:] if line.strip()]
        out = cls.from_values(int(header["p"]), values, representation)
        if len(out) != int(header["n"]) or len(values) != len(out):
            raise ValueError("set file is inconsistent with its header")
        return out

    @classmethod
    def load(cls, path, representation: str = "auto") -> "ResidueSet":
        return cls.from_text(Path(path).read_text(), representation)


class IntervalView:
    """The residues 1..N (N < p), never materialised as a whole."""

    def __init__(self, modulus, N: int):
        self.modulus = as_modulus(modulus)
        if not 1 <= N < self.modulus.p:
            raise ValueError(f"interval length must lie in [1, p-1], got {N}")
        self.N = N

    def __len__(self) -> int:
        return self.N

    @property
    def descriptor(self) -> str:
        return f"interval(N={self.N})"

    def chunks(self, size: int) -> Iterator[np.ndarray]:
        for lo in range(1, self.N + 1, size):
            yield np.arange(lo, min(lo + size, self.N + 1), dtype=np.int64)


class PrimesView:
    """Primes q <= N (N < p), produced segment by segment."""

    def __init__(self, modulus, N: int):
        self.modulus = as_modulus(modulus)
        if not 1 <= N < self.modulus.p:
            raise ValueError(f"prime bound must lie in [1, p-1], got {N}")
        self.N = N
        self._len = None

    def __len__(self) -> int:
        if self._len is None:
            self._len = sum(len(c) for c in self.chunks(1 << 16))
        return self._len

    @property
    def descriptor(self) -> str:
        return f"primes(N={self.N})"

    def chunks(self, size: int) -> Iterator[np.ndarray]:
        base = np.flatnonzero(prime_sieve(math.isqrt(self.N)))
        for lo in range(0, self.N + 1, size):
            hi = min(lo + size, self.N + 1)
            flags = np.ones(hi - lo, dtype=bool)
            flags[: max(0, 2 - lo)] = False
            for q in base.tolist():
                start = max(q * q, -(-lo // q) * q)
                flags[start - lo :: q] = False
            found = np.flatnonzero(flags) + lo
            if found.size:
                yield found.astype(np.int64)


def _check_same(*sets) -> PrimeModulus:
    moduli = {s.modulus.p for s in sets}
    if len(moduli) != 1:
        raise ModulusMismatch(f"sets live modulo different primes {sorted(moduli)}")
    return sets[0].modulus


def _guard(cost: int, budget: int, what: str) -> None:
    if cost > budget:
        raise BudgetExceeded(
            f"{what} needs {cost} pair operations, above the budget {budget}; "
            "use estimate_product_cardinality instead")


def _combine(A: ResidueSet, B: ResidueSet, op: Callable, full: int,
             representation: str | None) -> ResidueSet:
    """All op(a, b) with a in A, b in B. op must be commutative."""
    m = A.modulus
    small, large = (A, B) if len(A) <= len(B) else (B, A)
    if representation is None:
        both_sparse = A.representation == "sparse" and B.representation == "sparse"
        representation = "sparse" if both_sparse or m.p > DENSE_LIMIT else "dense"
    xs, ys = small.to_array(), large.to_array()
    if xs.size == 0 or ys.size == 0:
        return ResidueSet.from_values(m, [], representation)
    rows = max(1, PAIR_BLOCK // ys.size)
    if representation == "dense":
        acc = np.zeros(m.p, dtype=bool)
        for lo in range(0, xs.size, rows):
            acc[op(xs[lo:lo + rows, None], ys[None, :]).ravel()] = True
            if np.count_nonzero(acc) == full:
                break
        return ResidueSet(m, mask=acc)
    found: set[int] = set()
    for lo in range(0, xs.size, rows):
        found.update(np.unique(op(xs[lo:lo + rows, None], ys[None, :])).tolist())
        if len(found) == full:
            break
    return ResidueSet(m, keys=frozenset(found))


def _product_full(A: ResidueSet, B: ResidueSet) -> int:
    zero = (0 in A and len(B) > 0) or (0 in B and len(A) > 0)
    return A.p - 1 + int(zero)


def product_set(A: ResidueSet, B: ResidueSet, budget: int = DEFAULT_BUDGET,
                representation: str | None = None) -> ResidueSet:
    """{a*b mod p : a in A, b in B}."""
    m = _check_same(A, B)
    _guard(len(A) * len(B), budget, "product_set")
    return _combine(A, B, m.mul_array, _product_full(A, B), representation)


def inverse_set(B: ResidueSet) -> ResidueSet:
    """{b^-1 : b in B}; B must avoid 0."""
    if 0 in B:
        raise ZeroDivisionError("quotient by a set containing 0")
    rep = B.representation
    return ResidueSet.from_values(B.modulus, inv_array(B.to_array(), B.modulus), rep)


def quotient_set(A: ResidueSet, B: ResidueSet, budget: int = DEFAULT_BUDGET,
                 representation: str | None = None) -> ResidueSet:
    """{a * b^-1 mod p : a in A, b in B}."""
    m = _check_same(A, B)
    _guard(len(A) * len(B), budget, "quotient_set")
    Binv = inverse_set(B)
    return _combine(A, Binv, m.mul_array, _product_full(A, Binv), representation)


def sumset(A: ResidueSet, B: ResidueSet, budget: int = DEFAULT_BUDGET,
           representation: str | None = None) -> ResidueSet:
    """{a + b mod p : a in A, b in B}."""
    m = _check_same(A, B)
    _guard(len(A) * len(B), budget, "sumset")
    return _combine(A, B, lambda x, y: (x + y) % m.p, m.p, representation)


def build_factorial_set(m, N: int, allow_zero_tail: bool = False,
                        include_zero_index: bool = False, L: int = 0) -> ResidueSet:
    """Distinct values of n! mod p for n = L+1..L+N (and 0! = 1 on request)."""
    m = as_modulus(m)
    window = factorial_range(L, N, m, allow_zero_tail=allow_zero_tail)
    values = window.values
    if include_zero_index:
        values = np.append(values, 1)
    return ResidueSet.from_values(m, values)


def set_from(m, kind: str, N: int) -> ResidueSet:
    """Materialise one of the named families as an explicit ResidueSet."""
    m = as_modulus(m)
    if kind == "factorial":
        return build_factorial_set(m, N)
    if kind == "interval":
        return ResidueSet.from_values(m, np.arange(1, N + 1))
    if kind == "primes":
        return ResidueSet.from_values(m, np.concatenate(list(PrimesView(m, N).chunks(1 << 16)) or [np.empty(0, np.int64)]))
    raise ValueError(f"unknown set family {kind!r}")


@dataclass(frozen=True)
class EnergyCount:
    count: int
    left: str
    right: str
    p: int
    left_size: int
    right_size: int
    product_cardinality: int

    @property
    def diagonal(self) -> int:
        return self.left_size * self.right_size


def _descriptor(S) -> str:
    return S.descriptor if hasattr(S, "descriptor") else f"set(n={len(S)})"


def _chunks(S, size) -> Iterator[np.ndarray]:
    if isinstance(S, ResidueSet):
        arr = S.to_array()
        for lo in range(0, arr.size, size):
            yield arr[lo:lo + size]
    else:
        yield from S.chunks(size)


def multiplicative_energy(S, M: ResidueSet, budget: int = DEFAULT_BUDGET) -> EnergyCount:
    """Ordered quadruples (s1, m1, s2, m2) with s1*m1 = s2*m2 mod p.

    Products are bucketed; the count is the sum of squared bucket sizes.
    S may be a ResidueSet, an IntervalView or a PrimesView.
    """
    m = M.modulus
    if S.modulus.p != m.p:
        raise ModulusMismatch("energy operands live modulo different primes")
    if 0 in M or (isinstance(S, ResidueSet) and 0 in S):
        raise ValueError("energy operands must avoid 0")
    size_s = len(S)
    _guard(size_s * len(M), budget, "multiplicative_energy")
    marr = M.to_array()
    if marr.size == 0 or size_s == 0:
        return EnergyCount(0, _descriptor(S), _descriptor(M), m.p, size_s, len(M), 0)
    rows = max(1, PAIR_BLOCK // marr.size)
    dense = m.p <= DENSE_LIMIT
    counts = np.zeros(m.p, dtype=np.int64) if dense else {}
    for chunk in _chunks(S, rows):
        prods = m.mul_array(chunk[:, None], marr[None, :]).ravel()
        if dense:
            if prods.size * 8 >= m.p:
                counts += np.bincount(prods, minlength=m.p)
            else:
                np.add.at(counts, prods, 1)
        else:
            vals, cnt = np.unique(prods, return_counts=True)
            for v, c in zip(vals.tolist(), cnt.tolist()):
                counts[v] = counts.get(v, 0) + c
    if dense:
        nz = counts[counts > 0]
        energy = int(np.dot(nz.astype(object), nz.astype(object))) if nz.max() > (1 << 31) else int(np.dot(nz, nz))
        support = int(nz.size)
    else:
        energy = sum(c * c for c in counts.values())
        support = len(counts)
    return EnergyCount(energy, _descriptor(S), _descriptor(M), m.p, size_s, len(M), support)


@dataclass(frozen=True)
class ProductEstimate:
    estimate: float
    low: float
    high: float
    exact: bool
    samples: int
    distinct_sampled: float


def _representation_counts(values: np.ndarray, small: np.ndarray, other: ResidueSet,
                           m: PrimeModulus) -> np.ndarray:
    """r(v) = #{(x, y) : x in small, y in other, x*y = v} for each v (v != 0)."""
    nonzero_small = small[small != 0]
    inv_small = inv_array(nonzero_small, m) if nonzero_small.size else nonzero_small
    out = np.zeros(values.size, dtype=np.int64)
    rows = max(1, PAIR_BLOCK // max(1, inv_small.size))
    for lo in range(0, values.size, rows):
        v = values[lo:lo + rows]
        cand = m.mul_array(v[:, None], inv_small[None, :])
        out[lo:lo + rows] = other.contains_many(cand.ravel()).reshape(cand.shape).sum(axis=1)
    return out


def estimate_product_cardinality(A: ResidueSet, B: ResidueSet, budget: int = 20000,
                                 seed: int = 0, z: float = 1.96) -> ProductEstimate:
    """Estimate |A*B| by uniform pair sampling.

    A sampled pair (a, b) contributes 1/r(ab), r being the number of pairs
    with the same product; the mean of these weights times |A||B| is
    unbiased for |A*B|. Sampled products also feed a HyperLogLog sketch.
    With budget >= |A||B| the exact product set is enumerated instead.
    """
    m = _check_same(A, B)
    total = len(A) * len(B)
    if total == 0:
        return ProductEstimate(0.0, 0.0, 0.0, True, 0, 0.0)
    if budget >= total:
        exact = float(len(product_set(A, B)))
        return ProductEstimate(exact, exact, exact, True, total, exact)
    rng = np.random.default_rng(seed)
    a_arr, b_arr = A.to_array(), B.to_array()
    small, other = (a_arr, B) if a_arr.size <= b_arr.size else (b_arr, A)
    zero_pairs = (len(A) if 0 in B else 0) + (len(B) if 0 in A else 0) - int(0 in A and 0 in B)
    sketch = HyperLogLog(precision=12, seed=seed)
    weights = np.empty(budget, dtype=np.float64)
    batch = 1 << 14
    for lo in range(0, budget, batch):
        n = min(batch, budget - lo)
        prods = m.mul_array(a_arr[rng.integers(0, a_arr.size, n)], b_arr[rng.integers(0, b_arr.size, n)])
        sketch.add_many(prods)
        r = np.full(n, zero_pairs, dtype=np.int64)
        nz = prods != 0
        r[nz] = _representation_counts(prods[nz], small, other, m)
        weights[lo:lo + n] = 1.0 / r
    scale = float(total)
    est = scale * float(np.mean(weights))
    se = scale * float(np.std(weights, ddof=1)) / math.sqrt(budget) if budget > 1 else scale
    high = min(est + z * se, float(min(total, m.p)))
    low = max(est - z * se, 1.0)
    return ProductEstimate(est, low, high, False, budget, sketch.estimate())
