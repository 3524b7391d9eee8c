"""Exponential sums over factorials and their even moments.

S(a) = sum_{n=L+1}^{L+N} e_p(a * n!). By orthogonality
(1/p) * sum_a |S(a)|^(2l) equals J_l(L, N), the number of solutions of
n_1! + ... + n_l! = n_{l+1}! + ... + n_{2l}!  (mod p)
with every index in the window. J_l is counted exactly by bucketing the
l-fold factorial sums and summing squared bucket sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceeded, CapExceeded
from .factorials import factorial_range
from .modular import PHASE_TABLE_LIMIT, PrimeModulus, as_modulus, phases
from .residues import DENSE_LIMIT, ResidueSet

FREQUENCY_CAP = PHASE_TABLE_LIMIT
MOMENT_BUDGET = 1 << 32
FREQ_CHUNK = 1 << 16


@dataclass(frozen=True)
class SumValue:
    a: int
    value: complex
    terms: int

    @property
    def magnitude(self) -> float:
        return abs(self.value)


@dataclass(frozen=True)
class MomentCount:
    ell: int
    L: int
    N: int
    p: int
    count: int


@dataclass(frozen=True)
class MaxResult:
    a: int
    magnitude: float
    strategy: str
    evaluated: int


def _window_histogram(L: int, N: int, m: PrimeModulus) -> tuple[np.ndarray, np.ndarray]:
    """Distinct factorial values of the window and their multiplicities."""
    values = factorial_range(L, N, m).values
    return np.unique(values, return_counts=True)


def _fsum_complex(z: np.ndarray) -> complex:
    return complex(math.fsum(z.real.tolist()), math.fsum(z.imag.tolist()))


def single_sum(a: int, L: int, N: int, m) -> SumValue:
    """sum_{n=L+1}^{L+N} e_p(a * n!), summed with exact rounding (fsum)."""
    m = as_modulus(m)
    values = factorial_range(L, N, m).values
    z = phases(m.mul_array(a % m.p, values), m)
    return SumValue(a % m.p, _fsum_complex(z), N)


def double_sum(a: int, L: int, N: int, A: ResidueSet) -> SumValue:
    """sum_{n=L+1}^{L+N} sum_{x in A} e_p(a * n! * x).

    Equal factorial values share one inner sum over A, weighted by how
    often the value occurs in the window.
    """
    m = A.modulus
    if len(A) == 0:
        raise ValueError("double_sum needs a nonempty set")
    xs = A.to_array()
    vals, mult = _window_histogram(L, N, m)
    inner_re, inner_im = [], []
    for v, h in zip(vals.tolist(), mult.tolist()):
        z = phases(m.mul_array(a % m.p * v % m.p, xs), m)
        inner = _fsum_complex(z)
        inner_re.append(h * inner.real)
        inner_im.append(h * inner.imag)
    return SumValue(a % m.p, complex(math.fsum(inner_re), math.fsum(inner_im)), N * len(A))


def _sums_at(freqs: np.ndarray, vals: np.ndarray, mult: np.ndarray, m: PrimeModulus) -> np.ndarray:
    """S(a) for every a in freqs, Neumaier-compensated across window terms.

    Terms are added in ascending order of factorial value, so the result for
    a given frequency does not depend on which other frequencies share the call.
    """
    re = np.zeros(freqs.size)
    im = np.zeros(freqs.size)
    cre = np.zeros(freqs.size)
    cim = np.zeros(freqs.size)
    for v, h in zip(vals.tolist(), mult.tolist()):
        z = phases(m.mul_array(freqs, v), m)
        for acc, comp, term in ((re, cre, h * z.real), (im, cim, h * z.imag)):
            t = acc + term
            big = np.abs(acc) >= np.abs(term)
            comp += np.where(big, (acc - t) + term, (term - t) + acc)
            acc[:] = t
    return (re + cre) + 1j * (im + cim)


def frequency_scan(L: int, N: int, m, cap: int = FREQUENCY_CAP, start: int = 0) -> np.ndarray:
    """Array of S(a) for a = start..p-1, processed in fixed-order a-ranges."""
    m = as_modulus(m)
    if m.p > cap:
        raise CapExceeded(f"full frequency scan refused: p={m.p} exceeds cap {cap}")
    vals, mult = _window_histogram(L, N, m)
    parts = [_sums_at(np.arange(lo, min(lo + FREQ_CHUNK, m.p), dtype=np.int64), vals, mult, m)
             for lo in range(start, m.p, FREQ_CHUNK)]
    return np.concatenate(parts)


def max_single(L: int, N: int, m, strategy: str = "full", k: int | None = None,
               seed: int | None = None, cap: int = FREQUENCY_CAP) -> MaxResult:
    """max over a != 0 of |S(a)|; smallest maximising a on ties.

    "sampled" evaluates k uniform frequencies, giving a lower bound.
    """
    m = as_modulus(m)
    if strategy == "full":
        mags = np.abs(frequency_scan(L, N, m, cap, start=1))
        i = int(np.argmax(mags))
        return MaxResult(i + 1, float(mags[i]), "full", m.p - 1)
    if strategy == "sampled":
        if k is None or seed is None:
            raise ValueError("sampled strategy needs k and seed")
        freqs = np.sort(np.random.default_rng(seed).integers(1, m.p, size=k))
        vals, mult = _window_histogram(L, N, m)
        mags = np.abs(_sums_at(freqs, vals, mult, m))
        i = int(np.argmax(mags))
        return MaxResult(int(freqs[i]), float(mags[i]), "sampled", k)
    raise ValueError(f"unknown strategy {strategy!r}")


def _self_convolve_counts(vals, mult, ell, p, budget):
    """Counts c(s) of ell-tuples of window indices whose factorial sum is s."""
    N = int(mult.sum())
    support = len(vals)
    enum_cost = N ** ell
    conv_cost = (ell - 1) * support * p
    if min(enum_cost, conv_cost) > budget:
        raise BudgetExceeded(
            f"moment count for ell={ell} needs ~{min(enum_cost, conv_cost)} operations, "
            f"above budget {budget}", parameter="ell")
    if enum_cost <= conv_cost:
        sums = np.zeros(1, dtype=np.int64)
        weights = np.ones(1, dtype=np.int64)
        for _ in range(ell):
            sums = ((sums[:, None] + vals[None, :]) % p).ravel()
            weights = (weights[:, None] * mult[None, :]).ravel()
            sums, inverse = np.unique(sums, return_inverse=True)
            weights = np.bincount(inverse.ravel(), weights=weights).astype(np.int64) if N ** ell < (1 << 52) \
                else _object_bincount(inverse.ravel(), weights, sums.size)
        return weights
    exact_obj = N ** ell >= (1 << 62)
    dtype = object if exact_obj else np.int64
    base = np.zeros(p, dtype=dtype)
    base[vals] = mult
    counts = base.copy()
    for _ in range(ell - 1):
        nxt = np.zeros(p, dtype=dtype)
        for v, h in zip(vals.tolist(), mult.tolist()):
            nxt += h * np.roll(counts, v)
        counts = nxt
    return counts[counts != 0]


def _object_bincount(idx, weights, size):
    out = np.zeros(size, dtype=object)
    for i, w in zip(idx.tolist(), weights.tolist()):
        out[i] += int(w)
    return out


def moment_count(L: int, N: int, m, ell: int, budget: int = MOMENT_BUDGET) -> MomentCount:
    """Exact J_ell(L, N) = sum_s c(s)^2."""
    m = as_modulus(m)
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if m.p > DENSE_LIMIT:
        raise BudgetExceeded(f"moment counting needs a dense accumulator; p={m.p} too large", "p")
    vals, mult = _window_histogram(L, N, m)
    counts = _self_convolve_counts(vals, mult.astype(np.int64), ell, m.p, budget)
    total = sum(int(c) * int(c) for c in counts.tolist())
    return MomentCount(ell, L, N, m.p, total)


def power_moment(L: int, N: int, m, exponent: int, cap: int = FREQUENCY_CAP,
                 sums: np.ndarray | None = None) -> float:
    """(1/p) * sum_{a=0}^{p-1} |S(a)|^exponent."""
    m = as_modulus(m)
    if sums is None:
        sums = frequency_scan(L, N, m, cap)
    return math.fsum((np.abs(sums) ** exponent).tolist()) / m.p


def moment_identity_check(L: int, N: int, m, ell: int, cap: int = FREQUENCY_CAP) -> float:
    """Relative gap between the 2*ell-th moment of S and the exact count J_ell."""
    moment = power_moment(L, N, m, 2 * ell, cap)
    J = moment_count(L, N, m, ell).count
    return abs(moment - J) / J


def holder_check(L: int, N: int, m, ell: int, cap: int = FREQUENCY_CAP) -> tuple[float, float]:
    """Return ((1/p) sum |S|^(2l+1), sqrt(J_l * J_{l+1})); the first never exceeds the second."""
    lhs = power_moment(L, N, m, 2 * ell + 1, cap)
    rhs = math.sqrt(moment_count(L, N, m, ell).count * moment_count(L, N, m, ell + 1).count)
    return lhs, rhs
