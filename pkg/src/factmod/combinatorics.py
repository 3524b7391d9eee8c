"""Exact checkers for product-set inequalities, and lower-bound curves.

Bound curves evaluate the right-hand side of a ">>" estimate with a caller
supplied constant. Exponents written as o(1) are evaluated at 0 and the
row is flagged as an asymptotic placeholder. log is the natural logarithm.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapExceeded
from .factorials import factorial_range
from .modular import PrimeModulus, as_modulus, mod_inv
from .residues import ResidueSet, product_set, quotient_set

ERDOS_CAP = 1 << 26
KATZ_SHEN_EXHAUSTIVE_MAX = 20


@dataclass(frozen=True)
class RuzsaResult:
    quotient: int
    xz: int
    zy: int
    z: int
    holds: bool

    @property
    def rhs(self) -> Fraction:
        return Fraction(self.xz * self.zy, self.z)


def ruzsa_check(X: ResidueSet, Y: ResidueSet, Z: ResidueSet) -> RuzsaResult:
    """|X/Y| <= |XZ| |ZY| / |Z|, evaluated in exact integers."""
    for S in (X, Y, Z):
        if 0 in S:
            raise ValueError("Ruzsa check needs sets inside the unit group")
        if len(S) == 0:
            raise ValueError("Ruzsa check needs nonempty sets")
    q = len(quotient_set(X, Y))
    xz = len(product_set(X, Z))
    zy = len(product_set(Z, Y))
    return RuzsaResult(q, xz, zy, len(Z), q * len(Z) <= xz * zy)


@dataclass(frozen=True)
class KatzShenResult:
    subset: tuple[int, ...]
    iterated: int
    ratio: float
    strategy: str


def _bits(values: np.ndarray) -> int:
    out = 0
    for v in values.tolist():
        out |= 1 << v
    return out


def katz_shen_ratio(X: ResidueSet, Bs: list[ResidueSet], strategy: str = "exhaustive") -> KatzShenResult:
    """Smallest |X' B_1...B_k| over X' in X with |X'| > |X|/2, as a ratio.

    ratio = |X' B_1...B_k| |X|^(k-1) / (|X B_1| ... |X B_k|).
    X' B_1...B_k is the union of the translates x * (B_1...B_k), so each
    candidate is scored with bitset unions. Since shrinking X' can only
    shrink the product set, the exhaustive search visits subsets of the
    minimal admissible size only.
    """
    if not Bs:
        raise ValueError("need at least one B set")
    for S in (X, *Bs):
        if 0 in S or len(S) == 0:
            raise ValueError("Katz-Shen sets must be nonempty and avoid 0")
    m = X.modulus
    n = len(X)
    if strategy == "exhaustive" and n > KATZ_SHEN_EXHAUSTIVE_MAX:
        raise CapExceeded(f"exhaustive subset search needs |X| <= {KATZ_SHEN_EXHAUSTIVE_MAX}, got {n}", "X")
    chain = Bs[0]
    for B in Bs[1:]:
        chain = product_set(chain, B)
    carr = chain.to_array()
    xs = X.to_array().tolist()
    translate = {x: _bits(m.mul_array(x, carr)) for x in xs}
    denom = math.prod(len(product_set(X, B)) for B in Bs)
    scale = n ** (len(Bs) - 1)
    size = n // 2 + 1

    def score(subset) -> int:
        acc = 0
        for x in subset:
            acc |= translate[x]
        return acc.bit_count() if hasattr(acc, "bit_count") else bin(acc).count("1")

    if strategy == "exhaustive":
        best, best_val = None, None
        for subset in itertools.combinations(xs, size):
            val = score(subset)
            if best_val is None or val < best_val:
                best, best_val = subset, val
    elif strategy == "greedy":
        best = list(xs)
        best_val = score(best)
        while len(best) > size:
            trial = [(score([y for y in best if y != x]), x) for x in best]
            best_val, drop = min(trial)
            best.remove(drop)
        best = tuple(best)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return KatzShenResult(tuple(best), best_val, best_val * scale / denom, strategy)


@dataclass(frozen=True)
class CGCountReport:
    p: int
    s0: int
    X: int
    Y: int
    count: int

    @property
    def ratio(self) -> float:
        return self.count / (1 + self.X * self.Y / self.p)


def cg_count(m, s0: int, X: int, Y: int) -> CGCountReport:
    """Pairs 1 <= x <= X, 1 <= y <= Y with x = s0*y (mod p) and gcd(x, y) = 1."""
    m = as_modulus(m)
    p = m.p
    if not (1 <= X < p and 1 <= Y < p):
        raise ValueError(f"need 1 <= X, Y < p, got X={X}, Y={Y}")
    s0 %= p
    count = 0
    for y in range(1, Y + 1):
        x = s0 * y % p
        if x == 0:
            x = p
        while x <= X:
            if math.gcd(x, y) == 1:
                count += 1
            x += p
    return CGCountReport(p, s0, X, Y, count)


@dataclass(frozen=True)
class ErdosStats:
    p: int
    distinct: int
    missing: int

    @property
    def missing_fraction(self) -> float:
        return self.missing / self.p

    @property
    def distinct_fraction(self) -> float:
        return self.distinct / self.p


def erdos_stats(m, cap: int = ERDOS_CAP) -> ErdosStats:
    """Distinct and missed residues of n! mod p over n = 1..p (n = p gives 0)."""
    m = as_modulus(m)
    if m.p > cap:
        raise CapExceeded(f"Erdos scan refused: p={m.p} exceeds cap {cap}")
    values = factorial_range(0, m.p, m, allow_zero_tail=True).values
    seen = np.zeros(m.p, dtype=bool)
    seen[values] = True
    distinct = int(np.count_nonzero(seen))
    return ErdosStats(m.p, distinct, m.p - distinct)


# -- bound curves -------------------------------------------------------------

PROFILES = ("lemma_quotient", "theorem_product", "theorem_small_n", "theorem_interval", "corollary_interval")


@dataclass(frozen=True)
class BoundProfile:
    """Parameters of one bound-curve evaluation.

    name selects the estimate:
      lemma_quotient      |A_N/A_N| lower bound (four ranges of N)
      theorem_product     |A_N A_N| for p^(1/2) <= N <= p^(7/8) log p
      theorem_small_n     |A_N A_N| for N < p^(3/5)
      theorem_interval    |I * M| for the interval I = {1..N} and |M| = M
      corollary_interval  |I * M| for N >= p^(1/2)
    """

    name: str
    p: int
    N: int
    M: int | None = None
    constant: float = 1.0
    cutoff: float = 1.0

    @property
    def K(self) -> Fraction:
        return Fraction(self.p, self.N)

    @property
    def Q(self) -> float:
        return self.N / (math.sqrt(self.p) * math.log(self.p) ** 2)

    @property
    def q_regime(self) -> bool:
        """True when N > p^(1/2) (log p)^2, i.e. Q > 1."""
        return self.N > math.sqrt(self.p) * math.log(self.p) ** 2


@dataclass(frozen=True)
class BoundValue:
    profile: str
    case: str
    value: float | None
    placeholder: bool

    @property
    def in_regime(self) -> bool:
        return self.value is not None


def _lemma_quotient(pr: BoundProfile):
    p, N = pr.p, pr.N
    lp = math.log(p)
    if N > p:
        return "out_of_regime", None, False
    if N >= p ** (7 / 8) * lp:
        return "full", float(p), False
    if N >= p ** (4 / 5) * lp ** (8 / 5):
        Q = pr.Q
        return "nq13_logq", N * Q ** (1 / 3) * math.log(Q) ** (-2 / 3), False
    if N >= p ** (4 / 5) * lp ** (4 / 5):
        return "nk12", N * math.sqrt(float(pr.K)), False
    if N >= pr.cutoff * math.sqrt(p) * lp ** 2:
        return "nq13", N * pr.Q ** (1 / 3), False
    return "out_of_regime", None, False


def _theorem_product(pr: BoundProfile):
    p, N = pr.p, pr.N
    lp = math.log(p)
    if p ** (29 / 40) * lp <= N <= p ** (7 / 8) * lp:
        return "upper", N / (p ** (1 / 8) * lp), False
    if math.sqrt(p) <= N <= p ** (29 / 40) * lp:
        return "lower", min(p ** (3 / 5), N ** (2 / 3) * p ** (1 / 6)), True
    return "out_of_regime", None, False


def _theorem_small_n(pr: BoundProfile):
    if pr.N < pr.p ** (3 / 5):
        return "n", float(pr.N), True
    return "out_of_regime", None, False


def _theorem_interval(pr: BoundProfile):
    p, N, M = pr.p, pr.N, pr.M
    if M is None or M < 1 or not 2 <= N < p:
        return "out_of_regime", None, False
    ln = math.log(N)
    branches = {"p_log2n": p / ln ** 2, "n2_log2n": N ** 2 / ln ** 2, "nm_logn": N * M / ln}
    case = min(branches, key=branches.get)
    return case, branches[case], False


def _corollary_interval(pr: BoundProfile):
    p, N, M = pr.p, pr.N, pr.M
    if M is None or M < 1 or N >= p:
        return "out_of_regime", None, False
    if N >= p ** (2 / 3):
        return "large_n", min(p, N * M), True
    if N >= math.sqrt(p):
        return "medium_n", min(p, N * M ** (1 / 4) * p ** (1 / 4), N * M), True
    return "out_of_regime", None, False


_EVALUATORS = {
    "lemma_quotient": _lemma_quotient,
    "theorem_product": _theorem_product,
    "theorem_small_n": _theorem_small_n,
    "theorem_interval": _theorem_interval,
    "corollary_interval": _corollary_interval,
}


def bound_curves(profile: BoundProfile) -> BoundValue:
    """constant * (formula of the applicable case); out-of-regime gives value None."""
    if profile.name not in _EVALUATORS:
        raise ValueError(f"unknown bound profile {profile.name!r}")
    if profile.p < 2 or profile.N < 1:
        return BoundValue(profile.name, "out_of_regime", None, False)
    case, value, placeholder = _EVALUATORS[profile.name](profile)
    if value is not None:
        value *= profile.constant
    return BoundValue(profile.name, case, value, placeholder)


def cg_symmetric_pair(m: PrimeModulus, s0: int, X: int, Y: int) -> tuple[int, int]:
    """Counts for (s0, X, Y) and (s0^-1, Y, X); they always agree."""
    return cg_count(m, s0, X, Y).count, cg_count(m, mod_inv(s0, m), Y, X).count
