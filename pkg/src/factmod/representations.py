"""Constructive search for factorial representations of residues.

Shapes handled (every index is a positive integer):

  wilson_pair              m! n!                     (m, n) = (lam, p - lam), lam even
  two_product              m1! n1! + m2! n2!
  k_term_product           sum_{i<=k} m_i! n_i!
  product_plus_factorials  m! n! + sum_{i<=k} n_i!
  cp_form                  x! + y! + c z! + c t!

Searches run layered sumset reachability over dense masks, keeping one
predecessor per reached residue per layer (first writer wins, ascending
iteration order), so witnesses come out by walking the layers backwards.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import CapExceeded, VerificationFailure
from .factorials import factorial_table
from .modular import PrimeModulus, as_modulus
from .residues import ResidueSet, product_set, sumset

SHAPES = ("wilson_pair", "two_product", "k_term_product", "product_plus_factorials", "cp_form")
SEARCH_BUDGET = 1 << 34
COVERAGE_CAP = 1 << 24

Witness = Union[int, tuple[int, int]]


class CertificateError(ValueError):
    """The certificate is structurally malformed."""


class UnsupportedParity(ValueError):
    pass


class RepresentationNotFound(LookupError):
    """No representation was found.

    status is "exhausted" when the whole search space at this bound was
    explored (evidence of absence) and "budget_truncated" otherwise.
    """

    def __init__(self, message: str, status: str):
        super().__init__(message)
        self.status = status

    @property
    def exhausted(self) -> bool:
        return self.status == "exhausted"


@dataclass(frozen=True)
class RepresentationCertificate:
    shape: str
    p: int
    target: int
    witnesses: tuple
    M: int
    c: int | None = None

    def to_text(self) -> str:
        lines = [f"shape: {self.shape}", f"p: {self.p}", f"lambda: {self.target}", f"M: {self.M}"]
        if self.c is not None:
            lines.append(f"c: {self.c}")
        items = [f"{w[0]}:{w[1]}" if isinstance(w, tuple) else str(w) for w in self.witnesses]
        lines.append("witnesses: " + ",".join(items))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RepresentationCertificate":
        fields = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, sep, value = line.partition(": ")
            if not sep:
                raise CertificateError(f"bad certificate line {line!r}")
            fields[key.strip()] = value.strip()
        try:
            witnesses = []
            for item in fields["witnesses"].split(","):
                if ":" in item:
                    a, b = item.split(":")
                    witnesses.append((int(a), int(b)))
                else:
                    witnesses.append(int(item))
            return cls(fields["shape"], int(fields["p"]), int(fields["lambda"]), tuple(witnesses),
                       int(fields["M"]), int(fields["c"]) if "c" in fields else None)
        except (KeyError, ValueError) as exc:
            raise CertificateError(f"malformed certificate: {exc}") from exc

    def to_dict(self) -> dict:
        out = {"shape": self.shape, "p": self.p, "lambda": self.target, "M": self.M,
               "witnesses": [list(w) if isinstance(w, tuple) else w for w in self.witnesses]}
        if self.c is not None:
            out["c"] = self.c
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RepresentationCertificate":
        witnesses = tuple(tuple(w) if isinstance(w, list) else w for w in d["witnesses"])
        return cls(d["shape"], d["p"], d["lambda"], witnesses, d["M"], d.get("c"))


@dataclass(frozen=True)
class Verification:
    ok: bool
    value: int
    bound_violation: bool = False

    def __bool__(self) -> bool:
        return self.ok


@lru_cache(maxsize=8)
def _table(p: int) -> np.ndarray:
    """t[n] = n! mod p for 0 <= n <= p."""
    t = np.zeros(p + 1, dtype=np.int64)
    t[: p] = factorial_table(PrimeModulus(p))
    return t


def _fact(n: int, p: int) -> int:
    return 0 if n >= p else int(_table(p)[n])


def _structure(cert: RepresentationCertificate) -> None:
    w = cert.witnesses
    pairs = [x for x in w if isinstance(x, tuple)]
    singles = [x for x in w if not isinstance(x, tuple)]
    if cert.shape not in SHAPES:
        raise CertificateError(f"unknown shape {cert.shape!r}")
    expected = {
        "wilson_pair": len(w) == 1 and len(pairs) == 1,
        "two_product": len(w) == 2 and len(pairs) == 2,
        "k_term_product": len(w) >= 1 and len(pairs) == len(w),
        "product_plus_factorials": len(w) >= 2 and isinstance(w[0], tuple) and len(pairs) == 1,
        "cp_form": len(w) == 4 and len(singles) == 4 and cert.c is not None,
    }[cert.shape]
    if not expected:
        raise CertificateError(f"witness layout does not fit shape {cert.shape}")
    for x in w:
        for n in (x if isinstance(x, tuple) else (x,)):
            if not isinstance(n, (int, np.integer)) or n < 1:
                raise CertificateError(f"witness index {n!r} is not a positive integer")


def evaluate(cert: RepresentationCertificate) -> int:
    """Value of the certificate's expression mod p."""
    _structure(cert)
    p = cert.p
    f = lambda n: _fact(n, p)  # noqa: E731
    w = cert.witnesses
    if cert.shape == "cp_form":
        x, y, z, t = w
        return (f(x) + f(y) + cert.c * (f(z) + f(t))) % p
    total = 0
    for item in w:
        total += f(item[0]) * f(item[1]) if isinstance(item, tuple) else f(item)
    return total % p


def verify_certificate(cert: RepresentationCertificate) -> Verification:
    """Recompute the expression from the witnesses and check the index bound."""
    value = evaluate(cert)
    indices = [n for x in cert.witnesses for n in (x if isinstance(x, tuple) else (x,))]
    over = max(indices) > cert.M
    return Verification(value == cert.target % cert.p and not over, value, over)


def _checked(cert: RepresentationCertificate) -> RepresentationCertificate:
    if not verify_certificate(cert):
        raise VerificationFailure(f"solver produced an invalid certificate: {cert}")
    return cert


# -- Wilson pairs ------------------------------------------------------------

def _wilson_indices(lam: int, p: int) -> tuple[int, int]:
    # lam = 0 reads 0! p!; 1! carries the same value as 0! with a positive index
    return (1, p) if lam == 0 else (lam, p - lam)


def wilson_pair(m, lam: int) -> RepresentationCertificate:
    """lam! (p - lam)! = lam (mod p) for even lam."""
    m = as_modulus(m)
    if lam % 2 or not 0 <= lam <= m.p - 1:
        raise UnsupportedParity(f"Wilson pairs exist for even lam in [0, p-1], got {lam}")
    pair = _wilson_indices(lam, m.p)
    return _checked(RepresentationCertificate("wilson_pair", m.p, lam, (pair,), max(pair)))


@lru_cache(maxsize=8)
def _wilson_set(p: int) -> tuple[np.ndarray, dict]:
    """Values lam!(p-lam)! over even lam, as a mask plus value -> index pair."""
    t = _table(p)
    mask = np.zeros(p, dtype=bool)
    source = {}
    for lam in range(0, p, 2):
        v = int(t[lam] * t[p - lam] % p)
        mask[v] = True
        source.setdefault(v, _wilson_indices(lam, p))
    return mask, source


def two_product_rep(m, lam: int) -> RepresentationCertificate:
    """lam as a sum of two Wilson-pair products (pigeonhole guarantees one)."""
    m = as_modulus(m)
    if m.p < 3:
        raise ValueError("two_product_rep needs p >= 3")
    lam %= m.p
    mask, source = _wilson_set(m.p)
    for w in np.flatnonzero(mask).tolist():
        if mask[(lam - w) % m.p]:
            pairs = (source[w], source[(lam - w) % m.p])
            M = max(max(pr) for pr in pairs)
            return _checked(RepresentationCertificate("two_product", m.p, lam, pairs, M))
    raise VerificationFailure(f"pigeonhole cover failed for p={m.p}, lam={lam}")


# -- layered reachability ----------------------------------------------------

@dataclass
class Layers:
    """Reach masks and predecessor arrays of an iterated sumset."""

    p: int
    start: np.ndarray
    reach: list = field(default_factory=list)
    pred: list = field(default_factory=list)
    truncated: bool = False

    @property
    def final(self) -> np.ndarray:
        return self.reach[-1] if self.reach else self.start

    def walk(self, target: int) -> tuple[int, list[int]]:
        """(start element, step elements from the first layer to the last)."""
        steps = []
        r = target
        for pred in reversed(self.pred):
            q = int(pred[r])
            steps.append(q)
            r = (r - q) % self.p
        return r, steps[::-1]


def layered_sumset(start: np.ndarray, step_values: np.ndarray, rounds: int, p: int,
                   budget: int = SEARCH_BUDGET) -> Layers:
    """Layers R_0 = start, R_{i+1} = R_i + step, with one predecessor per residue."""
    layers = Layers(p, start)
    step_values = np.sort(np.asarray(step_values, dtype=np.int64))
    spent = 0
    prev = start
    for _ in range(rounds):
        prev_vals = np.flatnonzero(prev).astype(np.int64)
        spent += prev_vals.size * step_values.size
        if spent > budget:
            layers.truncated = True
            break
        reach = np.zeros(p, dtype=bool)
        pred = np.full(p, -1, dtype=np.int64)
        count = 0
        if prev_vals.size <= step_values.size:
            for r in prev_vals.tolist():
                targets = (r + step_values) % p
                new = ~reach[targets]
                reach[targets[new]] = True
                pred[targets[new]] = step_values[new]
                count += int(np.count_nonzero(new))
                if count == p:
                    break
        else:
            for q in step_values.tolist():
                targets = (prev_vals + q) % p
                new = ~reach[targets]
                reach[targets[new]] = True
                pred[targets[new]] = q
                count += int(np.count_nonzero(new))
                if count == p:
                    break
        layers.reach.append(reach)
        layers.pred.append(pred)
        prev = reach
    return layers


def plain_reachable(start_values, step_values, rounds: int, p: int) -> set[int]:
    """Iterated sumset by big-integer bit rotation; no predecessor tracking."""
    full = (1 << p) - 1
    cur = 0
    for v in set(int(x) % p for x in start_values):
        cur |= 1 << v
    steps = sorted(set(int(x) % p for x in step_values))
    for _ in range(rounds):
        nxt = 0
        for q in steps:
            nxt |= ((cur << q) | (cur >> (p - q))) & full if q else cur
            if nxt == full:
                break
        cur = nxt
    return {i for i in range(p) if cur >> i & 1}


# -- product searches --------------------------------------------------------

class ProductSearch:
    """Reachability for k_term_product or product_plus_factorials at index bound M.

    Built once per (p, shape, k, M); answers every target lam afterwards.
    """

    def __init__(self, m, shape: str, k: int, M: int, budget: int = SEARCH_BUDGET):
        m = as_modulus(m)
        if shape not in ("k_term_product", "product_plus_factorials"):
            raise ValueError(f"ProductSearch does not handle shape {shape!r}")
        if k < 1 or not 1 <= M < m.p:
            raise ValueError(f"need k >= 1 and 1 <= M < p, got k={k}, M={M}")
        self.m, self.shape, self.k, self.M = m, shape, k, M
        p = m.p
        fvals = _table(p)[1: M + 1]
        self.first_index = {}
        for n, v in enumerate(fvals.tolist(), start=1):
            self.first_index.setdefault(v, n)
        self.factorials = ResidueSet.from_values(m, fvals, "dense")
        self.products = product_set(self.factorials, self.factorials, budget=budget)
        start = self.products.mask()
        if shape == "k_term_product":
            self.layers = layered_sumset(start, self.products.to_array(), k - 1, p, budget)
        else:
            self.layers = layered_sumset(start, self.factorials.to_array(), k, p, budget)

    @property
    def covered(self) -> np.ndarray:
        return self.layers.final

    def _product_indices(self, v: int) -> tuple[int, int]:
        p = self.m.p
        for a in self.factorials.to_array().tolist():
            b = v * pow(a, -1, p) % p
            if b in self.first_index:
                return self.first_index[a], self.first_index[b]
        raise VerificationFailure(f"{v} is not a product of two factorials")

    def solve(self, lam: int) -> RepresentationCertificate:
        p = self.m.p
        lam %= p
        if self.layers.truncated:
            raise RepresentationNotFound(f"search for lam={lam} stopped at the budget", "budget_truncated")
        if not self.covered[lam]:
            raise RepresentationNotFound(
                f"lam={lam} has no {self.shape} representation with k={self.k}, M={self.M}", "exhausted")
        head, steps = self.layers.walk(lam)
        if self.shape == "k_term_product":
            witnesses = tuple(self._product_indices(v) for v in [head] + steps)
        else:
            witnesses = (self._product_indices(head),) + tuple(self.first_index[v] for v in steps)
        return _checked(RepresentationCertificate(self.shape, p, lam, witnesses, self.M))


@lru_cache(maxsize=16)
def _search(p: int, shape: str, k: int, M: int, budget: int) -> ProductSearch:
    return ProductSearch(PrimeModulus(p), shape, k, M, budget)


def k_term_product_rep(m, lam: int, k: int, M: int, budget: int = SEARCH_BUDGET) -> RepresentationCertificate:
    """sum_{i=1}^{k} m_i! n_i! = lam (mod p) with every index <= M."""
    return _search(as_modulus(m).p, "k_term_product", k, M, budget).solve(lam)


def product_plus_factorials_rep(m, lam: int, k: int, M: int,
                                budget: int = SEARCH_BUDGET) -> RepresentationCertificate:
    """m! n! + sum_{i=1}^{k} n_i! = lam (mod p) with every index <= M."""
    return _search(as_modulus(m).p, "product_plus_factorials", k, M, budget).solve(lam)


# -- the c_p coefficient -----------------------------------------------------

@dataclass(frozen=True)
class CpResult:
    p: int
    M: int
    c: int
    misses: tuple[int, ...]


class CpSearch:
    """Coverage of (F + F) + c (F + F), F = {n! : 1 <= n <= M}."""

    def __init__(self, m, M: int | None = None):
        m = as_modulus(m)
        M = m.p if M is None else M
        if not 1 <= M <= m.p:
            raise ValueError(f"need 1 <= M <= p, got {M}")
        self.m, self.M = m, M
        p = m.p
        fvals = _table(p)[1: M + 1]
        self.first_index = {}
        for n, v in enumerate(fvals.tolist(), start=1):
            self.first_index.setdefault(v, n)
        self.F = np.array(sorted(self.first_index), dtype=np.int64)
        self.S = np.zeros(p, dtype=bool)
        self.S[(self.F[:, None] + self.F[None, :]) % p] = True
        self.S_vals = np.flatnonzero(self.S)

    def coverage(self, c: int) -> np.ndarray:
        p = self.m.p
        scaled = (c * self.S_vals) % p
        covered = np.zeros(p, dtype=bool)
        for s in self.S_vals.tolist():
            covered[(s + scaled) % p] = True
            if covered.all():
                break
        return covered

    def _pair(self, s: int) -> tuple[int, int]:
        p = self.m.p
        for x in self.F.tolist():
            y = (s - x) % p
            if y in self.first_index:
                return self.first_index[x], self.first_index[y]
        raise VerificationFailure(f"{s} is not a sum of two factorials")

    def represent(self, c: int, lam: int) -> RepresentationCertificate:
        p = self.m.p
        lam %= p
        for s2 in self.S_vals.tolist():
            s1 = (lam - c * s2) % p
            if self.S[s1]:
                x, y = self._pair(s1)
                z, t = self._pair(s2)
                return _checked(RepresentationCertificate("cp_form", p, lam, (x, y, z, t), self.M, c))
        raise RepresentationNotFound(f"lam={lam} not covered with c={c}", "exhausted")


def cp_search(m, M: int | None = None, c_max: int | None = None) -> CpResult:
    """Smallest c >= 1 with full coverage, with the miss count of every c tried."""
    m = as_modulus(m)
    search = CpSearch(m, M)
    c_max = m.p - 1 if c_max is None else c_max
    misses = []
    for c in range(1, c_max + 1):
        missed = m.p - int(np.count_nonzero(search.coverage(c)))
        misses.append(missed)
        if missed == 0:
            return CpResult(m.p, search.M, c, tuple(misses))
    raise RepresentationNotFound(f"no covering c in [1, {c_max}] for p={m.p}", "exhausted")


# -- coverage ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    p: int
    shape: str
    k: int
    M: int
    covered: int
    missed: tuple[int, ...]

    @property
    def fraction(self) -> float:
        return self.covered / self.p


def covered_mask(m, shape: str, k: int = 2, M: int | None = None, c: int | None = None,
                 budget: int = SEARCH_BUDGET) -> np.ndarray:
    m = as_modulus(m)
    if shape == "wilson_pair":
        return _wilson_set(m.p)[0].copy()
    if shape == "two_product":
        W = ResidueSet(m, mask=_wilson_set(m.p)[0])
        return sumset(W, W).mask().copy()
    if shape in ("k_term_product", "product_plus_factorials"):
        return _search(m.p, shape, k, M, budget).covered.copy()
    if shape == "cp_form":
        if c is None:
            raise ValueError("cp_form coverage needs c")
        return CpSearch(m, M).coverage(c)
    raise ValueError(f"unknown shape {shape!r}")


def coverage_report(m, shape: str, k: int = 2, M: int | None = None, c: int | None = None,
                    cap: int = COVERAGE_CAP, budget: int = SEARCH_BUDGET) -> CoverageReport:
    """Fraction of residues representable in the given shape, and the misses."""
    m = as_modulus(m)
    if m.p > cap:
        raise CapExceeded(f"coverage scan refused: p={m.p} exceeds cap {cap}")
    mask = covered_mask(m, shape, k, M, c, budget)
    missed = tuple(np.flatnonzero(~mask).tolist())
    M_out = M if M is not None else m.p
    return CoverageReport(m.p, shape, k, M_out, int(np.count_nonzero(mask)), missed)


def dump_certificates(certs, path) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump([c.to_dict() for c in certs], fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_certificates(path) -> list[RepresentationCertificate]:
    with open(path) as fh:
        return [RepresentationCertificate.from_dict(d) for d in json.load(fh)]
