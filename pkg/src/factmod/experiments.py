"""Command implementations: each turns a validated config into output tables."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import combinatorics as cb
from . import expsums as es
from . import representations as rp
from .config import ExperimentConfig
from .errors import VerificationFailure
from .factorials import factorial_range, factorial_table
from .modular import PrimeModulus, primes_in_range
from .residues import (IntervalView, PrimesView, ResidueSet, build_factorial_set,
                       estimate_product_cardinality, multiplicative_energy, product_set,
                       quotient_set, set_from)

log = logging.getLogger("factmod")

COLUMNS = {
    "factorials": {"factorials.csv": ["p", "n", "value"]},
    "card": {"card.csv": ["p", "N", "card_A", "card_AA", "card_AoverA", "ruzsa_34_holds"]},
    "growth": {"growth.csv": ["p", "N", "card_A", "card_AA", "card_AoverA", "exact", "AA_low", "AA_high",
                              "bound_quotient", "quotient_case", "bound_product", "product_case",
                              "bound_small_n", "small_n_case", "placeholder"]},
    "energy": {"energy.csv": ["p", "left", "N", "right", "right_N", "left_size", "right_size", "energy",
                              "diagonal", "product_card", "bound_interval", "interval_case"]},
    "expsum": {"expsum.csv": ["p", "L", "N", "ell_or_a", "value", "runtime_ms"]},
    "moments": {"moments.csv": ["p", "L", "N", "ell_or_a", "value", "runtime_ms"],
                "moment_check.csv": ["p", "L", "N", "ell", "J", "moment", "rel_error", "holder_lhs",
                                     "holder_rhs", "holder_holds"]},
    "solve": {"solve.csv": ["p", "shape", "k", "M", "lambda", "found", "status"],
              "coverage.csv": ["p", "shape", "k", "M", "covered", "fraction"]},
    "cp-search": {"cp.csv": ["p", "M", "c", "tried"], "cp_misses.csv": ["p", "c", "misses"]},
    "wilson-check": {"wilson.csv": ["p", "even_lambda", "failures"]},
    "erdos-stats": {"erdos.csv": ["p", "distinct", "missing", "missing_frac", "distinct_frac"],
                    "erdos_summary.csv": ["primes", "mean_missing_frac", "min_missing_frac",
                                          "max_missing_frac"]},
    "ruzsa-check": {"ruzsa.csv": ["trial", "p", "X", "Y", "Z", "quotient", "xz", "zy", "holds"]},
    "katz-shen": {"katz_shen.csv": ["trial", "p", "x_size", "k", "strategy", "subset_size", "iterated",
                                    "ratio"]},
    "cg-count": {"cg.csv": ["p", "s0", "X", "Y", "count", "ratio"]},
    "bounds": {"bounds.csv": ["profile", "case", "p", "N", "M", "value", "placeholder"]},
}


@dataclass
class Outputs:
    tables: dict = field(default_factory=dict)
    certificates: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, name: str, row: list) -> None:
        self.tables.setdefault(name, []).append(row)


class Progress:
    def __init__(self, what: str, total: int, interval: float):
        self.what, self.total, self.interval = what, total, interval
        self.done = 0
        self._last = time.monotonic()

    def step(self, n: int = 1) -> None:
        self.done += n
        now = time.monotonic()
        if now - self._last >= self.interval:
            log.info("%s: %d/%d", self.what, self.done, self.total)
            self._last = now


def _pmap(fn, items, threads: int):
    """Ordered map; results merge in input order whatever the thread count."""
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _primes(cfg: ExperimentConfig) -> list[int]:
    if cfg.get("p") is not None:
        values = cfg["p"] if isinstance(cfg["p"], tuple) else (cfg["p"],)
        for q in values:
            PrimeModulus(q)
        return list(values)
    return primes_in_range(cfg["p_min"], cfg["p_max"])


def _ms(t0: float, cfg: ExperimentConfig) -> int:
    return int(round((time.perf_counter() - t0) * 1000)) if cfg["timings"] else 0


def run_factorials(cfg, out):
    m = PrimeModulus(cfg["p"])
    window = factorial_range(cfg["L"], cfg["N"], m, stride=cfg["stride"], allow_zero_tail=cfg["allow_zero_tail"])
    for n, v in window:
        out.add("factorials.csv", [m.p, n, v])
    out.extra["checkpoints.txt"] = "".join(cp.to_line() for cp in window.checkpoints)


def run_card(cfg, out):
    m = PrimeModulus(cfg["p"])
    for N in cfg["N"]:
        A = build_factorial_set(m, N)
        aa = len(product_set(A, A, budget=cfg["budget"]))
        q = len(quotient_set(A, A, budget=cfg["budget"]))
        out.add("card.csv", [m.p, N, len(A), aa, q, int(aa ** 4 >= q ** 3)])


def run_growth(cfg, out):
    m = PrimeModulus(cfg["p"])
    progress = Progress("growth", len(cfg["N"]), cfg["progress"])
    for N in cfg["N"]:
        A = build_factorial_set(m, N)
        if cfg["strategy"] == "exact":
            aa = len(product_set(A, A, budget=cfg["budget"]))
            q = len(quotient_set(A, A, budget=cfg["budget"]))
            exact, low, high = 1, aa, aa
        else:
            est = estimate_product_cardinality(A, A, budget=cfg["samples"], seed=cfg["seed"])
            aa, low, high, exact = est.estimate, est.low, est.high, int(est.exact)
            Ainv = ResidueSet.from_values(m, [pow(int(x), -1, m.p) for x in A])
            qe = estimate_product_cardinality(A, Ainv, budget=cfg["samples"], seed=cfg["seed"] + 1)
            q = int(qe.estimate) if qe.exact else qe.estimate
            if est.exact:
                aa, low, high = int(aa), int(low), int(high)
        bq = cb.bound_curves(cb.BoundProfile("lemma_quotient", m.p, N, constant=cfg["constant"]))
        bp = cb.bound_curves(cb.BoundProfile("theorem_product", m.p, N, constant=cfg["constant"]))
        bs = cb.bound_curves(cb.BoundProfile("theorem_small_n", m.p, N, constant=cfg["constant"]))
        out.add("growth.csv", [m.p, N, len(A), aa, q, exact, low, high, bq.value, bq.case, bp.value, bp.case,
                               bs.value, bs.case, int(bp.placeholder or bs.placeholder)])
        progress.step()


def run_energy(cfg, out):
    m = PrimeModulus(cfg["p"])
    right = set_from(m, cfg["right"], cfg["right_N"])
    views = {"interval": IntervalView, "primes": PrimesView}
    for N in cfg["N"]:
        left = views[cfg["left"]](m, N) if cfg["left"] in views else build_factorial_set(m, N)
        e = multiplicative_energy(left, right, budget=cfg["budget"])
        b = cb.bound_curves(cb.BoundProfile("theorem_interval", m.p, N, len(right), cfg["constant"]))
        out.add("energy.csv", [m.p, cfg["left"], N, cfg["right"], cfg["right_N"], e.left_size, e.right_size,
                               e.count, e.diagonal, e.product_cardinality, b.value, b.case])


def run_expsum(cfg, out):
    m = PrimeModulus(cfg["p"])
    L, N = cfg["L"], cfg["N"]
    if cfg["kind"] == "max":
        t0 = time.perf_counter()
        res = es.max_single(L, N, m, cfg["strategy"], k=cfg["k"], seed=cfg["seed"], cap=cfg["cap"])
        out.add("expsum.csv", [m.p, L, N, res.a, res.magnitude, _ms(t0, cfg)])
        return
    A = build_factorial_set(m, cfg["A_N"]) if cfg["kind"] == "double" else None
    for a in cfg["a"]:
        t0 = time.perf_counter()
        s = es.single_sum(a, L, N, m) if A is None else es.double_sum(a, L, N, A)
        out.add("expsum.csv", [m.p, L, N, a, s.magnitude, _ms(t0, cfg)])


def run_moments(cfg, out):
    items = [(p, N, ell) for p in cfg["p"] for N in cfg["N"] for ell in cfg["ell"]]
    progress = Progress("moments", len(items), cfg["progress"])
    L = cfg["L"]
    for p, N, ell in items:
        m = PrimeModulus(p)
        t0 = time.perf_counter()
        J = es.moment_count(L, N, m, ell, budget=cfg["budget"]).count
        out.add("moments.csv", [p, L, N, ell, J, _ms(t0, cfg)])
        if cfg["check"]:
            sums = es.frequency_scan(L, N, m, cfg["cap"])
            moment = es.power_moment(L, N, m, 2 * ell, sums=sums)
            lhs = es.power_moment(L, N, m, 2 * ell + 1, sums=sums)
            J_next = es.moment_count(L, N, m, ell + 1, budget=cfg["budget"]).count
            rhs = math.sqrt(J * J_next)
            out.add("moment_check.csv", [p, L, N, ell, J, moment, abs(moment - J) / J, lhs, rhs,
                                         int(lhs <= rhs * (1 + 1e-6))])
        progress.step()


def run_solve(cfg, out):
    m = PrimeModulus(cfg["p"])
    shape, k, M = cfg["shape"], cfg["k"], cfg.get("M")
    if M is not None and M >= m.p:
        M = m.p - 1
    if cfg["all"]:
        lambdas = range(m.p)
    else:
        lambdas = [lam % m.p for lam in cfg["lambda"]]
    k_col = k if shape in ("k_term_product", "product_plus_factorials") else 2
    M_col = M if M is not None else m.p
    covered = 0
    for lam in lambdas:
        try:
            if shape == "wilson_pair":
                cert = rp.wilson_pair(m, lam)
            elif shape == "two_product":
                cert = rp.two_product_rep(m, lam)
            elif shape == "k_term_product":
                cert = rp.k_term_product_rep(m, lam, k, M, budget=cfg["budget"])
            else:
                cert = rp.product_plus_factorials_rep(m, lam, k, M, budget=cfg["budget"])
        except rp.UnsupportedParity:
            out.add("solve.csv", [m.p, shape, k_col, M_col, lam, 0, "unsupported_parity"])
            continue
        except rp.RepresentationNotFound as exc:
            out.add("solve.csv", [m.p, shape, k_col, M_col, lam, 0, exc.status])
            continue
        if not rp.verify_certificate(cert):
            raise VerificationFailure(f"certificate for lambda={lam} failed re-verification")
        covered += 1
        out.certificates.append(cert)
        out.add("solve.csv", [m.p, shape, k_col, M_col, lam, 1, "found"])
    if cfg["all"]:
        out.add("coverage.csv", [m.p, shape, k_col, M_col, covered, covered / m.p])


def run_cp_search(cfg, out):
    def one(p):
        m = PrimeModulus(p)
        M = min(cfg.get("M", p), p)
        try:
            return p, M, rp.cp_search(m, M, cfg.get("c_max"))
        except rp.RepresentationNotFound:
            return p, M, None

    for p, M, res in _pmap(one, _primes(cfg), cfg["threads"]):
        if res is None:
            out.add("cp.csv", [p, M, "", cfg.get("c_max", p - 1)])
            continue
        out.add("cp.csv", [p, M, res.c, len(res.misses)])
        for c, miss in enumerate(res.misses, start=1):
            out.add("cp_misses.csv", [p, c, miss])


def wilson_failures(p: int) -> tuple[int, int]:
    """(number of even lam checked, failures of lam!(p-lam)! = lam)."""
    t = np.append(factorial_table(PrimeModulus(p)), 0)
    lam = np.arange(0, p, 2, dtype=np.int64)
    lhs = t[lam] * t[p - lam] % p
    return lam.size, int(np.count_nonzero(lhs != lam))


def run_wilson_check(cfg, out):
    primes = _primes(cfg)
    progress = Progress("wilson-check", len(primes), cfg["progress"])

    def one(p):
        r = wilson_failures(p)
        progress.step()
        return r

    for p, (count, failures) in zip(primes, _pmap(one, primes, cfg["threads"])):
        out.add("wilson.csv", [p, count, failures])
        if failures:
            raise VerificationFailure(f"Wilson identity failed {failures} times at p={p}")


def run_erdos_stats(cfg, out):
    primes = _primes(cfg)
    stats = _pmap(lambda p: cb.erdos_stats(PrimeModulus(p), cap=cfg["cap"]), primes, cfg["threads"])
    fracs = []
    for s in stats:
        out.add("erdos.csv", [s.p, s.distinct, s.missing, s.missing_fraction, s.distinct_fraction])
        fracs.append(s.missing_fraction)
    out.add("erdos_summary.csv", [len(fracs), math.fsum(fracs) / len(fracs), min(fracs), max(fracs)])


def random_unit_set(m: PrimeModulus, size: int, rng) -> ResidueSet:
    size = min(size, m.p - 1)
    return ResidueSet.from_values(m, rng.choice(np.arange(1, m.p), size=size, replace=False))


def run_ruzsa_check(cfg, out):
    rng = np.random.default_rng(cfg["seed"])
    primes = _primes(cfg)
    for trial in range(cfg["trials"]):
        m = PrimeModulus(int(rng.choice(primes)))
        X, Y, Z = (random_unit_set(m, int(rng.integers(1, cfg["max_size"] + 1)), rng) for _ in range(3))
        r = cb.ruzsa_check(X, Y, Z)
        out.add("ruzsa.csv", [trial, m.p, len(X), len(Y), len(Z), r.quotient, r.xz, r.zy, int(r.holds)])
        if not r.holds:
            raise VerificationFailure(f"Ruzsa triangle inequality failed on trial {trial}")


def run_katz_shen(cfg, out):
    rng = np.random.default_rng(cfg["seed"])
    m = PrimeModulus(cfg["p"])
    strategies = ("exhaustive", "greedy") if cfg["strategy"] == "both" else (cfg["strategy"],)
    for trial in range(cfg["trials"]):
        X = random_unit_set(m, cfg["x_size"], rng)
        Bs = [random_unit_set(m, cfg["b_size"], rng) for _ in range(cfg["k"])]
        results = {}
        for strategy in strategies:
            r = cb.katz_shen_ratio(X, Bs, strategy)
            results[strategy] = r
            out.add("katz_shen.csv", [trial, m.p, len(X), cfg["k"], strategy, len(r.subset), r.iterated, r.ratio])
        if len(results) == 2 and results["exhaustive"].iterated > results["greedy"].iterated:
            raise VerificationFailure("exhaustive Katz-Shen search beaten by greedy")


def run_cg_count(cfg, out):
    for p in _primes(cfg):
        m = PrimeModulus(p)
        s0s = cfg["s0"] if cfg.get("s0") is not None else range(p)
        X, Y = min(cfg["X"], p - 1), min(cfg["Y"], p - 1)
        for s0 in s0s:
            r = cb.cg_count(m, s0, X, Y)
            out.add("cg.csv", [p, r.s0, X, Y, r.count, r.ratio])


def run_bounds(cfg, out):
    for N in cfg["N"]:
        prof = cb.BoundProfile(cfg["profile"], cfg["p"], N, cfg.get("M"), cfg["constant"], cfg["cutoff"])
        b = cb.bound_curves(prof)
        out.add("bounds.csv", [b.profile, b.case, cfg["p"], N, cfg.get("M", ""), b.value, int(b.placeholder)])


RUNNERS = {
    "factorials": run_factorials, "card": run_card, "growth": run_growth, "energy": run_energy,
    "expsum": run_expsum, "moments": run_moments, "solve": run_solve, "cp-search": run_cp_search,
    "wilson-check": run_wilson_check, "erdos-stats": run_erdos_stats, "ruzsa-check": run_ruzsa_check,
    "katz-shen": run_katz_shen, "cg-count": run_cg_count, "bounds": run_bounds,
}


def execute(cfg: ExperimentConfig) -> Outputs:
    out = Outputs()
    RUNNERS[cfg.command](cfg, out)
    return out
