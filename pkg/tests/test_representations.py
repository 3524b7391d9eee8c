import dataclasses
import itertools
import math
import random

import numpy as np
import pytest

from factmod.modular import PrimeModulus, primes_in_range
from factmod.representations import (
    CertificateError, CpSearch, RepresentationCertificate, RepresentationNotFound, UnsupportedParity,
    coverage_report, cp_search, dump_certificates, evaluate, k_term_product_rep, layered_sumset,
    load_certificates, plain_reachable, product_plus_factorials_rep, two_product_rep,
    verify_certificate, wilson_pair,
)
from oracles import fact_mod

P7 = PrimeModulus(7)


def direct_value(cert):
    """Recompute a certificate's value with big-integer factorials."""
    p, w = cert.p, cert.witnesses
    f = lambda n: math.factorial(n) % p
    if cert.shape in ("wilson_pair", "two_product", "k_term_product"):
        return sum(f(a) * f(b) for a, b in w) % p
    if cert.shape == "product_plus_factorials":
        (a, b), rest = w[0], w[1:]
        return (f(a) * f(b) + sum(f(n) for n in rest)) % p
    x, y, z, t = w
    return (f(x) + f(y) + cert.c * (f(z) + f(t))) % p


def test_wilson_pair_examples():
    c = wilson_pair(P7, 4)
    assert c.witnesses == ((4, 3),) and evaluate(c) == 4
    assert wilson_pair(PrimeModulus(11), 6).witnesses == ((6, 5),)
    with pytest.raises(UnsupportedParity):
        wilson_pair(P7, 1)
    assert verify_certificate(wilson_pair(P7, 0))


def test_wilson_identity_all_even_small():
    for p in primes_in_range(3, 400):
        for lam in range(0, p, 2):
            assert direct_value(wilson_pair(PrimeModulus(p), lam)) == lam


def test_two_product_examples():
    c = two_product_rep(P7, 3)
    assert c.witnesses == ((4, 3), (6, 1))
    assert fact_mod(4, 7) * fact_mod(3, 7) % 7 == 4 and fact_mod(6, 7) * fact_mod(1, 7) % 7 == 6
    for lam in range(7):
        assert verify_certificate(two_product_rep(P7, lam))


def test_two_product_even_uses_zero_element():
    # 0 lies in the Wilson set (lam = 0), so even targets have the form w + 0
    for p in primes_in_range(3, 200):
        m = PrimeModulus(p)
        for lam in range(0, p, 2):
            c = two_product_rep(m, lam)
            assert direct_value(c) == lam


def test_k_term_examples():
    c = k_term_product_rep(PrimeModulus(101), 5, 5, 1)
    assert c.witnesses == ((1, 1),) * 5
    c = k_term_product_rep(P7, 0, 2, 6)
    assert direct_value(c) == 0 and verify_certificate(c)
    with pytest.raises(RepresentationNotFound) as exc:
        k_term_product_rep(PrimeModulus(101), 4, 2, 1)
    assert exc.value.exhausted


def test_product_plus_factorials_examples(tmp_path):
    c = product_plus_factorials_rep(PrimeModulus(101), 3, 2, 1)
    assert c.witnesses == ((1, 1), 1, 1)
    c = product_plus_factorials_rep(P7, 1, 2, 3)
    assert direct_value(c) == 1 and max(c.witnesses[0]) <= 3 and max(c.witnesses[1:]) <= 3
    dump_certificates([c], tmp_path / "c.json")
    back = load_certificates(tmp_path / "c.json")[0]
    assert back == c and verify_certificate(back)
    assert RepresentationCertificate.from_text(c.to_text()) == c


def test_small_exhaustive_product_plus_factorials():
    p, M, k = 13, 4, 2
    reach = {(math.factorial(a) * math.factorial(b) + sum(math.factorial(n) for n in rest)) % p
             for a in range(1, M + 1) for b in range(1, M + 1)
             for rest in itertools.product(range(1, M + 1), repeat=k)}
    rep = coverage_report(PrimeModulus(p), "product_plus_factorials", k, M)
    assert set(range(p)) - set(rep.missed) == reach


def test_cp_search_examples():
    assert cp_search(PrimeModulus(5), 5).c == 1
    r = cp_search(P7, 7)
    F = {math.factorial(n) % 7 for n in range(1, 8)}
    SS = {(a + b) % 7 for a in F for b in F}
    first = next(c for c in range(1, 7) if {(s + c * t) % 7 for s in SS for t in SS} == set(range(7)))
    assert r.c == first
    assert coverage_report(P7, "cp_form", M=7, c=r.c).fraction == 1.0
    cert = CpSearch(P7, 7).represent(r.c, 5)
    assert direct_value(cert) == 5


def test_verify_rejects_tampering():
    c = two_product_rep(PrimeModulus(101), 37)
    (a, b), second = c.witnesses
    bumped = dataclasses.replace(c, witnesses=((a + 1, b), second))
    v = verify_certificate(bumped)
    assert bool(v) == (direct_value(bumped) == 37)
    over = dataclasses.replace(c, M=1)
    v = verify_certificate(over)
    assert not v and v.bound_violation
    with pytest.raises(CertificateError):
        evaluate(dataclasses.replace(c, witnesses=((0, 1), second)))
    with pytest.raises(CertificateError):
        evaluate(dataclasses.replace(c, shape="nonsense"))


def test_coverage_examples():
    for p in primes_in_range(3, 300):
        assert coverage_report(PrimeModulus(p), "two_product").fraction == 1.0
    for p in (101, 499, 1009):
        assert coverage_report(PrimeModulus(p), "k_term_product", 5, p - 1).fraction == 1.0
    rep = coverage_report(PrimeModulus(101), "k_term_product", 1, 1)
    assert rep.covered == 1 and rep.fraction == 1 / 101 and 1 not in rep.missed


def test_layered_matches_plain_reachability():
    rng = random.Random(6)
    for _ in range(50):
        p = rng.choice(primes_in_range(11, 600))
        start = rng.sample(range(p), rng.randint(1, 5))
        step = rng.sample(range(p), rng.randint(1, 6))
        rounds = rng.randint(0, 4)
        mask = np.zeros(p, dtype=bool)
        mask[start] = True
        layers = layered_sumset(mask, np.array(step), rounds, p)
        got = set(np.flatnonzero(layers.final).tolist())
        assert got == plain_reachable(start, step, rounds, p)
        for r in list(got)[:5]:
            head, steps = layers.walk(r)
            assert head in start and all(s in step for s in steps) and len(steps) == rounds
            assert (head + sum(steps)) % p == r


def test_budget_truncation_is_reported():
    with pytest.raises(RepresentationNotFound) as exc:
        k_term_product_rep(PrimeModulus(1009), 3, 3, 900, budget=400000)
    assert exc.value.status == "budget_truncated"


def test_not_found_agrees_with_plain_reachability():
    for p, M, k in ((101, 3, 2), (211, 5, 3), (499, 4, 2)):
        m = PrimeModulus(p)
        f = [math.factorial(n) % p for n in range(1, M + 1)]
        prods = {a * b % p for a in f for b in f}
        for shape, solver, steps, rounds in (
                ("k_term_product", k_term_product_rep, prods, k - 1),
                ("product_plus_factorials", product_plus_factorials_rep, set(f), k)):
            reach = plain_reachable(prods, steps, rounds, p)
            assert len(reach) < p
            for lam in range(p):
                if lam in reach:
                    assert verify_certificate(solver(m, lam, k, M))
                else:
                    with pytest.raises(RepresentationNotFound):
                        solver(m, lam, k, M)
