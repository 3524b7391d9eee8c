import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from factmod.errors import BudgetExceeded, ModulusMismatch
from factmod.modular import PrimeModulus, primes_in_range
from factmod.residues import (
    IntervalView, PrimesView, ResidueSet, build_factorial_set, estimate_product_cardinality,
    inverse_set, multiplicative_energy, product_set, quotient_set, set_from, sumset,
)
from factmod.sketch import HyperLogLog, _leading_zeros
from oracles import energy_quadruple, fact_list, primes_upto, products, quotients, sums

P7 = PrimeModulus(7)
PRIMES = primes_in_range(11, 10**4)


def S(values, m=P7, rep="auto"):
    return ResidueSet.from_values(m, values, rep)


def test_factorial_set_examples():
    assert set(build_factorial_set(P7, 6).to_array().tolist()) == {1, 2, 3, 6}
    assert len(build_factorial_set(P7, 6)) == 4
    assert build_factorial_set(PrimeModulus(101), 1).to_array().tolist() == [1]
    assert build_factorial_set(PrimeModulus(13), 4).to_array().tolist() == [1, 2, 6, 11]
    assert 1 in build_factorial_set(P7, 6, include_zero_index=True)


def test_product_examples():
    B = S([2, 5, 6])
    assert product_set(S([1]), B) == B
    A = S([1, 2, 3, 6])
    assert product_set(A, A).to_array().tolist() == [1, 2, 3, 4, 5, 6]
    assert product_set(S([2]), S([3])).to_array().tolist() == [6]


def test_quotient_examples():
    assert quotient_set(S([4]), S([4])).to_array().tolist() == [1]
    A = S([1, 2, 3, 6])
    assert len(quotient_set(A, A)) == 6
    with pytest.raises(ZeroDivisionError):
        quotient_set(A, S([0, 1]))
    assert inverse_set(S([2, 3])).to_array().tolist() == [4, 5]


def test_sumset_examples():
    B = S([2, 5])
    assert sumset(S([0]), B) == B
    assert sumset(S([1, 2]), S([1, 2])).to_array().tolist() == [2, 3, 4]
    W = S([0, 2, 4, 6])
    assert len(sumset(W, W)) == 7


def test_modulus_mismatch():
    with pytest.raises(ModulusMismatch):
        product_set(S([1]), S([1], PrimeModulus(11)))


def test_budget_refusal_names_parameter():
    A = build_factorial_set(PrimeModulus(10007), 300)
    with pytest.raises(BudgetExceeded) as exc:
        product_set(A, A, budget=1000)
    assert exc.value.parameter == "budget"


def test_energy_examples():
    assert multiplicative_energy(IntervalView(P7, 2), S([1, 2])).count == 6
    A = S([1, 3, 4, 5])
    assert multiplicative_energy(A, S([3])).count == 4
    e = multiplicative_energy(A, S([2, 5, 6]))
    assert e.count >= 12 and e.diagonal == 12


def test_random_instances_dense_sparse_and_oracle():
    rng = random.Random(2)
    for _ in range(100):
        p = rng.choice(PRIMES)
        m = PrimeModulus(p)
        a = rng.sample(range(1, p), rng.randint(1, min(60, p - 1)))
        b = rng.sample(range(1, p), rng.randint(1, min(60, p - 1)))
        for op, ref in ((product_set, products), (quotient_set, quotients), (sumset, sums)):
            dense = op(S(a, m, "dense"), S(b, m, "dense"))
            sparse = op(S(a, m, "sparse"), S(b, m, "sparse"))
            mixed = op(S(a, m, "dense"), S(b, m, "sparse"))
            assert dense.representation == "dense" and sparse.representation == "sparse"
            assert dense == sparse == mixed
            assert set(dense.to_array().tolist()) == ref(a, b, p)


def test_set_inequalities_on_factorial_sets():
    rng = random.Random(5)
    for _ in range(40):
        p = rng.choice(PRIMES)
        A = build_factorial_set(PrimeModulus(p), rng.randint(1, min(300, p - 1)))
        aa, q, n = len(product_set(A, A)), len(quotient_set(A, A)), len(A)
        assert n <= aa <= n * n and n <= q <= n * n
        assert aa**4 >= q**3


def test_energy_matches_quadruple_oracle():
    rng = random.Random(3)
    for _ in range(25):
        p = rng.choice(PRIMES[:300])
        m = PrimeModulus(p)
        s = rng.sample(range(1, p), rng.randint(1, 30))
        mm = rng.sample(range(1, p), rng.randint(1, 30))
        assert multiplicative_energy(S(s, m), S(mm, m)).count == energy_quadruple(s, mm, p)
        N = rng.randint(1, 30)
        assert multiplicative_energy(IntervalView(m, N), S(mm, m)).count == energy_quadruple(range(1, N + 1), mm, p)
        assert multiplicative_energy(PrimesView(m, N), S(mm, m)).count == energy_quadruple(primes_upto(N), mm, p)


def test_views_chunking():
    m = PrimeModulus(10007)
    assert np.concatenate(list(PrimesView(m, 5000).chunks(97))).tolist() == primes_upto(5000)
    assert np.concatenate(list(IntervalView(m, 1000).chunks(33))).tolist() == list(range(1, 1001))
    assert set_from(m, "factorial", 40) == S(fact_list(40, m.p), m)


def test_estimator_exact_fallback_and_determinism():
    m = PrimeModulus(10007)
    A = build_factorial_set(m, 60)
    est = estimate_product_cardinality(A, A, budget=len(A) ** 2)
    assert est.exact and est.estimate == len(product_set(A, A))
    A300 = build_factorial_set(m, 300)
    exact = len(product_set(A300, A300))
    r1 = estimate_product_cardinality(A300, A300, budget=20000, seed=9)
    r2 = estimate_product_cardinality(A300, A300, budget=20000, seed=9)
    assert r1 == r2 and not r1.exact
    assert abs(r1.estimate - exact) <= 0.1 * exact
    assert r1.low <= r1.estimate <= r1.high


def test_export_roundtrip(tmp_path):
    A = build_factorial_set(PrimeModulus(1009), 200)
    A.export(tmp_path / "a.txt")
    assert ResidueSet.load(tmp_path / "a.txt") == A
    assert ResidueSet.from_text(A.export_text(), "sparse").representation == "sparse"


@settings(max_examples=60)
@given(st.sets(st.integers(0, 100), min_size=1, max_size=40), st.sets(st.integers(0, 100), min_size=1, max_size=40))
def test_sumset_oracle_property(a, b):
    m = PrimeModulus(101)
    assert set(sumset(S(a, m), S(b, m)).to_array().tolist()) == sums(a, b, 101)


@settings(max_examples=60)
@given(st.sets(st.integers(1, 100), min_size=1, max_size=40))
def test_self_quotient_contains_one(a):
    m = PrimeModulus(101)
    assert 1 in quotient_set(S(a, m), S(a, m))


def test_hyperloglog():
    h = HyperLogLog(precision=12, seed=3)
    h.add_many(np.arange(50000, dtype=np.uint64))
    assert abs(h.estimate() - 50000) < 0.05 * 50000
    g = HyperLogLog(precision=12, seed=3)
    g.add_many(np.arange(40000, 90000, dtype=np.uint64))
    h.merge(g)
    assert abs(h.estimate() - 90000) < 0.05 * 90000
    x = np.array([1, 2, 3, 1 << 40, (1 << 63)], dtype=np.uint64)
    assert _leading_zeros(x).tolist() == [63, 62, 62, 23, 0]
