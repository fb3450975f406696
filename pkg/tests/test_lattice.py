import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from mpmath import iv

from conftest import random_unimodular
from latwalk.intervals import Enclosure, working_precision
from latwalk.lattice import (
    LatticeBasis,
    brute_force_systole_sq,
    certified_coeff_radius,
    in_mahler_compact,
    lll_reduce,
    systole_sq,
)
from latwalk.ratmat import BudgetExceeded, RationalMatrix, denominator_lcm, mul, spectral_norm_enclosure

F = Fraction


def test_standard_lattice():
    for d in (2, 3, 4):
        r = systole_sq(LatticeBasis.standard(d))
        assert r.delta_sq == 1
        assert r.witness == tuple(int(i == 0) for i in range(d))


def test_dyadic_diagonal():
    r = systole_sq(LatticeBasis(RationalMatrix.dyadic_diag(10, 2)))
    assert r.delta_sq == F(1, 2**20)
    assert r.witness == (0, 1)


def test_worked_example():
    b = LatticeBasis.of([[4, F(1, 12)], [0, F(1, 4)]])
    r = systole_sq(b)
    assert r.delta_sq == F(5, 72)
    assert r.witness == (0, 1)
    assert brute_force_systole_sq(b, 100) == F(5, 72)


def test_brute_force_examples():
    assert brute_force_systole_sq(LatticeBasis.standard(2), 3) == 1
    assert brute_force_systole_sq(LatticeBasis(RationalMatrix.diag([4, F(1, 4)])), 3) == F(1, 16)
    with pytest.raises(ValueError):
        brute_force_systole_sq(LatticeBasis.standard(2), 0)


def test_witness_matches_delta():
    rnd = random.Random(3)
    for _ in range(50):
        b = LatticeBasis(random_unimodular(rnd, rnd.choice([2, 3])))
        r = systole_sq(b)
        assert any(r.witness)
        assert b.norm_sq(r.witness) == r.delta_sq
        first = next(x for x in r.witness if x)
        assert first > 0


def test_unsupported_dimension_and_budget():
    with pytest.raises(ValueError):
        systole_sq(LatticeBasis.standard(7))
    with pytest.raises(BudgetExceeded):
        systole_sq(LatticeBasis(RationalMatrix.dyadic_diag(5000, 2)), budget_bits=1000)


def test_non_unimodular_basis_rejected():
    with pytest.raises(ValueError):
        LatticeBasis(RationalMatrix.diag([2, 1]))


def test_mahler_compact():
    assert in_mahler_compact(LatticeBasis.standard(2), 0.1)
    assert not in_mahler_compact(LatticeBasis(RationalMatrix.dyadic_diag(10, 2)), 1)
    assert in_mahler_compact(LatticeBasis(RationalMatrix.shear(F(1, 2), 2)), 0.01)
    # -log delta = log 2 = 0.693147180559945309417232121458176568075500134...
    b = LatticeBasis(RationalMatrix.dyadic_diag(1, 2))
    assert in_mahler_compact(b, "0.69314718055994530941723212145817656807551")
    assert not in_mahler_compact(b, "0.69314718055994530941723212145817656807549")


def test_neg_log_delta_enclosure():
    r = systole_sq(LatticeBasis(RationalMatrix.dyadic_diag(10, 2)))
    e = r.neg_log_delta_enclosure(128)
    with working_precision(200):
        assert e.intersects(Enclosure.from_iv(10 * iv.log(2)))
    assert e.width < mpmath.mpf(2) ** -100


def test_oracle_agreement_small():
    rnd = random.Random(11)
    for d, count in ((2, 60), (3, 15)):
        for _ in range(count):
            b = LatticeBasis(random_unimodular(rnd, d))
            assert systole_sq(b).delta_sq == brute_force_systole_sq(b, certified_coeff_radius(b))


def test_lll_is_unimodular_and_reduces():
    rnd = random.Random(21)
    for _ in range(20):
        b = LatticeBasis(random_unimodular(rnd, 3))
        U = lll_reduce(b.int_gram)
        M = RationalMatrix([[U[j][i] for j in range(3)] for i in range(3)])
        assert abs(M.det) == 1
        G = b.int_gram
        first = sum(G[r][s] * U[0][r] * U[0][s] for r in range(3) for s in range(3))
        # |b_1|^2 <= 2^(d-1) lambda_1^2 for parameter 3/4
        assert first <= 4 * systole_sq(b).delta_sq * b.scale**2


def test_expansion_sandwich_and_membership_random():
    rnd = random.Random(31)
    for _ in range(40):
        d = rnd.choice([2, 3])
        g, h = random_unimodular(rnd, d), random_unimodular(rnd, d)
        b = LatticeBasis(h)
        gb = b.transformed(g)
        d0, d1 = systole_sq(b).delta_sq, systole_sq(gb).delta_sq
        assert d1 <= spectral_norm_enclosure(g).upper_sq * d0
        assert d1 * spectral_norm_enclosure(g.inv).upper_sq >= d0
        qp = denominator_lcm(g.inv)
        for i in range(d):
            col = g.inv.apply([qp if k == i else 0 for k in range(d)])
            assert all(x.denominator == 1 for x in col)
        assert systole_sq(LatticeBasis(g)).delta_sq <= qp * qp


@given(
    ops=st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2), st.integers(-3, 3)), min_size=1, max_size=6),
    seed=st.integers(0, 10_000),
)
@settings(max_examples=40, deadline=None)
def test_integer_column_operations_preserve_systole(ops, seed):
    rnd = random.Random(seed)
    g = random_unimodular(rnd, 3)
    U = RationalMatrix.identity(3)
    for i, j, r in ops:
        if i != j:
            U = mul(U, RationalMatrix.elementary(i, j, r, 3))
    assert systole_sq(LatticeBasis(g)).delta_sq == systole_sq(LatticeBasis(mul(g, U))).delta_sq


@given(t=st.fractions(min_value=-1, max_value=1, max_denominator=64))
@settings(max_examples=40, deadline=None)
def test_shear_lattices_have_unit_systole(t):
    # a e_1 + b (t, 1) has second coordinate b, so only b = 0 can beat length 1
    assert systole_sq(LatticeBasis(RationalMatrix.shear(t, 2))).delta_sq == 1


def test_json_of_huge_systole():
    r = systole_sq(LatticeBasis(RationalMatrix.dyadic_diag(20000, 2)))
    text = r.to_json()["delta_sq"]
    num, den = text.split("/")
    # 4^20000 has 12042 decimal digits, past the interpreter's default str() cap
    assert num == "1" and len(den) == 12042 and den.endswith("6")
