import json
import random
from fractions import Fraction

import mpmath
import pytest
from mpmath import iv
from hypothesis import given, settings, strategies as st

from conftest import random_small_rational_vector, random_unimodular
from latwalk.intervals import Enclosure, hi, working_precision
from latwalk.ratmat import (
    BudgetExceeded,
    RationalMatrix,
    SingularMatrix,
    charpoly,
    denominator_lcm,
    gram,
    height_profile,
    inverse,
    mul,
    spectral_norm_enclosure,
)

F = Fraction


def test_identity_products():
    I = RationalMatrix.identity(3)
    assert mul(I, I) == I
    a = RationalMatrix.diag([2, F(1, 2)])
    b = RationalMatrix.diag([F(1, 2), 2])
    assert mul(a, b).is_identity()


def test_shear_homomorphism():
    assert mul(RationalMatrix.shear(F(1, 3), 2), RationalMatrix.shear(F(1, 6), 2)) == RationalMatrix.shear(F(1, 2), 2)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        mul(RationalMatrix.identity(2), RationalMatrix.identity(3))


def test_inverse_examples():
    t = F(3, 8)
    assert inverse(RationalMatrix.shear(t, 2)) == RationalMatrix.shear(-t, 2)
    m = 13
    assert RationalMatrix.dyadic_diag(m, 2).inv == RationalMatrix.diag([F(1, 2**m), 2**m])
    a = RationalMatrix([[2, 1], [1, 1]])
    assert a.inv == RationalMatrix([[1, -1], [-1, 2]])
    assert mul(a, a.inv).is_identity()


def test_singular_rejected():
    with pytest.raises(SingularMatrix):
        inverse(RationalMatrix([[1, 2], [2, 4]]))


def test_unimodular_tag_checked():
    with pytest.raises(ValueError):
        RationalMatrix([[2, 0], [0, 1]], unimodular=True)


def test_entries_reduced():
    a = RationalMatrix([[F(2, 4), 0], [0, F(-6, -3)]])
    assert a.rows[0][0] == F(1, 2) and a.rows[0][0].denominator == 2


def test_denominator_lcm():
    assert denominator_lcm(RationalMatrix.identity(2)) == 1
    assert denominator_lcm(RationalMatrix.shear(F(1, 3), 2)) == 3
    assert denominator_lcm(RationalMatrix.dyadic_diag(10, 2)) == 2**10


def test_json_round_trip():
    a = RationalMatrix([[F(4), F(1, 12)], [F(0), F(1, 4)]])
    text = a.to_json()
    assert json.loads(text) == [["4/1", "1/12"], ["0/1", "1/4"]]
    assert RationalMatrix.from_json([["4", "1/12"], ["0", "1/4"]]) == a
    assert RationalMatrix.from_json(text) == a
    assert RationalMatrix.from_json(json.loads(text), unimodular=True) == a


def test_budget_fail_fast():
    a = RationalMatrix.dyadic_diag(1000, 2)
    with pytest.raises(BudgetExceeded):
        mul(a, a, budget_bits=1500)


def test_norm_identity_and_diagonal():
    e = spectral_norm_enclosure(RationalMatrix.identity(3))
    assert e.lower == 1 and e.upper == 1
    for m in (1, 5, 40):
        e = spectral_norm_enclosure(RationalMatrix.dyadic_diag(m, 2))
        assert e.lower <= 2**m <= e.upper


def test_norm_golden_ratio():
    e = spectral_norm_enclosure(RationalMatrix.shear(1, 2), 64)
    # phi^2 = (3 + sqrt 5)/2 lies between the exact squared bounds
    assert e.lower_sq <= F(3, 2) + F(1, 2) * F(2236067977499789696, 10**18) + F(1, 10**17)
    assert e.upper_sq >= F(3, 2) + F(1, 2) * F(2236067977499789696, 10**18)
    assert (e.upper_sq - e.lower_sq) / e.lower_sq <= F(1, 2**60)
    assert abs(float(e.lower) - 1.618033988749895) < 1e-12
    # characteristic polynomial of N_1^T N_1 is x^2 - 3x + 1
    assert charpoly(gram(RationalMatrix.shear(1, 2))) == [1, -3, 1]


@pytest.mark.parametrize("m", [1, 5, 10])
def test_height_of_dyadic_diagonal(m):
    h = height_profile(RationalMatrix.dyadic_diag(m, 3))
    assert h.q == h.q_inv == 2**m
    assert h.norm.lower <= 2**m <= h.norm.upper
    assert h.norm_inv.lower <= 2**m <= h.norm_inv.upper
    with working_precision(200):
        assert h.height.intersects(Enclosure.from_iv(m * iv.log(2)))


def test_height_of_shear_third():
    h = height_profile(RationalMatrix.shear(F(1, 3), 2))
    assert h.q == h.q_inv == 3
    assert h.norm.upper < 3
    with working_precision(200):
        assert h.height.intersects(Enclosure.from_iv(iv.log(3)))
    assert abs(float(h.norm.lower) - 1.18046) < 1e-4


def test_height_identity():
    h = height_profile(RationalMatrix.identity(2))
    assert h.height.lower == 0 and h.height.upper == 0


def test_random_exactness_and_norm_soundness():
    rnd = random.Random(5)
    for _ in range(40):
        d = rnd.choice([2, 3])
        a = random_unimodular(rnd, d)
        assert mul(a, a.inv).is_identity() and mul(a.inv, a).is_identity()
        e = spectral_norm_enclosure(a)
        assert e.lower_sq <= e.upper_sq
        assert a.max_abs_entry() ** 2 <= e.upper_sq
        assert e.lower_sq <= a.frobenius_sq()
        for _ in range(100):
            v = random_small_rational_vector(rnd, d)
            av = a.apply(v)
            assert sum(x * x for x in av) <= e.upper_sq * sum(x * x for x in v)


def test_height_properties():
    rnd = random.Random(9)
    for _ in range(25):
        d = rnd.choice([2, 3])
        a, b = random_unimodular(rnd, d), random_unimodular(rnd, d)
        ha, hb, hi_ = height_profile(a), height_profile(b), height_profile(a.inv)
        # H(g) = H(g^-1)
        assert ha.height.intersects(hi_.height)
        assert abs(ha.height.mid - hi_.height.mid) <= ha.height.width + hi_.height.width
        # subadditivity
        with working_precision(128):
            bound = hi(ha.height.to_iv() + hb.height.to_iv())
        assert height_profile(mul(a, b)).height.lower <= bound
        # ||g^-1|| <= ||g||^(d-1) and q' <= q^(d-1)
        assert ha.norm_inv.lower_sq <= ha.norm.upper_sq ** (d - 1)
        assert ha.q_inv <= ha.q ** (d - 1)


small = st.fractions(min_value=-8, max_value=8, max_denominator=9)


@given(t=small, s=small)
@settings(max_examples=60, deadline=None)
def test_shear_parameters_add(t, s):
    assert mul(RationalMatrix.shear(t, 2), RationalMatrix.shear(s, 2)) == RationalMatrix.shear(t + s, 2)


@given(r=st.fractions(min_value=-5, max_value=5, max_denominator=7).filter(lambda x: x != 0), i=st.integers(0, 2), j=st.integers(0, 2))
@settings(max_examples=60, deadline=None)
def test_elementary_inverse(r, i, j):
    if i == j:
        return
    e = RationalMatrix.elementary(i, j, r, 3)
    assert e.det == 1
    assert e.inv == RationalMatrix.elementary(i, j, -r, 3)


@given(m=st.integers(-30, 30), s=st.integers(-1, 1))
@settings(max_examples=40, deadline=None)
def test_power_of_dyadic(m, s):
    assert RationalMatrix.dyadic_diag(m, 2).power(s) == RationalMatrix.dyadic_diag(m * s, 2)
