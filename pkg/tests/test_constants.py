import json
import math
from fractions import Fraction
from pathlib import Path

import mpmath
import pytest
from mpmath import mpf

from latwalk.constants import (
    default_p,
    a_p_value,
    alpha_enclosure,
    epsilon_p,
    k_satisfies,
    moment_constants,
    nu_moment_bracket,
    smallest_K,
    thm13_sequences,
    thm14_sequences,
    verify_thm13,
    verify_thm14,
    zeta_enclosure,
    zeta_integral_bracket,
)
from latwalk.intervals import Enclosure
from latwalk.laws import KappaTable, MatrixLawSpec, default_kappa, power_law
from latwalk.ratmat import RationalMatrix

F = Fraction
GOLDENS = Path(__file__).parent / "goldens" / "constants_p2.json"


def exact_str(x):
    man, exp = x.man_exp
    return f"{man}*2^{exp}"


def contains(outer: Enclosure, inner: Enclosure) -> bool:
    return outer.lower <= inner.lower and inner.upper <= outer.upper


# -- independent oracles ------------------------------------------------------------


def alpha_oracle(dps=50):
    # plain log-sum; the tail past k = 6000 is below e^-200
    with mpmath.workdps(dps):
        s = mpmath.fsum(mpmath.log1p(-mpmath.exp(-mpf(k) / 30)) for k in range(2, 6001))
        return +mpmath.exp(s)


def test_alpha_against_oracle():
    a = alpha_enclosure(64)
    ref = alpha_oracle()
    assert a.lower <= ref <= a.upper
    assert a.width / a.lower < mpf(2) ** -60
    # the product is below its first factor
    assert a.upper < 1 - math.exp(-1 / 15)


def test_zeta_and_a2():
    z = zeta_enclosure(2, 64)
    with mpmath.workdps(40):
        assert z.lower <= mpmath.pi**2 / 6 <= z.upper
    a2 = a_p_value(2, 64)
    ref = (math.pi**2 / 6) ** -0.5
    assert abs(float(a2.mid) - ref) < 1e-9
    assert a2.width < mpf(2) ** -60


@pytest.mark.parametrize("p", [F(3, 2), 2, 3, F(11, 10)])
def test_euler_maclaurin_inside_integral_bracket(p):
    em = zeta_enclosure(p, 64)
    crude = zeta_integral_bracket(p, 200)
    assert contains(crude, em)
    assert em.width < crude.width


def test_zeta_integer_values():
    with mpmath.workdps(40):
        ref = mpmath.zeta(3)
        z = zeta_enclosure(3, 96)
        assert z.lower <= ref <= z.upper


def test_nesting_under_precision_doubling():
    lo_, hi_ = epsilon_p(2, 64), epsilon_p(2, 128)
    for name in ("alpha", "a_p", "epsilon_p"):
        assert contains(getattr(lo_, name), getattr(hi_, name)), name
    assert lo_.K == hi_.K == 49


def test_goldens_bit_identical():
    pipe = epsilon_p(2, 64)
    golden = json.loads(GOLDENS.read_text())
    assert golden["precision_bits"] == 64
    assert pipe.K == golden["K"]
    for name in ("alpha", "a_p", "epsilon_p"):
        enc = getattr(pipe, name)
        assert exact_str(enc.lower) == golden[name]["lower"], name
        assert exact_str(enc.upper) == golden[name]["upper"], name


def test_epsilon_matches_product_of_parts():
    pipe = epsilon_p(2, 64)
    with mpmath.workdps(40):
        ref = alpha_oracle() * (mpmath.pi**2 / 6) ** mpf(-0.5) / (8 * 49)
    assert pipe.epsilon_p.lower <= ref <= pipe.epsilon_p.upper
    assert abs(float(pipe.epsilon_p.mid) - 3.0878711794166e-22) < 1e-34


def test_K_minimality():
    alpha = alpha_enclosure(64)
    assert smallest_K(alpha) == 49
    assert k_satisfies(49, alpha) and not k_satisfies(48, alpha)
    # independent float check of the same inequality
    a = float(alpha.lower)
    assert (1 + 2 * 49) * math.exp(-49) <= a / 2 < (1 + 2 * 48) * math.exp(-48)


def test_K_small_alpha_values():
    assert smallest_K(1) == 3
    assert smallest_K(2) <= 3
    with pytest.raises(ValueError):
        smallest_K(0)


def test_a_p_monotone_and_limit():
    vals = [a_p_value(p, 64) for p in (F(3, 2), 2, 3, 4)]
    for x, y in zip(vals, vals[1:]):
        assert x.upper < y.lower
    assert a_p_value(F(101, 100), 64).upper < mpf("0.02")


def test_epsilon_monotone_in_p():
    eps = [epsilon_p(p, 64).epsilon_p for p in (F(11, 10), F(3, 2), 2, 3)]
    for x, y in zip(eps, eps[1:]):
        assert x.upper < y.lower


# -- moment constants --------------------------------------------------------------------


def test_point_mass_identity_has_zero_M():
    law = MatrixLawSpec(2, power_law(2), 0.5, KappaTable((RationalMatrix.identity(2),), (1.0,)))
    mc = moment_constants(law, "max")
    assert mc.M.lower == 0 and mc.M.upper == 0


def test_default_kappa_heights():
    law = MatrixLawSpec(2, power_law(2), 0.5, default_kappa(2))
    phi = (1 + math.sqrt(5)) / 2
    mx = moment_constants(law, "max")
    assert abs(float(mx.M.mid) - math.log(phi)) < 1e-12
    mean = moment_constants(law, "mean")
    assert abs(float(mean.M.mid) - math.log(phi) / 2) < 1e-12
    with pytest.raises(ValueError):
        moment_constants(law, "median")


def test_M_prime_finite_and_divergent():
    law = MatrixLawSpec(2, power_law(F(3, 2), domain_end=F(1, 2)), 0.5, default_kappa(2))
    mc = moment_constants(law, "max", p_prime=0.5, trials=2000, master_seed=3)
    assert not mc.divergent and math.isfinite(mc.M_prime)
    assert mc.M_prime >= float(mc.nu_part.lower)
    law2 = MatrixLawSpec(2, power_law(2, domain_end=F(1, 2)), 0.5, default_kappa(2))
    mc2 = moment_constants(law2, "max", p_prime=0.5)
    assert mc2.divergent and math.isinf(mc2.M_prime)
    assert mc2.to_json()["M_prime"] == "inf"


def test_nu_bracket_against_float_series():
    p, q = 1.5, 0.5
    enc = nu_moment_bracket(p, q, F(1, 2), cutoff=4096)
    # direct float sum over a much longer range plus a crude integral tail
    m = int(2**p)
    total = m**q * 2 * (0.5 - (m + 1) ** (-1 / p))
    for k in range(m + 1, 10**6):
        total += k**q * 2 * (k ** (-1 / p) - (k + 1) ** (-1 / p))
    tail = 2 / p * (10**6) ** (q - 1 / p) / (1 / p - q)
    ref = 0.5 * (2 * math.log(2)) ** q * (total + tail)
    assert abs(ref - float(enc.mid)) <= float(enc.width) + 1e-3 * ref
    with pytest.raises(ValueError):
        nu_moment_bracket(2, 0.5)


# -- index sequences ------------------------------------------------------------------------


def test_thm13_toy_rows():
    t = thm13_sequences(2, F(1, 2), 1, 1, F(1, 20), 5, mode="empirical-eps")
    assert t.rows[0] == {"j": 1, "i": 1, "a": 82}
    assert t.rows[1]["i"] == 248337454
    # p p' = 1 here, so the moment M' is formally infinite and the table says so
    assert len(t.warnings) == 1
    checks = verify_thm13(t)
    assert all(all(v for k, v in c.items() if k != "j") for c in checks)
    a, i = t.column("a"), t.column("i")
    assert all(x < y for x, y in zip(i, i[1:]))
    assert all(x <= y for x, y in zip(a, a[1:]))


def test_thm13_first_rows_by_float_oracle():
    # a^2 >= (4/0.05 + 2 log 2) a  <=>  a >= 81.386...
    c = 80 + 2 * math.log(2)
    assert 82 >= c > 81
    # (i - 1) log 2 >= log(2a) + (4a * 2 / 0.05)^2 + tiny
    with mpmath.workdps(40):
        rhs = mpmath.log(164) + mpf(4 * 82 * 2 * 20) ** 2
        expect = int(mpmath.ceil(rhs / mpmath.log(2))) + 1
    t = thm13_sequences(2, F(1, 2), 1, 1, F(1, 20), 2, mode="empirical-eps")
    assert t.rows[1]["i"] == expect


def test_thm13_divergence_warning():
    t = thm13_sequences(2, F(3, 4), 1, 1, F(1, 20), 1)
    assert t.warnings


def test_thm13_paper_faithful_first_row():
    eps = epsilon_p(2, 64).epsilon_p
    t = thm13_sequences(2, F(1, 2), 1, 1, eps, 1)
    checks = verify_thm13(t)
    assert checks[0]["a_holds"] and checks[0]["a_minimal"]
    a = t.rows[0]["a"]
    # a_1 is about 4 / eps_2
    assert abs(a * float(eps.mid) / 4 - 1) < 1e-6


def thm14_oracle(M, j_max):
    rows = [(1, 1)]
    with mpmath.workdps(60):
        L2 = mpmath.log(2)
        l, i = 1, 1
        for j in range(1, j_max):
            ln = int(mpmath.ceil(j * ((i + l) * L2 + 2 * M)))
            k = max(l, i + 1)

            def ok(k):
                lhs = -(k - 1) * L2 + mpmath.log(j) + j * mpmath.log1p(mpf(2) ** (1 - k)) + L2 + (2 * M + ln * L2 + 1) * j
                return lhs <= 0

            # coarse jump then linear scan
            k = max(k, int((mpmath.log(j) + L2 + (2 * M + ln * L2 + 1) * j) / L2) - 2)
            while not ok(k):
                k += 1
            l, i = ln, k
            rows.append((l, i))
    return rows


def test_thm14_rows_M1():
    t = thm14_sequences(1, 5)
    assert [(r["l"], r["i"]) for r in t.rows] == [(1, 1), (4, 11), (25, 62), (187, 578), (2130, 8542)]
    assert [(r["l"], r["i"]) for r in t.rows] == thm14_oracle(1, 5)
    checks = verify_thm14(t)
    assert checks[0]["base"]
    assert all(all(v for k, v in c.items() if k != "j") for c in checks[1:])


def test_thm14_default_kappa_mean():
    M = moment_constants(MatrixLawSpec(2, power_law(2), 0.5, default_kappa(2)), "mean").M
    t = thm14_sequences(M, 6)
    assert t.column("l") == [1, 2, 14, 106, 1206, 20946]
    assert t.column("i") == [1, 7, 36, 328, 4837, 104746]
    assert not t.warnings


def test_thm14_rejects_negative_M():
    with pytest.raises(ValueError):
        thm14_sequences(-1, 3)


def test_table_json():
    t = thm14_sequences(1, 3)
    js = t.to_json()
    assert js["rows"][1] == {"j": "2", "l": "4", "i": "11"}
    assert js["variant"] == "thm14"


def test_default_p_is_midpoint():
    assert default_p(F(1, 2)) == F(3, 2)
    with pytest.raises(ValueError):
        default_p(1)
    t = thm13_sequences(None, F(1, 2), 1, 1, F(1, 20), 2, mode="toy")
    assert t.params["p"] == F(3, 2)
    assert not t.warnings
