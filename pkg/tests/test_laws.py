import math
from dataclasses import replace
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latwalk.laws import (
    DiagExponent,
    DyadicAddress,
    FullSupport,
    Generator,
    KappaTable,
    LawError,
    MatrixLawSpec,
    ScalarLawSpec,
    StepDescriptor,
    address_value,
    calkin_wilf,
    cube_cap_t_min,
    default_kappa,
    enumerated_height_upper,
    enumerated_matrix,
    exp_cap_t_min,
    heavy_record_exp,
    power_floor_pmf,
    power_law,
    realize_step_matrix,
    sample_full_support_index,
    sample_full_support_rational,
    sample_scalar,
    sample_step,
    sample_steps,
    seeds_from_uniform,
    signed_cycle,
    simple_record_cube,
    simple_record_pmf,
    theorem11_law,
    trial_rng,
)
from latwalk.ratmat import RationalMatrix, mul

F = Fraction


def three_sigma(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


# -- scalar laws ---------------------------------------------------------------


def test_scalar_examples():
    assert sample_scalar(heavy_record_exp(), None, seed=1).log_value == 1
    v = sample_scalar(power_law(2), None, seed=F(1, 2))
    assert abs(v.log_value - mpmath.log(4)) < 1e-14
    assert sample_scalar(power_law(2, floor=True), None, seed=F(1, 10)).exact == 100
    assert sample_scalar(power_law(2, floor=True), None, seed="0.1").exact == 100
    # the binary double nearest 0.1 is slightly above it
    assert sample_scalar(power_law(2, floor=True), None, seed=0.1).exact == 99


def test_deferred_floor():
    v = sample_scalar(power_law(2, floor=True), None, budget_bits=8, seed=F(1, 1000))
    assert v.exact is None and v.deferred_floor
    assert abs(v.log_value - 2 * mpmath.log(1000)) < 1e-14


def test_scalar_law_validation():
    with pytest.raises(LawError):
        power_law(1.0)
    with pytest.raises(LawError):
        ScalarLawSpec("nonsense")
    with pytest.raises(LawError):
        power_law(2, domain_end=F(1, 3))
    with pytest.raises(LawError):
        heavy_record_exp(t_min=1.0)


def test_scalar_json_round_trip():
    law = power_law(2.5, floor=True, domain_end=F(1, 2), t_min=0.01)
    assert ScalarLawSpec.from_json(law.to_json()) == law


def test_seed_map_respects_truncation():
    law = heavy_record_exp(t_min=0.25)
    t = seeds_from_uniform(law, np.linspace(0, 0.999999, 101))
    assert t.min() >= 0.25 and t.max() <= 1.0
    t0 = seeds_from_uniform(power_law(2, domain_end=F(1, 2)), np.array([0.0, 0.5]))
    assert list(t0) == [0.5, 0.25]


def test_truncation_caps():
    t = exp_cap_t_min(1024)
    assert math.floor(math.exp(t**-2)) <= 1024
    u = cube_cap_t_min(6)
    assert math.floor(u**-3) <= 6


def test_simple_record_pmf():
    assert abs(simple_record_pmf(1) - (1 - mpmath.mpf(2) ** (-mpmath.mpf(1) / 3))) < 1e-15
    assert abs(float(simple_record_pmf(1)) - 0.206299) < 1e-6
    with pytest.raises(LawError):
        simple_record_pmf(0)
    # telescoping partial sum
    N = 10**4
    total = mpmath.fsum(simple_record_pmf(l) for l in range(1, N + 1))
    assert abs(total - (1 - mpmath.mpf(N + 1) ** (-mpmath.mpf(1) / 3))) < 1e-12


def test_simple_record_frequency():
    rng = trial_rng(7)
    u = 1.0 - rng.random(10**6)
    freq = np.mean(np.floor(u**-3.0) == 1)
    p = float(simple_record_pmf(1))
    assert abs(freq - p) <= three_sigma(p, 10**6)


def test_power_floor_pmf_matches_frequencies():
    rng = trial_rng(8)
    n = 4 * 10**5
    vals = np.floor((1.0 - rng.random(n)) ** -2.0)
    for l in range(1, 11):
        p = float(power_floor_pmf(l, 2.0))
        assert abs(np.mean(vals == l) - p) <= three_sigma(p, n)


# -- dyadic addresses ------------------------------------------------------------


def test_address_example():
    assert DyadicAddress((1, 3), (1, 1)).value() == F(5, 8)
    assert address_value((1, 3), (1, 1), 1) == F(1, 2)


def test_address_validation():
    with pytest.raises(LawError):
        DyadicAddress((3, 3))
    with pytest.raises(LawError):
        DyadicAddress((0, 2))


@given(
    gaps=st.lists(st.integers(1, 6), min_size=2, max_size=10),
    bits=st.lists(st.integers(0, 1), min_size=10, max_size=10),
    depth=st.integers(0, 9),
)
@settings(max_examples=100, deadline=None)
def test_address_truncation_error(gaps, bits, depth):
    idx = tuple(np.cumsum(gaps).tolist())
    a = DyadicAddress(idx, tuple(bits[: len(idx)]))
    if depth >= len(idx):
        return
    err = abs(a.value() - a.value(depth))
    assert err <= a.truncation_bound(depth)
    assert 0 <= a.value() < 1


# -- full-support law ---------------------------------------------------------------


def test_calkin_wilf_enumerates_positive_rationals():
    seen = {calkin_wilf(n) for n in range(1, 2000)}
    assert len(seen) == 1999
    assert calkin_wilf(1) == 1 and calkin_wilf(2) == F(1, 2) and calkin_wilf(3) == 2


def test_enumeration_is_unimodular_and_starts_at_identity():
    assert enumerated_matrix(0, 2).is_identity()
    for k in range(200):
        for d in (2, 3):
            assert enumerated_matrix(k, d).det == 1


def test_enumeration_reaches_small_elements():
    targets = {RationalMatrix.elementary(0, 1, F(1, 2), 2), RationalMatrix.elementary(1, 0, -3, 2)}
    found = {enumerated_matrix(k, 2) for k in range(5000)}
    assert targets <= found


def test_full_support_sampler():
    rng = trial_rng(3)
    ks = [sample_full_support_index(rng, 2) for _ in range(10**5 // 4)]
    assert np.mean(np.array(ks) == 0) > 0
    h = np.array([enumerated_height_upper(k, 2) for k in ks])
    assert np.isfinite(h).all() and h.mean() <= 4
    g = sample_full_support_rational(rng, d=3)
    assert g.det == 1


def test_full_support_budget():
    rng = trial_rng(4)
    for _ in range(200):
        assert enumerated_height_upper(sample_full_support_index(rng, 2, height_budget=1.0), 2) <= 1.0
    with pytest.raises(LawError):
        sample_full_support_index(rng, 2, height_budget=-1.0, max_trials=50)


# -- matrix laws ----------------------------------------------------------------------


def test_default_kappa():
    k = default_kappa(3)
    assert all(g.det == 1 for g in k.generators)
    assert signed_cycle(3).det == 1 and signed_cycle(2).det == 1
    assert KappaTable.from_json(k.to_json()) == k


def test_matrix_law_json_round_trip():
    law = MatrixLawSpec(2, simple_record_cube(0.3), 0.4, default_kappa(2), (1, 3, 7), 2, True, (1, 2, 14))
    assert MatrixLawSpec.from_json(law.to_json()) == law
    full = MatrixLawSpec(3, power_law(2, floor=True, domain_end=F(1, 2)), kappa=None)
    assert MatrixLawSpec.from_json(full.to_json()) == full


def test_matrix_law_validation():
    with pytest.raises(LawError):
        MatrixLawSpec(2, heavy_record_exp(), mix_weight=1.5)
    with pytest.raises(LawError):
        MatrixLawSpec(2, heavy_record_exp(), kappa=default_kappa(3))
    with pytest.raises(LawError):
        MatrixLawSpec(2, heavy_record_exp(), shear_indices=(1, 2), level=3)


def test_mix_weight_zero_and_no_symmetrize():
    law = MatrixLawSpec(2, heavy_record_exp(0.5), 0.0, default_kappa(2))
    b = sample_steps(law, 500, trial_rng(1))
    assert not b.is_diag.any()
    assert (b.sign == 1).all()
    assert all(isinstance(s.core, Generator) for s in b.descriptors())


def test_shear_from_address_bits():
    law = MatrixLawSpec(2, heavy_record_exp(0.5), 0.5, default_kappa(2), (1, 3), 2)
    b = sample_steps(law, 200, trial_rng(2))
    for k in range(200):
        bits = tuple(int(x) for x in b.bits[k])
        assert b.shear(k) == F(bits[0], 2) + F(bits[1], 8)


def test_realize_examples():
    law = MatrixLawSpec(2, heavy_record_exp(), kappa=default_kappa(2))
    assert realize_step_matrix(StepDescriptor(1, F(0), DiagExponent(0, 0.0)), law).is_identity()
    assert realize_step_matrix(StepDescriptor(-1, F(0), DiagExponent(3, 0.0)), law) == RationalMatrix.diag([F(1, 8), 8])
    g = realize_step_matrix(StepDescriptor(1, F(1, 2), DiagExponent(1, 0.0)), law)
    assert g == RationalMatrix([[2, F(1, 4)], [0, F(1, 2)]])
    assert g == mul(RationalMatrix.shear(F(1, 2), 2), RationalMatrix.diag([2, F(1, 2)]))
    law3 = MatrixLawSpec(3, heavy_record_exp(), kappa=None)
    assert realize_step_matrix(StepDescriptor(1, F(0), FullSupport(5)), law3) == enumerated_matrix(5, 3)


def test_determinism():
    law = replace(theorem11_law(2), symmetrize=True, shear_indices=(1, 4), level=2)
    a = list(sample_steps(law, 300, trial_rng(99, 3)).descriptors())
    b = list(sample_steps(law, 300, trial_rng(99, 3)).descriptors())
    assert a == b
    assert sample_step(law, trial_rng(5)) == sample_step(law, trial_rng(5))


def test_marginals():
    n = 10**6
    law = MatrixLawSpec(2, heavy_record_exp(), 0.3, default_kappa(2), symmetrize=True)
    b = sample_steps(law, n, trial_rng(12), exact_bits=0)
    assert abs(b.is_diag.mean() - 0.3) <= three_sigma(0.3, n)
    assert abs((b.sign < 0).mean() - 0.5) <= three_sigma(0.5, n)


def test_sign_flip_is_inversion():
    law = MatrixLawSpec(2, power_law(2, floor=True, domain_end=F(1, 2), t_min=0.05), 0.5, default_kappa(2),
                        (1, 3), 2, symmetrize=True)
    b = sample_steps(law, 200, trial_rng(13))
    for s in b.descriptors():
        flipped = replace(s, sign=-s.sign)
        assert mul(realize_step_matrix(s, law), realize_step_matrix(flipped, law)).is_identity()


def test_exponent_table_mapping():
    table = (1, 2, 14, 106)
    law = MatrixLawSpec(2, simple_record_cube(cube_cap_t_min(4)), 1.0, default_kappa(2), exponent_table=table)
    b = sample_steps(law, 300, trial_rng(14))
    for k in range(300):
        assert b.exact_m[k] == table[b.driving[k] - 1]
    with pytest.raises(LawError):
        sample_steps(replace(law, scalar=simple_record_cube()), 2000, trial_rng(15))


def test_heavy_record_exponents_exact():
    law = theorem11_law(2, max_exponent=1024)
    b = sample_steps(law, 400, trial_rng(16))
    for k in np.flatnonzero(b.is_diag):
        m = b.exact_m[k]
        t = F(float(b.seed_t[k]))
        assert 1 <= m <= 1024
        # floor(exp(t^-2)) = m  <=>  m <= exp(t^-2) < m + 1
        x = float(t) ** -2
        assert math.log(m) <= x + 1e-12 and x < math.log(m + 1) + 1e-12
