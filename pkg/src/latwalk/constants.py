"""Constants of the escape-of-mass estimates and the recursive index sequences.

All real constants are returned as outward-rounded :class:`Enclosure` values.
"Smallest integer such that" searches evaluate the defining inequality in
interval arithmetic and only accept a decision when the enclosure lies
entirely on one side; otherwise the working precision is doubled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import mpmath
import numpy as np
from mpmath import iv, mpf

from .intervals import (
    Enclosure,
    decimal,
    decimal_digits,
    fraction_str,
    hi,
    int_str,
    ival,
    lo,
    mpf_to_fraction,
    working_precision,
)
from .laws import (
    LawError,
    MatrixLawSpec,
    enumerated_matrix,
    sample_full_support_index,
    trial_rng,
)
from .ratmat import height_profile, spectral_norm_enclosure

DEFAULT_DIGIT_BUDGET = 100_000
MAX_BITS = 1 << 20


class Undecidable(ArithmeticError):
    """An interval comparison stayed ambiguous up to the precision cap."""


def certified_sign(f: Callable[[], "iv.mpf"], start_bits: int = 64, max_bits: int = MAX_BITS) -> int:
    """Sign of the real enclosed by ``f()``, raising the precision until decided."""
    bits = max(start_bits, 53)
    while bits <= max_bits:
        with working_precision(bits):
            v = f()
            if lo(v) > 0:
                return 1
            if hi(v) < 0:
                return -1
            if lo(v) == 0 and hi(v) == 0:
                return 0
        bits *= 2
    raise Undecidable("comparison undecided at the precision cap")


def certified_ceil(f: Callable[[], "iv.mpf"], start_bits: int = 64, max_bits: int = MAX_BITS) -> int:
    bits = max(start_bits, 53)
    while bits <= max_bits:
        with working_precision(bits):
            v = f()
            a, b = int(mpmath.ceil(lo(v))), int(mpmath.ceil(hi(v)))
        if a == b:
            return a
        bits *= 2
    raise Undecidable("ceiling undecided at the precision cap")


def _as_exact(x, direction: str) -> Fraction:
    """Collapse an Enclosure to its conservative endpoint; other reals convert exactly."""
    if isinstance(x, Enclosure):
        return mpf_to_fraction(x.upper if direction == "up" else x.lower)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, mpf):
        return mpf_to_fraction(x)
    return Fraction(x)


# -- alpha, a_p, K, epsilon_p ----------------------------------------------------


def alpha_enclosure(precision_bits: int = 64) -> Enclosure:
    """prod_{k>=2} (1 - exp(-k/30)).

    The product is truncated at K0 and the tail T = sum_{k>K0} e^{-k/30}
    is controlled by log(1-x) >= -2x, giving alpha in [P e^{-2T}, P].
    """
    k0 = math.ceil(30 * ((precision_bits + 2) * math.log(2) + math.log(32)))
    work = precision_bits + 2 * k0.bit_length() + 24
    with working_precision(work):
        step = iv.exp(-iv.mpf(1) / 30)
        x = step  # e^{-k/30}
        prod = iv.mpf(1)
        for _ in range(2, k0 + 1):
            x = x * step
            prod = prod * (1 - x)
        tail = iv.exp(-iv.mpf(k0 + 1) / 30) / (1 - step)
        low = prod * iv.exp(-2 * tail)
        return Enclosure(lo(low), hi(prod))


def _rising(p: Fraction, r: int) -> Fraction:
    out = Fraction(1)
    for i in range(r):
        out *= p + i
    return out


def zeta_enclosure(p, precision_bits: int = 64, N: int | None = None) -> Enclosure:
    """sum_{k>=1} k^{-p} by Euler-Maclaurin with the remainder bracketed by the next term.

    For f(x) = x^{-p} all derivatives alternate in sign, so the remainder after
    the last Bernoulli term lies between 0 and the first omitted term.
    """
    pq = _as_exact(p, "down")
    if pq <= 1:
        raise ValueError("p must exceed 1")
    N = N or max(16, precision_bits // 2)
    work = precision_bits + 32
    with working_precision(work):
        P = ival(pq)
        total = iv.mpf(0)
        for k in range(1, N):
            total += iv.exp(-P * iv.log(iv.mpf(k)))
        n_pow = iv.exp(-P * iv.log(iv.mpf(N)))  # N^{-p}
        total += n_pow * N / (P - 1) + n_pow / 2
        target = iv.mpf(2) ** (-(precision_bits + 16))
        j = 1
        while True:
            num, den = mpmath.bernfrac(2 * j)
            coeff = Fraction(int(num), int(den)) / math.factorial(2 * j) * _rising(pq, 2 * j - 1)
            term = ival(coeff) * n_pow * iv.mpf(N) ** (1 - 2 * j)
            nxt_num, nxt_den = mpmath.bernfrac(2 * j + 2)
            nxt_coeff = Fraction(int(nxt_num), int(nxt_den)) / math.factorial(2 * j + 2) * _rising(pq, 2 * j + 1)
            nxt = ival(nxt_coeff) * n_pow * iv.mpf(N) ** (-1 - 2 * j)
            total += term
            if hi(abs(nxt)) < hi(target * total) or j > 200:
                break
            j += 1
        bracket = iv.mpf([min(lo(nxt), mpf(0)), max(hi(nxt), mpf(0))])
        return Enclosure.from_iv(total + bracket)


def zeta_integral_bracket(p, N: int, precision_bits: int = 64) -> Enclosure:
    """Cruder enclosure: partial sum to N-1 plus int_N^inf <= tail <= int_{N-1}^inf."""
    pq = _as_exact(p, "down")
    with working_precision(precision_bits + 32):
        P = ival(pq)
        total = iv.mpf(0)
        for k in range(1, N):
            total += iv.exp(-P * iv.log(iv.mpf(k)))
        low = iv.exp((1 - P) * iv.log(iv.mpf(N))) / (P - 1)
        high = iv.exp((1 - P) * iv.log(iv.mpf(N - 1))) / (P - 1)
        return Enclosure(lo(total + low), hi(total + high))


def a_p_value(p, precision_bits: int = 64) -> Enclosure:
    """a_p = (sum_k k^{-p})^{-1/p}."""
    z = zeta_enclosure(p, precision_bits)
    with working_precision(precision_bits + 32):
        P = ival(_as_exact(p, "down"))
        return Enclosure.from_iv(iv.exp(-iv.log(z.to_iv()) / P))


def _k_condition(K: int, threshold: Fraction) -> Callable[[], "iv.mpf"]:
    """Interval for threshold - (1+2K) e^{-K}; positive means K satisfies the inequality."""
    return lambda: ival(threshold) - (1 + 2 * K) * iv.exp(-iv.mpf(K))


def smallest_K(alpha) -> int:
    """Minimal K >= 1 with (1+2K) e^{-K} <= alpha/2, using alpha.lower when given an enclosure."""
    a = _as_exact(alpha, "down")
    if a <= 0:
        raise ValueError("alpha must be positive")
    threshold = a / 2
    K = 1
    while certified_sign(_k_condition(K, threshold)) < 0:
        K += 1
    return K


def k_satisfies(K: int, alpha) -> bool:
    return certified_sign(_k_condition(K, _as_exact(alpha, "down") / 2)) >= 0


@dataclass(frozen=True)
class EpsilonPipeline:
    p: float
    alpha: Enclosure
    a_p: Enclosure
    K: int
    epsilon_p: Enclosure
    precision_bits: int

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "precision_bits": self.precision_bits,
            "alpha": self.alpha.to_json(),
            "a_p": self.a_p.to_json(),
            "K": str(self.K),
            "epsilon_p": self.epsilon_p.to_json(),
        }


def epsilon_p(p, precision_bits: int = 64) -> EpsilonPipeline:
    """epsilon_p = alpha a_p / (8K) with alpha, a_p and K from the functions above."""
    alpha = alpha_enclosure(precision_bits)
    a = a_p_value(p, precision_bits)
    K = smallest_K(alpha)
    with working_precision(precision_bits + 32):
        eps = alpha.to_iv() * a.to_iv() / (8 * K)
        enc = Enclosure.from_iv(eps)
    return EpsilonPipeline(float(p), alpha, a, K, enc, precision_bits)


# -- moment constants ------------------------------------------------------------------


@dataclass(frozen=True)
class MomentConstants:
    """M (max or mean height of the finite part) and M' (p'-moment of log(|g||g^-1|)).

    ``M`` is an enclosure when exact (finite table), otherwise ``M_estimate``
    with standard error ``M_se``.  ``M_prime`` is ``inf`` when the moment
    diverges (p * p' >= 1).
    """

    mode: str
    M: Enclosure | None
    M_estimate: float
    M_se: float
    p_prime: float | None = None
    nu_part: Enclosure | None = None
    kappa_part: float | None = None
    kappa_part_se: float | None = None
    M_prime: float | None = None
    M_prime_se: float | None = None
    divergent: bool = False
    trials: int = 0

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "M": None if self.M is None else self.M.to_json(),
            "M_estimate": self.M_estimate,
            "M_se": self.M_se,
            "p_prime": self.p_prime,
            "nu_part": None if self.nu_part is None else self.nu_part.to_json(),
            "kappa_part": self.kappa_part,
            "kappa_part_se": self.kappa_part_se,
            "M_prime": None if self.M_prime is None else ("inf" if math.isinf(self.M_prime) else self.M_prime),
            "M_prime_se": self.M_prime_se,
            "divergent": self.divergent,
            "trials": self.trials,
        }


def nu_moment_bracket(p: float, p_prime: float, diag_mass=Fraction(1, 2), cutoff: int = 4096) -> Enclosure:
    """diag_mass * E[(2 log2 floor(t^-p))^{p'}] for t uniform on (0, 1/2].

    The series is summed exactly to ``cutoff`` and the tail bracketed by
    integrals of x^{p' - 1/p - 1}.
    """
    if p * p_prime >= 1:
        raise ValueError("the moment diverges for p * p' >= 1")
    with working_precision(96):
        P, Q = ival(Fraction(p)), ival(Fraction(p_prime))
        inv_p = 1 / P
        m0 = int(math.floor(2.0**p))
        # the lowest value takes all of t in ((m0+1)^{-1/p}, 1/2]
        total = iv.mpf(m0) ** Q * 2 * (iv.mpf(1) / 2 - iv.mpf(m0 + 1) ** (-inv_p))
        for m in range(m0 + 1, cutoff + 1):
            w = 2 * (iv.mpf(m) ** (-inv_p) - iv.mpf(m + 1) ** (-inv_p))
            total += iv.mpf(m) ** Q * w
        A = iv.mpf(cutoff)
        upper = 2 / P * (A + 1) ** (Q - inv_p) / (inv_p - Q)
        lower = (A / (A + 1)) ** Q * upper
        tail = iv.mpf([lo(lower), hi(upper)])
        scale = ival(Fraction(diag_mass)) * (2 * iv.log(iv.mpf(2))) ** Q
        return Enclosure.from_iv(scale * (total + tail))


def moment_constants(
    law: MatrixLawSpec,
    mode: str = "max",
    p_prime: float | None = None,
    trials: int = 10_000,
    master_seed: int = 0,
    precision_bits: int = 64,
) -> MomentConstants:
    """M from the finite part of ``law`` and, when ``p_prime`` is given, M' for the diagonal-plus-kappa_0 law."""
    if mode not in ("max", "mean"):
        raise ValueError("mode must be 'max' or 'mean'")
    M_enc = None
    M_est, M_se = 0.0, 0.0
    if law.kappa is not None:
        profiles = law.kappa.heights(precision_bits)
        if not profiles:
            raise LawError("empty support table")
        if mode == "max":
            M_enc = Enclosure(max(h.height.lower for h in profiles), max(h.height.upper for h in profiles))
        else:
            with working_precision(precision_bits + 16):
                s = sum((ival(Fraction(w)) * h.height.to_iv() for w, h in zip(law.kappa.weights, profiles)), iv.mpf(0))
                M_enc = Enclosure.from_iv(s)
        M_est = float(M_enc.mid)
    else:
        if mode == "max":
            raise LawError("mode=max needs a finite kappa table")
        rng = trial_rng(master_seed, 0, 1)
        hs = []
        for _ in range(trials):
            k = sample_full_support_index(rng, law.d, law.kappa_height_budget)
            hs.append(float(height_profile(enumerated_matrix(k, law.d), 53).height.upper))
        M_est = float(np.mean(hs))
        M_se = float(np.std(hs, ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    if p_prime is None:
        return MomentConstants(mode, M_enc, M_est, M_se, trials=trials if law.kappa is None else 0)

    p = law.scalar.p if law.scalar.p is not None else 3.0
    if p * p_prime >= 1:
        return MomentConstants(mode, M_enc, M_est, M_se, p_prime, None, None, None, math.inf, None, True, trials)
    nu = nu_moment_bracket(p, p_prime, Fraction(law.mix_weight).limit_denominator(1 << 20))
    rng = trial_rng(master_seed, 1, 1)
    vals = []
    for _ in range(trials):
        if law.kappa is None:
            g = enumerated_matrix(sample_full_support_index(rng, law.d, law.kappa_height_budget), law.d)
        else:
            g = law.kappa.generators[int(rng.choice(len(law.kappa.generators), p=law.kappa.weights))]
        if g.is_identity():
            vals.append(0.0)
            continue
        prod = spectral_norm_enclosure(g, 53).upper * spectral_norm_enclosure(g.inv, 53).upper
        vals.append(float(mpmath.log(prod)) ** p_prime)
    kp = float(np.mean(vals))
    kse = float(np.std(vals, ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    w_k = 1.0 - law.mix_weight
    m_prime = float(nu.mid) + w_k * kp
    return MomentConstants(
        mode, M_enc, M_est, M_se, p_prime, nu, kp, kse, m_prime, w_k * kse, False, trials
    )


# -- index sequences ------------------------------------------------------------------


def _pow2_neg(e: int) -> mpf:
    """2^{-e} as an exact mpf, valid for astronomically large e."""
    return mpmath.ldexp(mpf(1), -e)


def _log1p_tiny(x: mpf) -> "iv.mpf":
    """Enclosure of log(1+x) for exact x >= 0 via x/(1+x) <= log(1+x) <= x."""
    X = iv.mpf(x)
    return iv.mpf([lo(X / (1 + X)), hi(X)])


def smallest_satisfying(pred: Callable[[int], bool], start: int) -> int:
    """Smallest n >= start with pred(n), for pred monotone False...True."""
    if pred(start):
        return start
    step = 1
    good = start + step
    bad = start
    while not pred(good):
        bad = good
        step *= 2
        good = start + step
    while good - bad > 1:
        mid = (good + bad) // 2
        if pred(mid):
            good = mid
        else:
            bad = mid
    return good


@dataclass
class SequenceTable:
    """Rows (j, i_j, a_j) for the transcendental-escape construction or (j, l_j, i_j) for the uncountable one."""

    variant: str  # "thm13" | "thm14"
    params: dict
    rows: list[dict]
    mode: str = "paper-faithful"
    truncated: bool = False
    warnings: list[str] = field(default_factory=list)

    def column(self, name: str) -> list[int]:
        return [r[name] for r in self.rows]

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "mode": self.mode,
            "params": {k: _num_str(v) for k, v in self.params.items()},
            "rows": [{k: _num_str(v) for k, v in r.items()} for r in self.rows],
            "truncated": self.truncated,
            "warnings": list(self.warnings),
        }


def _num_str(v) -> str:
    if isinstance(v, int):
        return int_str(v)
    if isinstance(v, Fraction):
        return int_str(v.numerator) if v.denominator == 1 else fraction_str(v)
    return str(v)


def _bits_for(*ints) -> int:
    return 96 + 2 * max(int(abs(x)).bit_length() for x in ints)


# transcendental-escape sequences


def thm13_a_condition(a: int, i: int, p: Fraction, M: Fraction, eps: Fraction) -> bool:
    """a^p >= (4M/eps + 2 i log 2) a, decided exactly (a >= 1)."""
    if a < 1:
        return False

    def diff():
        c = 4 * ival(M) / ival(eps) + 2 * i * iv.log(iv.mpf(2))
        if p.denominator == 1:
            return iv.mpf(a) ** (int(p) - 1) - c
        return (ival(p) - 1) * iv.log(iv.mpf(a)) - iv.log(c)

    return certified_sign(diff, _bits_for(a, i)) >= 0


def thm13_i_condition(i: int, a: int, p_prime: Fraction, M_prime: Fraction, eps: Fraction) -> bool:
    """2^{-i+1} 2a (1 + 2^{-i+1})^{2a} exp((4a(M'+1)/eps)^{1/p'}) <= 1, in log form."""

    def slack():
        x = _pow2_neg(i - 1)
        E = iv.exp(iv.log(4 * a * (ival(M_prime) + 1) / ival(eps)) / ival(p_prime))
        lhs = -(i - 1) * iv.log(iv.mpf(2)) + iv.log(iv.mpf(2 * a)) + 2 * a * _log1p_tiny(x) + E
        return -lhs

    return certified_sign(slack, _bits_for(a, i)) >= 0


def _closed_form_a(i: int, p: Fraction, M: Fraction, eps: Fraction) -> int:
    with mpmath.workprec(_bits_for(i) + 64):
        c = 4 * mpf(M.numerator) / M.denominator / (mpf(eps.numerator) / eps.denominator) + 2 * i * mpmath.log(2)
        return max(1, int(mpmath.ceil(c ** (1 / (mpf(p.numerator) / p.denominator - 1)))))


def _relaxed_i(a: int, p_prime: Fraction, M_prime: Fraction, eps: Fraction) -> int:
    with mpmath.workprec(_bits_for(a) + 64):
        E = (4 * a * (mpf(M_prime.numerator) / M_prime.denominator + 1) / (mpf(eps.numerator) / eps.denominator)) ** (
            1 / (mpf(p_prime.numerator) / p_prime.denominator)
        )
        return max(1, int(mpmath.floor(1 + (mpmath.log(2 * a) + E) / mpmath.log(2))) - 2)


def default_p(p_prime) -> Fraction:
    """Midpoint of the admissible range (1, 1/p') for the diagonal exponent."""
    pp = Fraction(p_prime)
    if not 0 < pp < 1:
        raise ValueError("need 0 < p' < 1")
    return (1 + 1 / pp) / 2


def thm13_sequences(
    p,
    p_prime,
    M,
    M_prime,
    eps,
    j_max: int,
    mode: str = "paper-faithful",
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
) -> SequenceTable:
    """Rows (j, i_j, a_j) for j = 1..j_max, i_1 = 1.

    a_j is the smallest integer with a^p >= (4M/eps + 2 i_j log 2) a and
    i_{j+1} >= i_j + 1 the smallest integer satisfying the dyadic-error
    inequality.  Enclosure inputs are collapsed conservatively (M, M' up,
    eps down).  ``p=None`` selects ``default_p(p_prime)``.
    """
    if p is None:
        p = default_p(_as_exact(p_prime, "down"))
    pq, ppq = _as_exact(p, "down"), _as_exact(p_prime, "down")
    Mq, Mpq, eq = _as_exact(M, "up"), _as_exact(M_prime, "up"), _as_exact(eps, "down")
    if pq <= 1 or not 0 < ppq < 1 or eq <= 0:
        raise ValueError("need p > 1, 0 < p' < 1 and eps > 0")
    params = {"p": pq, "p_prime": ppq, "M": Mq, "M_prime": Mpq, "eps": eq, "j_max": j_max}
    table = SequenceTable("thm13", params, [], mode)
    if pq * ppq >= 1:
        table.warnings.append("p * p' >= 1: the p'-moment M' of the diagonal part diverges for these parameters")
    i = 1
    for j in range(1, j_max + 1):
        a = _closed_form_a(i, pq, Mq, eq)
        while not thm13_a_condition(a, i, pq, Mq, eq):
            a += 1
        while a > 1 and thm13_a_condition(a - 1, i, pq, Mq, eq):
            a -= 1
        table.rows.append({"j": j, "i": i, "a": a})
        if j == j_max:
            break
        start = max(i + 1, _relaxed_i(a, ppq, Mpq, eq))
        if start > i + 1 and thm13_i_condition(start, a, ppq, Mpq, eq):
            start = i + 1
        nxt = smallest_satisfying(lambda k: thm13_i_condition(k, a, ppq, Mpq, eq), start)
        if decimal_digits(nxt) > digit_budget:
            table.truncated = True
            break
        i = nxt
    return table


def verify_thm13(table: SequenceTable) -> list[dict]:
    """Re-check every row: defining inequality holds, and fails (or breaks a constraint) one below."""
    P = table.params
    out = []
    for r, nxt in zip(table.rows, table.rows[1:] + [None]):
        a_ok = thm13_a_condition(r["a"], r["i"], P["p"], P["M"], P["eps"])
        a_min = r["a"] == 1 or not thm13_a_condition(r["a"] - 1, r["i"], P["p"], P["M"], P["eps"])
        check = {"j": r["j"], "a_holds": a_ok, "a_minimal": a_min}
        if nxt is not None:
            i2 = nxt["i"]
            check["i_holds"] = i2 >= r["i"] + 1 and thm13_i_condition(i2, r["a"], P["p_prime"], P["M_prime"], P["eps"])
            check["i_minimal"] = i2 - 1 < r["i"] + 1 or not thm13_i_condition(
                i2 - 1, r["a"], P["p_prime"], P["M_prime"], P["eps"]
            )
        out.append(check)
    return out


# uncountable-family sequences


def thm14_l_next(j: int, i: int, l: int, M: Fraction) -> int:
    """l_{j+1} = ceil(j (i_j log 2 + l_j log 2 + 2M))."""
    return certified_ceil(lambda: j * ((i + l) * iv.log(iv.mpf(2)) + 2 * ival(M)), _bits_for(i, l, j))


def thm14_i_condition(i: int, j: int, l_next: int, M: Fraction) -> bool:
    """2^{-i+1} j (1 + 2^{-i+1})^j 2 exp((2M + l_{j+1} log 2 + 1) j) <= 1, in log form."""

    def slack():
        x = _pow2_neg(i - 1)
        L2 = iv.log(iv.mpf(2))
        lhs = -(i - 1) * L2 + iv.log(iv.mpf(j)) + j * _log1p_tiny(x) + L2 + (2 * ival(M) + l_next * L2 + 1) * j
        return -lhs

    return certified_sign(slack, _bits_for(i, l_next, j)) >= 0


def thm14_sequences(M, j_max: int, mode: str = "paper-faithful", digit_budget: int = DEFAULT_DIGIT_BUDGET) -> SequenceTable:
    """Rows (j, l_j, i_j) with l_1 = i_1 = 1 and i_{j+1} >= max(l_j, i_j + 1) minimal."""
    Mq = _as_exact(M, "up")
    if Mq < 0:
        raise ValueError("M must be nonnegative")
    table = SequenceTable("thm14", {"M": Mq, "j_max": j_max}, [{"j": 1, "l": 1, "i": 1}], mode)
    l, i = 1, 1
    for j in range(1, j_max):
        l_next = thm14_l_next(j, i, l, Mq)
        floor_i = max(l, i + 1)
        with mpmath.workprec(_bits_for(l_next, j)):
            guess = int(1 + (mpmath.log(2 * j) + (2 * mpf(Mq.numerator) / Mq.denominator + l_next * mpmath.log(2) + 1) * j) / mpmath.log(2)) - 2
        start = max(floor_i, guess)
        if start > floor_i and thm14_i_condition(start, j, l_next, Mq):
            start = floor_i
        i_next = smallest_satisfying(lambda k: thm14_i_condition(k, j, l_next, Mq), start)
        if decimal_digits(i_next) > digit_budget:
            table.truncated = True
            break
        if l_next > i_next:
            table.warnings.append(f"l_{j + 1} > i_{j + 1}")
        l, i = l_next, i_next
        table.rows.append({"j": j + 1, "l": l, "i": i})
    return table


def verify_thm14(table: SequenceTable) -> list[dict]:
    M = table.params["M"]
    out = [{"j": 1, "base": table.rows[0]["l"] == 1 and table.rows[0]["i"] == 1}]
    for prev, r in zip(table.rows, table.rows[1:]):
        j = prev["j"]
        l_ok = r["l"] == thm14_l_next(j, prev["i"], prev["l"], M)
        floor_i = max(prev["l"], prev["i"] + 1)
        i_ok = r["i"] >= floor_i and thm14_i_condition(r["i"], j, r["l"], M)
        i_min = r["i"] - 1 < floor_i or not thm14_i_condition(r["i"] - 1, j, r["l"], M)
        out.append(
            {"j": r["j"], "l_holds": l_ok, "i_holds": i_ok, "i_minimal": i_min, "l_le_i": r["l"] <= r["i"]}
        )
    return out


def decimal_string(x) -> str:
    return decimal(x) if isinstance(x, mpf) else str(x)
