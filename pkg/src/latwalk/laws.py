"""Samplers for the scalar record laws and the matrix-valued step laws.

Per-trial generators are derived as
``PCG64(SeedSequence([master_seed, trial_index, stream]))``; every draw of a
law goes through one such generator in a fixed order, so a seed determines
the whole stream.

Step coupling (one uniform ``u`` per step): ``u < mix_weight`` selects the
diagonal core, whose scalar seed is ``t = end - (end - t_min) * u / mix_weight``.
With ``mix_weight = end = 1/2`` this is the construction ``u <= 1/2 -> diag``
with seed ``1/2 - u`` (same law as seed ``u``); with ``mix_weight = 1`` it is
the pure scalar law drawn from the same uniforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np
from mpmath import iv, mpf

from .intervals import hi, ival, lo, mpf_to_fraction, working_precision
from .ratmat import (
    DEFAULT_BUDGET_BITS,
    RationalMatrix,
    height_profile,
    mul,
)

LOG2 = math.log(2.0)
LOGLOG2 = math.log(LOG2)
EXACT_EXPONENT_BITS = 4096

HEAVY_RECORD_EXP = "heavy_record_exp"
POWER_FLOOR = "power_floor"
POWER_REAL = "power_real"
SIMPLE_RECORD_CUBE = "simple_record_cube"
BOUNDED_TABLE = "bounded_table"
SCALAR_KINDS = (HEAVY_RECORD_EXP, POWER_FLOOR, POWER_REAL, SIMPLE_RECORD_CUBE, BOUNDED_TABLE)


class LawError(ValueError):
    pass


def trial_rng(master_seed: int, trial_index: int = 0, stream: int = 0) -> np.random.Generator:
    """The documented seed-splitting function."""
    if not 0 <= master_seed < 1 << 64:
        raise LawError("seeds are 64-bit unsigned integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, trial_index, stream])))


# -- scalar laws ---------------------------------------------------------------


@dataclass(frozen=True)
class ScalarLawSpec:
    kind: str
    p: float | None = None
    domain_end: Fraction = Fraction(1)
    t_min: float = 0.0
    values: tuple[tuple[float, float], ...] = ()  # (value, weight) for bounded_table

    def __post_init__(self) -> None:
        object.__setattr__(self, "domain_end", Fraction(self.domain_end))
        if self.kind not in SCALAR_KINDS:
            raise LawError(f"unknown scalar law kind {self.kind!r}")
        if self.kind in (POWER_FLOOR, POWER_REAL) and (self.p is None or self.p <= 1):
            raise LawError("power laws need p > 1")
        if self.domain_end not in (Fraction(1), Fraction(1, 2)):
            raise LawError("domain_end must be 1 or 1/2")
        if not 0 <= self.t_min < self.domain_end:
            raise LawError("t_min must lie in [0, domain_end)")
        if self.kind == BOUNDED_TABLE:
            if not self.values or any(v < 0 or w < 0 for v, w in self.values):
                raise LawError("bounded table needs nonnegative values and weights")
            if not math.isclose(sum(w for _, w in self.values), 1.0, rel_tol=1e-12):
                raise LawError("bounded table weights must sum to 1")

    @property
    def end(self) -> float:
        return float(self.domain_end)

    def truncated(self, t_min: float) -> "ScalarLawSpec":
        return replace(self, t_min=t_min)

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind, "domain_end": str(self.domain_end), "t_min": self.t_min}
        if self.p is not None:
            out["p"] = self.p
        if self.values:
            out["values"] = [list(v) for v in self.values]
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ScalarLawSpec":
        return cls(
            kind=obj["kind"],
            p=obj.get("p"),
            domain_end=Fraction(obj.get("domain_end", "1")),
            t_min=float(obj.get("t_min", 0.0)),
            values=tuple(tuple(v) for v in obj.get("values", ())),
        )


def heavy_record_exp(t_min: float = 0.0) -> ScalarLawSpec:
    return ScalarLawSpec(HEAVY_RECORD_EXP, t_min=t_min)


def power_law(p: float, floor: bool = False, domain_end=Fraction(1), t_min: float = 0.0) -> ScalarLawSpec:
    return ScalarLawSpec(POWER_FLOOR if floor else POWER_REAL, p=p, domain_end=Fraction(domain_end), t_min=t_min)


def simple_record_cube(t_min: float = 0.0) -> ScalarLawSpec:
    return ScalarLawSpec(SIMPLE_RECORD_CUBE, t_min=t_min)


def exp_cap_t_min(max_exponent: int) -> float:
    """Smallest seed t with floor(exp(t^-2)) <= max_exponent (heavy-record truncation)."""
    t = 1.0 / math.sqrt(math.log(max_exponent + 1))
    return math.nextafter(t, 1.0)


def cube_cap_t_min(max_value: int) -> float:
    """Smallest seed u with floor(u^-3) <= max_value."""
    return math.nextafter((max_value + 1) ** (-1.0 / 3.0), 1.0)


def seeds_from_uniform(law: ScalarLawSpec, v: np.ndarray) -> np.ndarray:
    """Map v in [0,1) to the seed t = end - (end - t_min) v in (t_min, end].

    With t_min = 0 this is exact in binary floating point and never 0.
    """
    t = law.end - (law.end - law.t_min) * np.asarray(v, dtype=np.float64)
    return np.maximum(t, law.t_min) if law.t_min > 0 else t


def draw_seeds(law: ScalarLawSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    return seeds_from_uniform(law, rng.random(size))


def log_values(law: ScalarLawSpec, t: np.ndarray) -> np.ndarray:
    """Natural log of the sampled values (float64), floors applied where the law has one."""
    t = np.asarray(t, dtype=np.float64)
    if law.kind == HEAVY_RECORD_EXP:
        return t**-2.0
    if law.kind == POWER_REAL:
        return -law.p * np.log(t)
    if law.kind in (POWER_FLOOR, SIMPLE_RECORD_CUBE):
        p = 3.0 if law.kind == SIMPLE_RECORD_CUBE else law.p
        x = -p * np.log(t)
        small = x < 50.0
        floored = np.floor(np.exp(np.where(small, x, 0.0)))
        return np.where(small, np.log(np.maximum(floored, 1.0)), x)
    raise LawError(f"log_values undefined for {law.kind}")


@dataclass(frozen=True)
class LogDomainValue:
    """A positive value stored through its natural log.

    ``exact`` holds the integer value when it is an integer small enough to
    materialise; ``deferred_floor`` marks floor laws whose integer was not
    materialised (then ``log_value`` is the log of the unfloored value, which
    exceeds the log of the floor by at most log 2).
    """

    log_value: mpf
    exact: int | None = None
    deferred_floor: bool = False


def floor_exp_exact(x: Fraction) -> int:
    """floor(exp(x)) exactly, by increasing interval precision."""
    bits = 64 + int(float(x) / LOG2) + 8
    while True:
        with working_precision(bits):
            e = iv.exp(ival(x))
            a, b = int(mpmath_floor(lo(e))), int(mpmath_floor(hi(e)))
        if a == b:
            return a
        bits *= 2


def floor_pow_exact(t: Fraction, p) -> int:
    """floor(t^-p) exactly for a rational seed t and a binary-float or integer exponent p."""
    if float(p).is_integer():
        k = int(p)
        return (t.denominator**k) // (t.numerator**k)
    bits = 64 + int(-float(p) * math.log2(float(t))) + 8
    while True:
        with working_precision(bits):
            e = iv.exp(-ival(float(p)) * iv.log(ival(t)))
            a, b = int(mpmath_floor(lo(e))), int(mpmath_floor(hi(e)))
        if a == b:
            return a
        bits *= 2


def mpmath_floor(x: mpf) -> int:
    import mpmath

    return int(mpmath.floor(x))


def sample_scalar(
    law: ScalarLawSpec,
    rng: np.random.Generator | None,
    budget_bits: int = EXACT_EXPONENT_BITS,
    seed: float | Fraction | str | None = None,
) -> LogDomainValue:
    """One draw of the scalar law in log domain (``seed`` overrides the uniform seed t)."""
    if law.kind == BOUNDED_TABLE:
        u = rng.random() if seed is None else float(seed)
        acc = 0.0
        for value, weight in law.values:
            acc += weight
            if u < acc:
                break
        import mpmath

        return LogDomainValue(mpmath.log(mpf(value)), exact=int(value) if float(value).is_integer() else None)
    # float seeds are dyadic and converted exactly; Fraction/str seeds stay exact
    tq = Fraction(float(draw_seeds(law, rng, 1)[0])) if seed is None else Fraction(seed)
    if not 0 < tq <= law.domain_end:
        raise LawError("seed outside (0, domain_end]")
    import mpmath

    with mpmath.workprec(96):
        log_t = mpmath.log(mpf(tq.numerator)) - mpmath.log(mpf(tq.denominator))
        if law.kind == HEAVY_RECORD_EXP:
            return LogDomainValue(mpf(tq.denominator) ** 2 / mpf(tq.numerator) ** 2)
        if law.kind == POWER_REAL:
            return LogDomainValue(-mpf(law.p) * log_t)
        p = 3.0 if law.kind == SIMPLE_RECORD_CUBE else law.p
        log_raw = -mpf(p) * log_t
        if float(log_raw) / LOG2 <= budget_bits:
            value = floor_pow_exact(tq, p)
            return LogDomainValue(mpmath.log(mpf(value)), exact=value)
        return LogDomainValue(log_raw, exact=None, deferred_floor=True)


def simple_record_pmf(l: int, bits: int = 64) -> mpf:
    """l^(-1/3) - (l+1)^(-1/3), the mass at l >= 1 of floor(u^-3)."""
    if l < 1:
        raise LawError("the simple-record law lives on l >= 1")
    import mpmath

    with mpmath.workprec(bits + 32):
        third = mpf(1) / 3
        return +(mpf(l) ** -third - mpf(l + 1) ** -third)


def power_floor_pmf(l: int, p: float, bits: int = 64) -> mpf:
    """P(floor(t^-p) = l) for t uniform on (0, 1]."""
    import mpmath

    with mpmath.workprec(bits + 32):
        return +(mpf(l) ** (-1 / mpf(p)) - mpf(l + 1) ** (-1 / mpf(p)))


# -- dyadic addresses ----------------------------------------------------------


@dataclass(frozen=True)
class DyadicAddress:
    """t = sum_k bits[k] 2^-indices[k]."""

    indices: tuple[int, ...]
    bits: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if any(i < 1 for i in idx) or any(b <= a for a, b in zip(idx, idx[1:])):
            raise LawError("address indices must be strictly increasing positive integers")
        if any(b not in (0, 1) for b in self.bits):
            raise LawError("address bits must be 0/1")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "bits", tuple(int(b) for b in self.bits))

    def value(self, depth: int | None = None) -> Fraction:
        depth = len(self.bits) if depth is None else min(depth, len(self.bits))
        return sum((Fraction(1, 1 << self.indices[k]) for k in range(depth) if self.bits[k]), Fraction(0))

    def truncation_bound(self, depth: int) -> Fraction:
        """Upper bound 2^(1 - i_{depth+1}) on |value(inf) - value(depth)|."""
        if depth >= len(self.indices):
            raise LawError("need index i_{depth+1} to bound the truncation error")
        return Fraction(2, 1 << self.indices[depth])


def address_value(indices: Sequence[int], bits: Sequence[int], depth: int) -> Fraction:
    return sum((Fraction(1, 1 << indices[k]) for k in range(min(depth, len(bits))) if bits[k]), Fraction(0))


# -- the full-support law on SL_d(Q) -----------------------------------------


def _unpair(z: int) -> tuple[int, int]:
    w = (math.isqrt(8 * z + 1) - 1) // 2
    y = z - w * (w + 1) // 2
    return w - y, y


def _fusc(n: int) -> int:
    a, b = 1, 0
    while n:
        if n & 1:
            b += a
        else:
            a += b
        n >>= 1
    return b


def calkin_wilf(n: int) -> Fraction:
    """n-th positive rational (n >= 1) of the Calkin-Wilf enumeration."""
    return Fraction(_fusc(n), _fusc(n + 1))


def enumerated_word(k: int, d: int) -> list[tuple[int, int, Fraction]]:
    """Letters (i, j, r) of the k-th word; k = 0 is the empty word.

    k - 1 = pair(L - 1, rest) and ``rest`` is split into L letter codes by
    repeated Cantor unpairing; a letter code a gives the ordered pair
    a mod d(d-1) and the rational +-CalkinWilf(a // d(d-1) // 2 + 1).
    """
    if k == 0:
        return []
    pairs = [(i, j) for i in range(d) for j in range(d) if i != j]
    length_minus_one, rest = _unpair(k - 1)
    codes = []
    for _ in range(length_minus_one):
        a, rest = _unpair(rest)
        codes.append(a)
    codes.append(rest)
    letters = []
    for a in codes:
        i, j = pairs[a % len(pairs)]
        r_index = a // len(pairs)
        r = calkin_wilf(r_index // 2 + 1)
        letters.append((i, j, r if r_index % 2 == 0 else -r))
    return letters


@lru_cache(maxsize=65536)
def enumerated_matrix(k: int, d: int) -> RationalMatrix:
    """f(k): a fixed surjection from N onto SL_d(Q) with f(0) = I."""
    out = RationalMatrix.identity(d)
    for i, j, r in enumerated_word(k, d):
        out = mul(out, RationalMatrix.elementary(i, j, r, d))
    return out


@lru_cache(maxsize=65536)
def enumerated_height_upper(k: int, d: int) -> float:
    m = enumerated_matrix(k, d)
    if m.is_identity():
        return 0.0
    return float(height_profile(m, 53).height.upper)


def sample_full_support_index(
    rng: np.random.Generator, d: int, height_budget: float | None = None, max_trials: int = 100000
) -> int:
    """Index k of a draw from kappa_0, where kappa_0{f(k)} is proportional to 2^-k / (1 + H(f(k)))."""
    for _ in range(max_trials):
        k = int(rng.geometric(0.5)) - 1
        h = enumerated_height_upper(k, d)
        if rng.random() * (1.0 + h) < 1.0 and (height_budget is None or h <= height_budget):
            return k
    raise LawError(f"no acceptance within {max_trials} trials (height budget too small?)")


def sample_full_support_rational(
    rng: np.random.Generator, height_budget: float | None = None, d: int = 2, max_trials: int = 100000
) -> RationalMatrix:
    return enumerated_matrix(sample_full_support_index(rng, d, height_budget, max_trials), d)


# -- matrix laws -------------------------------------------------------------------


@dataclass(frozen=True)
class KappaTable:
    generators: tuple[RationalMatrix, ...]
    weights: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.generators or len(self.generators) != len(self.weights):
            raise LawError("kappa table needs one weight per generator")
        if not math.isclose(sum(self.weights), 1.0, rel_tol=1e-12):
            raise LawError("kappa weights must sum to 1")
        if any(g.det != 1 for g in self.generators):
            raise LawError("kappa generators must be unimodular")

    @property
    def d(self) -> int:
        return self.generators[0].dim

    def heights(self, precision_bits: int = 64):
        return tuple(height_profile(g, precision_bits) for g in self.generators)

    def to_json(self) -> dict:
        return {"generators": [g.to_json_obj() for g in self.generators], "weights": list(self.weights)}

    @classmethod
    def from_json(cls, obj: dict) -> "KappaTable":
        return cls(
            tuple(RationalMatrix.from_json(g, unimodular=True) for g in obj["generators"]),
            tuple(float(w) for w in obj["weights"]),
        )


def signed_cycle(d: int) -> RationalMatrix:
    """Cyclic permutation e_i -> e_{i+1}, with the sign making det = 1."""
    rows = [[0] * d for _ in range(d)]
    for i in range(d - 1):
        rows[i + 1][i] = 1
    rows[0][d - 1] = (-1) ** (d - 1)
    return RationalMatrix(rows, unimodular=True)


def default_kappa(d: int) -> KappaTable:
    """Uniform on {A, A^-1, B, B^-1}, A = I + E_12, B the signed cycle."""
    a = RationalMatrix.shear(1, d)
    b = signed_cycle(d)
    return KappaTable((a, a.inv, b, b.inv), (0.25, 0.25, 0.25, 0.25))


@dataclass(frozen=True)
class MatrixLawSpec:
    """Step law: ``(N_t core)^s`` with core diag(2^m, 2^-m, 1..) w.p. mix_weight, else from kappa.

    ``kappa=None`` selects the full-support law kappa_0.  ``exponent_table``
    maps a driving integer j >= 1 to the exponent l_j.  ``level`` is the
    number of address digits used for the shear; addresses carry bits up to
    ``len(shear_indices)`` so finer truncations share the same draws.
    """

    d: int
    scalar: ScalarLawSpec
    mix_weight: float = 0.5
    kappa: KappaTable | None = None
    shear_indices: tuple[int, ...] = ()
    level: int = 0
    symmetrize: bool = False
    exponent_table: tuple[int, ...] | None = None
    kappa_height_budget: float | None = None

    def __post_init__(self) -> None:
        if self.d < 2:
            raise LawError("d >= 2 required")
        if not 0.0 <= self.mix_weight <= 1.0:
            raise LawError("mix_weight must lie in [0, 1]")
        if self.kappa is not None and self.kappa.d != self.d:
            raise LawError("kappa dimension mismatch")
        DyadicAddress(tuple(self.shear_indices))
        if not 0 <= self.level <= len(self.shear_indices):
            raise LawError("level exceeds the number of shear indices")

    @property
    def depth(self) -> int:
        return len(self.shear_indices)

    def at_level(self, level: int) -> "MatrixLawSpec":
        return replace(self, level=level)

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "scalar": self.scalar.to_json(),
            "mix_weight": self.mix_weight,
            "kappa": None if self.kappa is None else self.kappa.to_json(),
            "shear_indices": list(self.shear_indices),
            "level": self.level,
            "symmetrize": self.symmetrize,
            "exponent_table": None if self.exponent_table is None else [str(x) for x in self.exponent_table],
            "kappa_height_budget": self.kappa_height_budget,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MatrixLawSpec":
        table = obj.get("exponent_table")
        return cls(
            d=int(obj["d"]),
            scalar=ScalarLawSpec.from_json(obj["scalar"]),
            mix_weight=float(obj.get("mix_weight", 0.5)),
            kappa=None if obj.get("kappa") is None else KappaTable.from_json(obj["kappa"]),
            shear_indices=tuple(obj.get("shear_indices", ())),
            level=int(obj.get("level", 0)),
            symmetrize=bool(obj.get("symmetrize", False)),
            exponent_table=None if table is None else tuple(int(x) for x in table),
            kappa_height_budget=obj.get("kappa_height_budget"),
        )


def theorem11_law(d: int = 2, max_exponent: int | None = None) -> MatrixLawSpec:
    """mu = (kappa + nu)/2 with nu the image of floor(exp(t^-2)) under diag(2^n, 2^-n, ...)."""
    t_min = 0.0 if max_exponent is None else exp_cap_t_min(max_exponent)
    return MatrixLawSpec(d=d, scalar=heavy_record_exp(t_min), mix_weight=0.5, kappa=default_kappa(d))


# -- step descriptors -------------------------------------------------------------


@dataclass(frozen=True)
class Generator:
    index: int


@dataclass(frozen=True)
class FullSupport:
    k: int


@dataclass(frozen=True)
class DiagExponent:
    """Exponent m of diag(2^m, 2^-m, 1, ...); ``m`` is None when too large to materialise."""

    m: int | None
    log_m: float
    driving: int | None = None


Core = Generator | FullSupport | DiagExponent


@dataclass(frozen=True)
class StepDescriptor:
    sign: int
    shear_t: Fraction
    core: Core
    seeds: dict = field(default_factory=dict, compare=False, hash=False)


@dataclass
class StepBatch:
    """Column-oriented block of n step draws (used directly by the ledger engine)."""

    law: MatrixLawSpec
    u: np.ndarray
    is_diag: np.ndarray
    sign: np.ndarray
    kappa_index: np.ndarray
    seed_t: np.ndarray
    log_m: np.ndarray
    exact_m: list
    driving: np.ndarray
    bits: np.ndarray

    def __len__(self) -> int:
        return len(self.u)

    def shear(self, k: int, level: int | None = None) -> Fraction:
        level = self.law.level if level is None else level
        return address_value(self.law.shear_indices, self.bits[k], level)

    def shear_log2_den(self, level: int | None = None) -> np.ndarray:
        """Exponent i with shear denominator 2^i (0 when the shear vanishes)."""
        level = self.law.level if level is None else level
        idx = np.asarray(self.law.shear_indices[:level], dtype=np.int64)
        if level == 0:
            return np.zeros(len(self), dtype=np.int64)
        b = self.bits[:, :level].astype(bool)
        # finest set bit fixes the denominator
        masked = np.where(b, idx[None, :], 0)
        return masked.max(axis=1)

    def descriptor(self, k: int, level: int | None = None) -> StepDescriptor:
        if self.is_diag[k]:
            m = self.exact_m[k]
            d = int(self.driving[k]) if self.driving[k] >= 0 else None
            core: Core = DiagExponent(m, float(self.log_m[k]), d)
        elif self.law.kappa is None:
            core = FullSupport(int(self.kappa_index[k]))
        else:
            core = Generator(int(self.kappa_index[k]))
        seeds = {"u": float(self.u[k]), "sign_bit": int(self.sign[k] < 0), "bits": tuple(int(b) for b in self.bits[k])}
        return StepDescriptor(int(self.sign[k]), self.shear(k, level), core, seeds)

    def descriptors(self, level: int | None = None) -> Iterator[StepDescriptor]:
        for k in range(len(self)):
            yield self.descriptor(k, level)


def _diag_exponents(law: MatrixLawSpec, t: np.ndarray, exact_bits: int):
    """(log m, exact m or None, driving integer or -1) for each diagonal seed."""
    s = law.scalar
    n = len(t)
    exact: list = [None] * n
    driving = np.full(n, -1, dtype=np.int64)
    if s.kind == HEAVY_RECORD_EXP:
        x = t**-2.0
        log_m = np.where(x < 50.0, np.log(np.floor(np.exp(np.minimum(x, 50.0)))), x)
        for k in np.flatnonzero(x / LOG2 <= exact_bits):
            tq = Fraction(float(t[k]))
            exact[k] = floor_exp_exact(Fraction(tq.denominator**2, tq.numerator**2))
        return log_m, exact, driving
    if s.kind in (POWER_FLOOR, POWER_REAL, SIMPLE_RECORD_CUBE):
        p = 3.0 if s.kind == SIMPLE_RECORD_CUBE else s.p
        log_m = log_values(replace(s, kind=POWER_FLOOR, p=p), t)
        for k in np.flatnonzero(log_m / LOG2 <= exact_bits):
            exact[k] = floor_pow_exact(Fraction(float(t[k])), p)
        if law.exponent_table is not None:
            table = law.exponent_table
            for k in range(n):
                j = exact[k]
                if j is None or j > len(table):
                    raise LawError(f"driving integer {j} beyond the exponent table (truncate the law)")
                driving[k] = j
                exact[k] = table[j - 1]
            log_m = np.array([math.log(m) if m > 0 else -math.inf for m in exact], dtype=np.float64)
        return log_m, exact, driving
    if s.kind == BOUNDED_TABLE:
        values = np.array([v for v, _ in s.values])
        cum = np.cumsum([w for _, w in s.values])
        which = np.minimum(np.searchsorted(cum, t / s.end, side="right"), len(values) - 1)
        m = np.floor(values[which])
        exact = [int(v) for v in m]
        log_m = np.where(m > 0, np.log(np.maximum(m, 1.0)), -np.inf)
        return log_m, exact, driving
    raise LawError(s.kind)


def sample_steps(
    law: MatrixLawSpec, n: int, rng: np.random.Generator, exact_bits: int = EXACT_EXPONENT_BITS
) -> StepBatch:
    """Draw n steps.  Order of draws: u[n], sign bits[n], kappa uniforms[n], address bits[n, depth],
    then (full-support kappa only) sequential rejection draws."""
    u = rng.random(n)
    sign_bits = rng.integers(0, 2, size=n)
    kappa_u = rng.random(n)
    bits = rng.integers(0, 2, size=(n, law.depth), dtype=np.uint8)
    alpha = law.mix_weight
    is_diag = u < alpha
    sign = np.where(sign_bits == 1, -1, 1) if law.symmetrize else np.ones(n, dtype=np.int64)
    seed_t = np.full(n, np.nan)
    log_m = np.full(n, np.nan)
    exact_m: list = [None] * n
    driving = np.full(n, -1, dtype=np.int64)
    diag_idx = np.flatnonzero(is_diag)
    if diag_idx.size:
        v = u[diag_idx] / alpha
        t = seeds_from_uniform(law.scalar, v)
        lm, ex, dr = _diag_exponents(law, t, exact_bits)
        seed_t[diag_idx] = t
        log_m[diag_idx] = lm
        driving[diag_idx] = dr
        for pos, k in enumerate(diag_idx):
            exact_m[k] = ex[pos]
    kappa_index = np.full(n, -1, dtype=np.int64)
    other = np.flatnonzero(~is_diag)
    if other.size:
        if law.kappa is not None:
            cum = np.cumsum(law.kappa.weights)
            cum[-1] = 1.0
            kappa_index[other] = np.searchsorted(cum, kappa_u[other], side="right")
        else:
            for k in other:
                kappa_index[k] = sample_full_support_index(rng, law.d, law.kappa_height_budget)
    return StepBatch(law, u, is_diag, sign, kappa_index, seed_t, log_m, exact_m, driving, bits)


def sample_step(law: MatrixLawSpec, rng: np.random.Generator) -> StepDescriptor:
    return sample_steps(law, 1, rng).descriptor(0)


def core_matrix(core: Core, law: MatrixLawSpec, budget_bits: int = DEFAULT_BUDGET_BITS) -> RationalMatrix:
    if isinstance(core, DiagExponent):
        if core.m is None:
            raise LawError("diagonal exponent was not materialised (ledger mode only)")
        return RationalMatrix.dyadic_diag(core.m, law.d, budget_bits)
    if isinstance(core, FullSupport):
        return enumerated_matrix(core.k, law.d)
    if law.kappa is None:
        raise LawError("generator core without a kappa table")
    return law.kappa.generators[core.index]


def realize_step_matrix(
    step: StepDescriptor, law: MatrixLawSpec, budget_bits: int = DEFAULT_BUDGET_BITS
) -> RationalMatrix:
    """(N_t core)^sign."""
    core = core_matrix(step.core, law, budget_bits)
    g = mul(RationalMatrix.shear(step.shear_t, law.d), core, budget_bits) if step.shear_t else core
    return g.power(step.sign)
