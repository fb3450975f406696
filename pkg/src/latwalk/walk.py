"""Random walks on unimodular lattices: an exact engine and a log-domain ledger engine.

The exact engine multiplies realised step matrices and computes the systole
after every step, for both product orders.  The ledger engine never builds
a matrix: it tracks upper bounds for the heights of the factors of every
step and evaluates the domination certificate

    -log delta(g . Z^d) >= H(D) - sum of the heights of all other factors,

where D = diag(2^m, 2^-m, 1, ...) is a diagonal core of maximal exponent.
Each step (N_t C)^s contributes the factors N_t and C (inverted if s = -1);
H(N_t) = i log 2 exactly when t has denominator 2^i >= 2.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np
from mpmath import iv, mpf

from .intervals import Enclosure, decimal, hi, ival, lo, working_precision
from .lattice import LatticeBasis, SystoleResult, systole_sq
from .laws import (
    LOG2,
    LOGLOG2,
    DiagExponent,
    FullSupport,
    Generator,
    MatrixLawSpec,
    StepBatch,
    StepDescriptor,
    enumerated_height_upper,
    enumerated_matrix,
    realize_step_matrix,
    sample_steps,
)
from .ratmat import (
    BudgetExceeded,
    RationalMatrix,
    height_profile,
    mul,
    spectral_norm_enclosure,
)

WALK_BUDGET_BITS = 1 << 22
CHUNK = 1 << 16
# relative safety margin for float64 log-domain quantities
LOG_MARGIN = 1e-12

SYSTOLE_LOWER = "SystoleLower"
PERTURB_RATIO = "PerturbRatio"
RECORD_ESCAPE = "RecordEscape"


@dataclass(frozen=True)
class Certificate:
    """A sound lower bound ``value`` on -log(delta) (or an upper bound on a ratio for PerturbRatio)."""

    kind: str
    value: mpf | None
    valid_at: int
    detail: dict = field(default_factory=dict, compare=False)

    @property
    def defined(self) -> bool:
        return self.value is not None

    @classmethod
    def none(cls, kind: str, step: int) -> "Certificate":
        return cls(kind, None, step, {"status": "no-certificate"})

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "value": "no-certificate" if self.value is None else decimal(self.value, 20),
            "valid_at": self.valid_at,
        }


# -- factor heights -------------------------------------------------------------


def shear_denominator_exponent(t: Fraction) -> int:
    """i with denominator(t) = 2^i."""
    den = t.denominator
    if den & (den - 1):
        raise ValueError("shear parameter must be dyadic")
    return den.bit_length() - 1


def shear_height(t: Fraction, precision_bits: int = 64) -> Enclosure:
    """H(N_t) for dyadic t in [0,1): exactly i log 2 when t = k/2^i, i >= 1."""
    if t == 0:
        return Enclosure(mpf(0), mpf(0))
    if abs(t) >= 1:
        return height_profile(RationalMatrix.shear(t, 2), precision_bits).height
    i = shear_denominator_exponent(t)
    with working_precision(precision_bits):
        return Enclosure.from_iv(i * iv.log(iv.mpf(2)))


_HEIGHT_CACHE: dict = {}


def matrix_height(g: RationalMatrix, precision_bits: int = 64) -> Enclosure:
    key = (g.rows, precision_bits)
    h = _HEIGHT_CACHE.get(key)
    if h is None:
        h = height_profile(g, precision_bits).height if not g.is_identity() else Enclosure(mpf(0), mpf(0))
        if len(_HEIGHT_CACHE) < 100_000:
            _HEIGHT_CACHE[key] = h
    return h


def core_height(core, law: MatrixLawSpec, precision_bits: int = 64) -> Enclosure:
    if isinstance(core, DiagExponent):
        if core.m is None:
            raise ValueError("exact height needs a materialised exponent")
        with working_precision(precision_bits):
            return Enclosure.from_iv(core.m * iv.log(iv.mpf(2)))
    if isinstance(core, FullSupport):
        return matrix_height(enumerated_matrix(core.k, law.d), precision_bits)
    return matrix_height(law.kappa.generators[core.index], precision_bits)


def certificate_from_factors(
    diag_exponents: Sequence[int], other_uppers: Iterable[mpf], step: int, precision_bits: int = 64
) -> Certificate:
    """max(m) log 2 - (sum of the other diagonal heights) - sum(other_uppers), rounded down."""
    if not diag_exponents:
        return Certificate.none(SYSTOLE_LOWER, step)
    m_max = max(diag_exponents)
    rest = sum(diag_exponents) - m_max
    with working_precision(precision_bits):
        L2 = iv.log(iv.mpf(2))
        total = (m_max - rest) * L2
        for u in other_uppers:
            total -= iv.mpf(u)
        return Certificate(SYSTOLE_LOWER, lo(total), step, {"m_max": m_max})


# -- exact engine ------------------------------------------------------------------


@dataclass
class WalkTrace:
    law: MatrixLawSpec
    steps: list[StepDescriptor]
    base: LatticeBasis
    matrices: list[RationalMatrix]
    systoles: list[SystoleResult]
    certificates: list[Certificate]
    left_products: list[RationalMatrix] | None = None
    right_products: list[RationalMatrix] | None = None
    systoles_right: list[SystoleResult] | None = None
    heights_upper: list[mpf] = field(default_factory=list)
    level: int = 0
    budget_exceeded: bool = False

    def __len__(self) -> int:
        return len(self.systoles)

    def neg_log_deltas(self, bits: int = 64) -> list[Enclosure]:
        return [s.neg_log_delta_enclosure(bits) for s in self.systoles]

    def certificate_violations(self) -> list[int]:
        """Steps where exact -log(delta) lies strictly below the certificate (either order)."""
        bad = []
        for k, c in enumerate(self.certificates):
            if not c.defined:
                continue
            for res in [self.systoles[k]] + ([self.systoles_right[k]] if self.systoles_right else []):
                if res.neg_log_delta_enclosure(128).upper < c.value:
                    bad.append(k)
                    break
        return bad


def run_exact_walk(
    law: MatrixLawSpec,
    n: int,
    base: LatticeBasis | None = None,
    rng: np.random.Generator | None = None,
    steps: StepBatch | Sequence[StepDescriptor] | None = None,
    level: int | None = None,
    both_orders: bool = True,
    keep_products: bool = True,
    budget_bits: int = WALK_BUDGET_BITS,
    precision_bits: int = 64,
) -> WalkTrace:
    """Exact walk g_n = gamma_1 ... gamma_n . base, with systoles and certificates at every step.

    Steps come from ``steps`` when given (a StepBatch is read at ``level``),
    otherwise they are drawn from ``rng``.  A budget overflow stops the walk
    and returns the partial trace flagged ``budget_exceeded``.
    """
    base = base or LatticeBasis.standard(law.d)
    if steps is None:
        if rng is None:
            raise ValueError("need rng or steps")
        steps = sample_steps(law, n, rng)
    if isinstance(steps, StepBatch):
        descs = [steps.descriptor(k, level) for k in range(min(n, len(steps)))]
        level = steps.law.level if level is None else level
    else:
        descs = list(steps)[:n]
        level = law.level if level is None else level
    trace = WalkTrace(law, [], base, [], [], [], [] if keep_products else None, [] if both_orders and keep_products else None,
                      [] if both_orders else None, level=level)
    base_h = matrix_height(base.basis, precision_bits)
    others: list[mpf] = [base_h.upper] if base_h.upper > 0 else []
    diag_ms: list[int] = []
    left = RationalMatrix.identity(law.d)  # gamma_1 ... gamma_k
    right = RationalMatrix.identity(law.d)  # gamma_k ... gamma_1
    try:
        for k, s in enumerate(descs):
            g = realize_step_matrix(s, law, budget_bits)
            left = mul(left, g, budget_bits)
            trace.systoles.append(systole_sq(LatticeBasis(mul(left, base.basis, budget_bits)), budget_bits))
            if both_orders:
                right = mul(g, right, budget_bits)
                trace.systoles_right.append(systole_sq(LatticeBasis(mul(right, base.basis, budget_bits)), budget_bits))
            if keep_products:
                trace.left_products.append(left)
                if both_orders:
                    trace.right_products.append(right)
            trace.steps.append(s)
            trace.matrices.append(g)
            h_shear = shear_height(s.shear_t, precision_bits).upper if s.shear_t else mpf(0)
            if s.shear_t:
                others.append(h_shear)
            h_core = core_height(s.core, law, precision_bits)
            if isinstance(s.core, DiagExponent):
                diag_ms.append(s.core.m)
            elif h_core.upper > 0:
                others.append(h_core.upper)
            trace.heights_upper.append(h_core.upper + h_shear)
            trace.certificates.append(certificate_from_factors(diag_ms, others, k + 1, precision_bits))
    except BudgetExceeded:
        trace.budget_exceeded = True
    return trace


def systole_certificate(trace) -> Certificate:
    """Certificate at the last step of a WalkTrace or LedgerTrace."""
    if isinstance(trace, WalkTrace):
        if not trace.certificates:
            return Certificate.none(SYSTOLE_LOWER, 0)
        return trace.certificates[-1]
    return trace.final_certificate()


# -- ledger engine -------------------------------------------------------------------


def _lo(v: float) -> float:
    return v - LOG_MARGIN * (abs(v) + 1.0)


def _hi(v: float) -> float:
    return v + LOG_MARGIN * (abs(v) + 1.0)


@dataclass
class LedgerTrace:
    """Log-domain height ledger of a walk from Z^d.

    ``log_core`` holds log H of each core (exact up to float rounding for
    diagonal cores, an upper bound otherwise), ``log_shear`` log H of each
    shear factor (-inf when absent).  ``running_max``/``running_rest`` are
    log of the largest diagonal height so far and log of the sum of all
    other factor heights.
    """

    law: MatrixLawSpec
    diag_flags: np.ndarray
    log_core: np.ndarray
    log_shear: np.ndarray
    running_max: np.ndarray
    running_rest: np.ndarray
    exact_bits_materialized: int = 0

    @property
    def n(self) -> int:
        return len(self.diag_flags)

    @property
    def heights_upper(self) -> np.ndarray:
        """log of an upper bound on H(step) via subadditivity H(N_t C) <= H(N_t) + H(C)."""
        return np.logaddexp(_hi_arr(self.log_core), _hi_arr(self.log_shear))

    @property
    def running_sum(self) -> np.ndarray:
        return np.logaddexp(self.running_max, self.running_rest)

    def certificate_at(self, k: int) -> Certificate:
        """2 m - s at step k+1 as a sound lower bound (mpf, may be huge)."""
        m, r = self.running_max[k], self.running_rest[k]
        if not np.isfinite(m):
            return Certificate.none(SYSTOLE_LOWER, k + 1)
        return Certificate(SYSTOLE_LOWER, _exp_diff(m, r), k + 1)

    def certificate_series(self) -> np.ndarray:
        """float64 series of the certificate (inf where it overflows, nan where undefined)."""
        m, r = self.running_max, self.running_rest
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.where(np.isfinite(m), np.exp(m) - np.exp(r), np.nan)
            big = np.isfinite(m) & (m > 700)
            out = np.where(big & (r < m - 1e-3), np.inf, out)
        return out

    def final_certificate(self) -> Certificate:
        return order_free_certificate(self.diag_flags, self.log_core, self.log_shear, self.n)


def _hi_arr(a: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(a), a + LOG_MARGIN * (np.abs(a) + 1.0), a)


def _exp_diff(log_a: float, log_b: float) -> mpf:
    """Lower bound on exp(log_a) - exp(log_b) for float logs, in mpf (no overflow)."""
    with working_precision(80):
        a = iv.exp(iv.mpf(log_a))
        b = iv.exp(iv.mpf(log_b)) if np.isfinite(log_b) else iv.mpf(0)
        return lo(a - b)


def order_free_certificate(diag_flags, log_core, log_shear, step: int) -> Certificate:
    """Certificate from the multiset of factor heights (independent of product order)."""
    diag_flags = np.asarray(diag_flags, dtype=bool)
    if not diag_flags.any():
        return Certificate.none(SYSTOLE_LOWER, step)
    diag_vals = log_core[diag_flags]
    kmax = int(np.argmax(diag_vals))
    m_lo = _lo(float(diag_vals[kmax]))
    rest = np.concatenate(
        [np.delete(diag_vals, kmax), log_core[~diag_flags], log_shear]
    )
    rest = np.sort(rest[np.isfinite(rest)])
    if rest.size:
        r = float(np.logaddexp.reduce(_hi_arr(rest)))
        r = r + 4.5e-16 * rest.size * (abs(r) + 1.0)
    else:
        r = -math.inf
    return Certificate(SYSTOLE_LOWER, _exp_diff(m_lo, r), step, {"log_max": m_lo, "log_rest": r})


def _ledger_factor_logs(batch: StepBatch, law: MatrixLawSpec, level: int | None, precision_bits: int = 64):
    """log H for cores and shears of a StepBatch."""
    n = len(batch)
    log_core = np.full(n, -np.inf)
    d = batch.is_diag
    with np.errstate(divide="ignore"):
        log_core[d] = batch.log_m[d] + LOGLOG2
    nd = ~d
    if nd.any():
        if law.kappa is not None:
            table = np.array([float(h.height.upper) for h in law.kappa.heights(precision_bits)])
            with np.errstate(divide="ignore"):
                logs = np.where(table > 0, np.log(np.where(table > 0, table, 1.0)), -np.inf)
            log_core[nd] = logs[batch.kappa_index[nd]]
        else:
            hs = np.array([enumerated_height_upper(int(k), law.d) for k in batch.kappa_index[nd]])
            with np.errstate(divide="ignore"):
                log_core[nd] = np.where(hs > 0, np.log(np.where(hs > 0, hs, 1.0)), -np.inf)
    i_exp = batch.shear_log2_den(level)
    with np.errstate(divide="ignore"):
        log_shear = np.where(i_exp > 0, np.log(np.maximum(i_exp, 1)) + LOGLOG2, -np.inf)
    return log_core, log_shear


def run_ledger_walk(
    law: MatrixLawSpec,
    n: int,
    rng: np.random.Generator,
    level: int | None = None,
    coarse_shear_heights: bool = False,
) -> LedgerTrace:
    """Ledger of an n-step walk; no matrix or big integer is materialised.

    With ``coarse_shear_heights`` every shear factor is charged i_level log 2
    (the bound used when only the truncation level is known).
    """
    level = law.level if level is None else level
    diag_parts, core_parts, shear_parts = [], [], []
    done = 0
    while done < n:
        m = min(CHUNK, n - done)
        batch = sample_steps(law, m, rng, exact_bits=0)
        lc, ls = _ledger_factor_logs(batch, law, level)
        if coarse_shear_heights and level > 0:
            ls = np.full(m, math.log(law.shear_indices[level - 1]) + LOGLOG2)
        diag_parts.append(batch.is_diag)
        core_parts.append(lc)
        shear_parts.append(ls)
        done += m
    diag = np.concatenate(diag_parts) if diag_parts else np.zeros(0, bool)
    log_core = np.concatenate(core_parts) if core_parts else np.zeros(0)
    log_shear = np.concatenate(shear_parts) if shear_parts else np.zeros(0)
    run_max, run_rest = _accumulate(diag, log_core, log_shear)
    return LedgerTrace(law, diag, log_core, log_shear, run_max, run_rest, 0)


def _accumulate(diag: np.ndarray, log_core: np.ndarray, log_shear: np.ndarray):
    """Sequential running (log max diagonal height, log sum of all other factor heights), sound margins."""
    n = len(diag)
    run_max = np.full(n, -np.inf)
    run_rest = np.full(n, -np.inf)
    cur_max, cur_rest = -math.inf, -math.inf
    la = np.logaddexp
    core_hi = _hi_arr(log_core)
    shear_hi = _hi_arr(log_shear)
    for k in range(n):
        add = shear_hi[k]
        if diag[k]:
            v = log_core[k]
            if v > cur_max:
                if cur_max > -math.inf:
                    add = la(add, _hi(cur_max))
                cur_max = v
            else:
                add = la(add, core_hi[k])
        else:
            add = la(add, core_hi[k])
        if add > -math.inf:
            cur_rest = la(cur_rest, add)
            cur_rest = cur_rest + 1e-15 * (abs(cur_rest) + 1.0)
        run_max[k] = _lo(cur_max) if cur_max > -math.inf else -math.inf
        run_rest[k] = cur_rest
    return run_max, run_rest


def ledger_from_exponents(exponents: Sequence[int], law: MatrixLawSpec) -> LedgerTrace:
    """Ledger of an all-diagonal walk with given exponents (testing aid)."""
    e = np.asarray(exponents, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_core = np.log(e) + LOGLOG2
    diag = np.ones(len(e), dtype=bool)
    log_shear = np.full(len(e), -np.inf)
    rm, rr = _accumulate(diag, log_core, log_shear)
    return LedgerTrace(law, diag, log_core, log_shear, rm, rr)


# -- perturbation bounds ---------------------------------------------------------


def product_perturbation_bound(steps: Sequence[RationalMatrix], tau, precision_bits: int = 64) -> mpf:
    """Upper bound on tau n (1+tau)^n prod |gamma_k|."""
    n = len(steps)
    with working_precision(precision_bits):
        T = ival(Fraction(tau)) if not isinstance(tau, mpf) else iv.mpf(tau)
        out = T * n * (1 + T) ** n
        for g in steps:
            out *= spectral_norm_enclosure(g, precision_bits).upper
        return hi(out)


def perturbation_bound(steps: Sequence[RationalMatrix], tau, precision_bits: int = 64) -> mpf:
    """Upper bound on the systole-ratio factor 1 + tau n (1+tau)^n prod |gamma_k| |gamma_k^-1|."""
    n = len(steps)
    with working_precision(precision_bits):
        T = ival(Fraction(tau)) if not isinstance(tau, mpf) else iv.mpf(tau)
        out = T * n * (1 + T) ** n
        for g in steps:
            out *= spectral_norm_enclosure(g, precision_bits).upper * spectral_norm_enclosure(g.inv, precision_bits).upper
        return hi(1 + out)


def measured_tau(steps: Sequence[RationalMatrix], perturbed: Sequence[RationalMatrix], precision_bits: int = 64) -> mpf:
    """Upper bound on max_k |gamma'_k - gamma_k| / |gamma_k|."""
    best = mpf(0)
    with working_precision(precision_bits):
        for g, g2 in zip(steps, perturbed):
            diff = g2 - g
            if all(x == 0 for row in diff.rows for x in row):
                continue
            r = hi(iv.mpf(spectral_norm_enclosure(diff, precision_bits).upper) / iv.mpf(spectral_norm_enclosure(g, precision_bits).lower))
            best = max(best, r)
    return best


def matrix_norm_lower(a: RationalMatrix, precision_bits: int = 64) -> mpf:
    if all(x == 0 for row in a.rows for x in row):
        return mpf(0)
    return spectral_norm_enclosure(a, precision_bits).lower


def shear_perturbed(steps: Sequence[RationalMatrix], dts: Sequence[Fraction]) -> list[RationalMatrix]:
    """gamma'_k = N_{dt_k} gamma_k (determinant one, relative error <= |dt_k|)."""
    return [mul(RationalMatrix.shear(dt, g.dim), g) for g, dt in zip(steps, dts)]


# -- walks from a shear base point ------------------------------------------------


@dataclass
class RecordCheck:
    """Outcome at one step of the record-time analysis of a shear-based walk."""

    step: int
    record: int
    verified: bool
    reasons: list[str]
    depth: int
    neg_log_delta: Enclosure | None = None
    certificate: Certificate | None = None
    lemma_bound: Certificate | None = None
    holds: bool | None = None

    def to_json(self) -> dict:
        return {
            "step": self.step,
            "record": self.record,
            "verified": self.verified,
            "reasons": self.reasons,
            "depth": self.depth,
            "neg_log_delta": None if self.neg_log_delta is None else self.neg_log_delta.to_json(20),
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            "lemma_bound": None if self.lemma_bound is None else self.lemma_bound.to_json(),
            "holds": self.holds,
        }


def record_side_conditions(batch: StepBatch, law: MatrixLawSpec, n: int, M: float, precision_bits: int = 64):
    """(record value, list of failed side conditions) after n steps.

    Conditions: n >= 2, n^2 <= max driving integer, the maximum is attained
    once, and the heights of the finite-part steps sum to at most 2 M n.
    Steps from the finite part carry driving integer 0.
    """
    drv = np.where(batch.is_diag[:n], batch.driving[:n], 0)
    rec = int(drv.max()) if n else 0
    reasons = []
    if n < 2:
        reasons.append("n < 2")
    if n * n > rec:
        reasons.append("n^2 > max driving integer")
    if rec == 0 or int((drv == rec).sum()) != 1:
        reasons.append("record not simple")
    gsum = mpf(0)
    for k in range(n):
        if not batch.is_diag[k]:
            core = Generator(int(batch.kappa_index[k])) if law.kappa is not None else FullSupport(int(batch.kappa_index[k]))
            gsum += core_height(core, law, precision_bits).upper
    if gsum > 2 * M * n:
        reasons.append("finite-part heights exceed 2Mn")
    return rec, reasons


def run_walk_from_shear(
    address_bits: Sequence[int],
    depth: int,
    law: MatrixLawSpec,
    n: int,
    rng: np.random.Generator | None = None,
    steps: StepBatch | None = None,
    l_seq: Sequence[int] | None = None,
    M: float = 0.0,
    budget_bits: int = WALK_BUDGET_BITS,
) -> tuple[WalkTrace, list[RecordCheck]]:
    """Exact walk from N_{t^depth} Z^d with shears truncated at ``depth``.

    At every step the record side conditions are evaluated; where they hold
    and depth <= record - 1, the record certificate l_record / 3 is compared
    with the exact -log(delta), alongside the domination bound of the factors.
    """
    from .laws import address_value

    indices = law.shear_indices
    t0 = address_value(indices, address_bits, depth)
    base = LatticeBasis(RationalMatrix.shear(t0, law.d))
    if steps is None:
        if rng is None:
            raise ValueError("need rng or steps")
        steps = sample_steps(law, n, rng)
    trace = run_exact_walk(law, n, base, steps=steps, level=depth, both_orders=False, budget_bits=budget_bits)
    checks: list[RecordCheck] = []
    if l_seq is None or law.exponent_table is None:
        return trace, checks
    for k in range(1, len(trace) + 1):
        rec, reasons = record_side_conditions(steps, law, k, M)
        if rec - 1 < depth:
            reasons = reasons + ["truncation depth exceeds record - 1"]
        chk = RecordCheck(k, rec, not reasons, reasons, depth)
        if chk.verified:
            value = Fraction(l_seq[rec - 1], 3)
            chk.certificate = Certificate(RECORD_ESCAPE, mpf(value.numerator) / value.denominator, k, {"l": l_seq[rec - 1]})
            chk.neg_log_delta = trace.systoles[k - 1].neg_log_delta_enclosure(128)
            chk.lemma_bound = trace.certificates[k - 1]
            chk.holds = bool(chk.neg_log_delta.upper >= chk.certificate.value)
        checks.append(chk)
    return trace, checks


# -- CSV --------------------------------------------------------------------------------

CSV_COLUMNS = ["step", "core_kind", "exponent_or_generator", "H_upper", "running_2max_minus_sum", "neg_log_delta", "certificate"]


def _core_fields(core) -> tuple[str, str]:
    if isinstance(core, DiagExponent):
        return "diag", str(core.m) if core.m is not None else f"exp({core.log_m!r})"
    if isinstance(core, FullSupport):
        return "full_support", str(core.k)
    return "generator", str(core.index)


def trace_to_csv(trace: WalkTrace | LedgerTrace, out: io.TextIOBase | None = None) -> str:
    """Stream a trace to CSV with the documented columns; returns the text when ``out`` is None."""
    buf = out or io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    if isinstance(trace, WalkTrace):
        for k, s in enumerate(trace.steps):
            kind, val = _core_fields(s.core)
            c = trace.certificates[k]
            w.writerow([
                k + 1, kind, val, decimal(trace.heights_upper[k], 17),
                "" if not c.defined else decimal(c.value, 17),
                decimal(trace.systoles[k].neg_log_delta, 17),
                "" if not c.defined else decimal(c.value, 17),
            ])
    else:
        series = trace.certificate_series()
        hu = trace.heights_upper
        for k in range(trace.n):
            kind = "diag" if trace.diag_flags[k] else "finite"
            val = repr(float(np.exp(trace.log_core[k] - LOGLOG2))) if trace.diag_flags[k] else ""
            w.writerow([k + 1, kind, val, repr(float(np.exp(hu[k]))) if hu[k] < 700 else f"exp({hu[k]!r})",
                        repr(float(series[k])), "", repr(float(series[k]))])
    return buf.getvalue() if out is None else ""
