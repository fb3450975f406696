"""Exact rational matrices over SL_d(Q), spectral-norm enclosures and heights."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from mpmath import iv, mpf

from .intervals import Enclosure, fraction_str, hi, ival, lo, working_precision

DEFAULT_BUDGET_BITS = 1 << 24
DEFAULT_PRECISION = 64
MAX_NORM_DIM = 6


class BudgetExceeded(RuntimeError):
    """An exact entry would exceed the configured bit-size budget."""


class SingularMatrix(ZeroDivisionError):
    pass


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        raise TypeError("floats are not accepted as exact matrix entries")
    return Fraction(x)


def entry_bits(x: Fraction) -> int:
    return max(x.numerator.bit_length(), x.denominator.bit_length())


@dataclass(frozen=True)
class RationalMatrix:
    """Immutable square matrix with exact rational entries.

    ``unimodular`` is a tag: when set at construction the determinant is
    checked to be exactly one.
    """

    rows: tuple[tuple[Fraction, ...], ...]
    unimodular: bool = field(default=False, compare=False)

    def __init__(self, rows: Iterable[Iterable], unimodular: bool = False, check: bool = True):
        data = tuple(tuple(_frac(x) for x in row) for row in rows)
        d = len(data)
        if d < 1 or any(len(r) != d for r in data):
            raise ValueError("matrix must be square and non-empty")
        object.__setattr__(self, "rows", data)
        object.__setattr__(self, "unimodular", bool(unimodular))
        if unimodular and check and self.det != 1:
            raise ValueError(f"matrix tagged unimodular has determinant {self.det}")

    # -- constructors -------------------------------------------------

    @classmethod
    def identity(cls, d: int) -> "RationalMatrix":
        return cls(([int(i == j) for j in range(d)] for i in range(d)), unimodular=True, check=False)

    @classmethod
    def diag(cls, entries: Sequence) -> "RationalMatrix":
        vals = [_frac(x) for x in entries]
        d = len(vals)
        rows = [[vals[i] if i == j else 0 for j in range(d)] for i in range(d)]
        return cls(rows, unimodular=math.prod(vals) == 1, check=False)

    @classmethod
    def dyadic_diag(cls, m: int, d: int, budget_bits: int = DEFAULT_BUDGET_BITS) -> "RationalMatrix":
        """``diag(2^m, 2^-m, 1, ..., 1)``; ``m`` may be negative."""
        if abs(m) + 1 > budget_bits:
            raise BudgetExceeded(f"2^{m} exceeds the {budget_bits}-bit entry budget")
        big = Fraction(1 << m) if m >= 0 else Fraction(1, 1 << -m)
        return cls.diag([big, 1 / big] + [1] * (d - 2))

    @classmethod
    def shear(cls, t, d: int) -> "RationalMatrix":
        """``N_t = I + t E_{1,2}``."""
        rows = [[int(i == j) for j in range(d)] for i in range(d)]
        rows[0][1] = _frac(t)
        return cls(rows, unimodular=True, check=False)

    @classmethod
    def elementary(cls, i: int, j: int, r, d: int) -> "RationalMatrix":
        """``I + r E_{i,j}`` for ``i != j`` (0-based)."""
        if i == j:
            raise ValueError("elementary matrix needs i != j")
        rows = [[int(a == b) for b in range(d)] for a in range(d)]
        rows[i][j] = _frac(r)
        return cls(rows, unimodular=True, check=False)

    @classmethod
    def from_json(cls, text_or_obj, unimodular: bool = False) -> "RationalMatrix":
        obj = json.loads(text_or_obj) if isinstance(text_or_obj, str) else text_or_obj
        return cls(([Fraction(str(x)) for x in row] for row in obj), unimodular=unimodular)

    # -- basic properties ---------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        return self.rows[i][j]

    def column(self, j: int) -> tuple[Fraction, ...]:
        return tuple(r[j] for r in self.rows)

    @property
    def T(self) -> "RationalMatrix":
        return RationalMatrix(zip(*self.rows), unimodular=self.unimodular, check=False)

    @cached_property
    def det(self) -> Fraction:
        return determinant(self)

    def is_identity(self) -> bool:
        return all(x == (i == j) for i, r in enumerate(self.rows) for j, x in enumerate(r))

    def is_diagonal(self) -> bool:
        return all(x == 0 for i, r in enumerate(self.rows) for j, x in enumerate(r) if i != j)

    def max_abs_entry(self) -> Fraction:
        return max(abs(x) for r in self.rows for x in r)

    def frobenius_sq(self) -> Fraction:
        return sum((x * x for r in self.rows for x in r), Fraction(0))

    def max_entry_bits(self) -> int:
        return max(entry_bits(x) for r in self.rows for x in r)

    def apply(self, v: Sequence) -> tuple[Fraction, ...]:
        return tuple(sum((a * _frac(b) for a, b in zip(r, v)), Fraction(0)) for r in self.rows)

    def scale(self, c) -> "RationalMatrix":
        c = _frac(c)
        return RationalMatrix(([c * x for x in r] for r in self.rows), check=False)

    def __matmul__(self, other: "RationalMatrix") -> "RationalMatrix":
        return mul(self, other)

    def __sub__(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return RationalMatrix(
            ([a - b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)), check=False
        )

    def __add__(self, other: "RationalMatrix") -> "RationalMatrix":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return RationalMatrix(
            ([a + b for a, b in zip(r, s)] for r, s in zip(self.rows, other.rows)), check=False
        )

    @cached_property
    def inv(self) -> "RationalMatrix":
        return inverse(self)

    def power(self, s: int) -> "RationalMatrix":
        """``self ** s`` for ``s`` in {-1, 0, 1}."""
        if s == 1:
            return self
        if s == -1:
            return self.inv
        if s == 0:
            return RationalMatrix.identity(self.dim)
        raise ValueError("only exponents -1, 0, 1 are supported")

    # -- serialisation ------------------------------------------------

    def to_json_obj(self) -> list[list[str]]:
        return [[fraction_str(x) for x in r] for r in self.rows]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    def __repr__(self) -> str:
        body = "; ".join(", ".join(str(x) for x in r) for r in self.rows)
        return f"RationalMatrix[{body}]"


def _check_budget(x: Fraction, budget_bits: int) -> None:
    if entry_bits(x) > budget_bits:
        raise BudgetExceeded(f"entry with {entry_bits(x)} bits exceeds the {budget_bits}-bit budget")


def mul(a: RationalMatrix, b: RationalMatrix, budget_bits: int = DEFAULT_BUDGET_BITS) -> RationalMatrix:
    """Exact product ``a @ b``; fails fast on entries over budget."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    cols = list(zip(*b.rows))
    rows = []
    for r in a.rows:
        out = []
        for c in cols:
            x = sum((u * v for u, v in zip(r, c) if u and v), Fraction(0))
            _check_budget(x, budget_bits)
            out.append(x)
        rows.append(out)
    return RationalMatrix(rows, unimodular=a.unimodular and b.unimodular, check=False)


def mul_all(mats: Iterable[RationalMatrix], d: int, budget_bits: int = DEFAULT_BUDGET_BITS) -> RationalMatrix:
    out = RationalMatrix.identity(d)
    for m in mats:
        out = mul(out, m, budget_bits)
    return out


def determinant(a: RationalMatrix) -> Fraction:
    m = [list(r) for r in a.rows]
    n = len(m)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        p = m[col][col]
        det *= p
        for r in range(col + 1, n):
            f = m[r][col] / p
            if f:
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return det


def inverse(a: RationalMatrix) -> RationalMatrix:
    """Exact inverse (closed-form adjugate for d = 2, Gauss-Jordan otherwise)."""
    n = a.dim
    if n == 2:
        (p, q), (r, s) = a.rows
        det = p * s - q * r
        if det == 0:
            raise SingularMatrix("matrix is singular")
        return RationalMatrix([[s / det, -q / det], [-r / det, p / det]], unimodular=a.unimodular, check=False)
    m = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a.rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise SingularMatrix("matrix is singular")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col]:
                f = m[r][col]
                m[r] = [x - f * y for x, y in zip(m[r], m[col])]
    return RationalMatrix((row[n:] for row in m), unimodular=a.unimodular, check=False)


def denominator_lcm(a: RationalMatrix) -> int:
    """q(a): least common denominator of the reduced entries."""
    return math.lcm(*(x.denominator for r in a.rows for x in r))


# -- spectral norm ------------------------------------------------------


@dataclass(frozen=True)
class NormEnclosure:
    """Two-sided enclosure of the largest singular value.

    ``lower_sq``/``upper_sq`` are exact rational bounds on the squared norm;
    ``lower``/``upper`` are their outward-rounded square roots.
    """

    lower: mpf
    upper: mpf
    precision_bits: int
    lower_sq: Fraction
    upper_sq: Fraction
    converged: bool = True

    @property
    def enclosure(self) -> Enclosure:
        return Enclosure(self.lower, self.upper)

    def to_json(self) -> dict:
        out = self.enclosure.to_json()
        out.update(precision_bits=self.precision_bits, converged=self.converged)
        return out


def gram(a: RationalMatrix) -> list[list[Fraction]]:
    """``a^T a`` as a nested list."""
    cols = [a.column(j) for j in range(a.dim)]
    return [[sum((x * y for x, y in zip(ci, cj)), Fraction(0)) for cj in cols] for ci in cols]


def charpoly(s: Sequence[Sequence[Fraction]]) -> list[Fraction]:
    """Coefficients (low to high) of det(x I - s), Faddeev-LeVerrier."""
    n = len(s)
    coeffs = [Fraction(0)] * (n + 1)
    coeffs[n] = Fraction(1)
    m = [[Fraction(0)] * n for _ in range(n)]
    for k in range(1, n + 1):
        # m <- s @ m + c_{n-k+1} I
        sm = [[sum((s[i][l] * m[l][j] for l in range(n)), Fraction(0)) for j in range(n)] for i in range(n)]
        c = coeffs[n - k + 1]
        for i in range(n):
            sm[i][i] += c
        m = sm
        tr = sum((s[i][l] * m[l][i] for i in range(n) for l in range(n)), Fraction(0))
        coeffs[n - k] = -tr / k
    return coeffs


def _trim(p: list[Fraction]) -> list[Fraction]:
    while len(p) > 1 and p[-1] == 0:
        p = p[:-1]
    return p


def _polyrem(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    a = list(a)
    db = len(b) - 1
    lead = b[-1]
    while len(a) - 1 >= db and any(a):
        if a[-1] == 0:
            a.pop()
            continue
        f = a[-1] / lead
        shift = len(a) - 1 - db
        for i, c in enumerate(b):
            a[shift + i] -= f * c
        a.pop()
    return _trim(a) if a else [Fraction(0)]


def _integerize(p: list[Fraction]) -> list[int]:
    den = math.lcm(*(c.denominator for c in p))
    return [int(c * den) for c in p]


def sturm_chain(p: list[Fraction]) -> list[list[int]]:
    p = _trim(p)
    deriv = _trim([c * i for i, c in enumerate(p)][1:] or [Fraction(0)])
    chain = [p, deriv]
    while len(chain[-1]) > 1 or chain[-1][0] != 0:
        r = _polyrem(chain[-2], chain[-1])
        if len(r) == 1 and r[0] == 0:
            break
        chain.append([-c for c in r])
        if len(r) == 1:
            break
    return [_integerize(q) for q in chain]


def _sign_at(p: list[int], x: Fraction) -> int:
    a, b = x.numerator, x.denominator
    acc = p[-1]
    bp = 1
    for c in reversed(p[:-1]):
        bp *= b
        acc = acc * a + c * bp
    return (acc > 0) - (acc < 0)


def _variations(signs: Iterable[int]) -> int:
    last = 0
    count = 0
    for s in signs:
        if s == 0:
            continue
        if last and s != last:
            count += 1
        last = s
    return count


def roots_above(chain: list[list[int]], x: Fraction) -> int:
    """Number of distinct real roots of chain[0] in (x, +inf)."""
    at_x = _variations(_sign_at(q, x) for q in chain)
    at_inf = _variations((q[-1] > 0) - (q[-1] < 0) for q in chain)
    return at_x - at_inf


def _isqrt_fraction_exact(x: Fraction) -> Fraction | None:
    rn, rd = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if rn * rn == x.numerator and rd * rd == x.denominator:
        return Fraction(rn, rd)
    return None


def largest_eigenvalue_bracket(
    s: list[list[Fraction]], precision_bits: int, max_iter: int = 4096
) -> tuple[Fraction, Fraction, bool]:
    """Bracket ``[lo, hi]`` around the largest eigenvalue of a symmetric PSD matrix."""
    n = len(s)
    diag = [s[i][i] for i in range(n)]
    if all(s[i][j] == 0 for i in range(n) for j in range(n) if i != j):
        top = max(diag)
        return top, top, True
    low = max(diag)
    high = sum(diag, Fraction(0))
    if low == high:
        return low, high, True
    chain = sturm_chain(charpoly(s))
    target = Fraction(1, 1 << (precision_bits + 1))
    for _ in range(max_iter):
        if high - low <= low * target:
            return low, high, True
        mid = (low + high) / 2
        # round the midpoint to a short dyadic to keep evaluation cheap
        mid = _short_dyadic_between(low, high, mid)
        while _sign_at(chain[0], mid) == 0:
            # never probe exactly at a root
            mid = mid + (high - mid) / 3
        if roots_above(chain, mid) >= 1:
            low = mid
        else:
            high = mid
    return low, high, False


def _short_dyadic_between(low: Fraction, high: Fraction, mid: Fraction) -> Fraction:
    gap = high - low
    # choose a grid 2^-k with 2^-k <= gap/4, snap mid to it
    k = max(0, -((gap.numerator.bit_length() - gap.denominator.bit_length()) - 3))
    scale = 1 << k
    snapped = Fraction(math.floor(mid * scale), scale)
    if low < snapped < high:
        return snapped
    return mid


def spectral_norm_enclosure(a: RationalMatrix, precision_bits: int = DEFAULT_PRECISION) -> NormEnclosure:
    """Enclose the operator 2-norm of ``a`` to relative precision 2^-precision_bits."""
    if precision_bits < 1:
        raise ValueError("precision_bits must be >= 1")
    if a.dim > MAX_NORM_DIM:
        raise ValueError(f"norm enclosure supports d <= {MAX_NORM_DIM}")
    s = gram(a)
    lo_sq, hi_sq, converged = largest_eigenvalue_bracket(s, precision_bits)
    # side checks: max|entry|^2 <= hi_sq and lo_sq <= ||a||_F^2
    assert a.max_abs_entry() ** 2 <= hi_sq and lo_sq <= a.frobenius_sq()
    if lo_sq == hi_sq and (root := _isqrt_fraction_exact(lo_sq)) is not None:
        with working_precision(precision_bits + 16):
            e = ival(root)
        return NormEnclosure(lo(e), hi(e), precision_bits, lo_sq, hi_sq, True)
    with working_precision(precision_bits + 16):
        lower = lo(iv.sqrt(ival(lo_sq)))
        upper = hi(iv.sqrt(ival(hi_sq)))
    return NormEnclosure(lower, upper, precision_bits, lo_sq, hi_sq, converged)


# -- height -------------------------------------------------------------


@dataclass(frozen=True)
class HeightProfile:
    norm: NormEnclosure
    norm_inv: NormEnclosure
    q: int
    q_inv: int
    height: Enclosure

    def to_json(self) -> dict:
        return {
            "norm": self.norm.to_json(),
            "norm_inv": self.norm_inv.to_json(),
            "q": str(self.q),
            "q_inv": str(self.q_inv),
            "height": self.height.to_json(),
        }


def height_profile(a: RationalMatrix, precision_bits: int = DEFAULT_PRECISION) -> HeightProfile:
    """H(a) = log max{||a||, ||a^-1||, q(a), q(a^-1)}, enclosed."""
    if a.det != 1:
        raise ValueError("height is defined on SL_d(Q)")
    a_inv = a.inv
    norm = spectral_norm_enclosure(a, precision_bits)
    norm_inv = spectral_norm_enclosure(a_inv, precision_bits)
    q = denominator_lcm(a)
    q_inv = denominator_lcm(a_inv)
    lower_sq = max(norm.lower_sq, norm_inv.lower_sq, Fraction(q * q), Fraction(q_inv * q_inv))
    upper_sq = max(norm.upper_sq, norm_inv.upper_sq, Fraction(q * q), Fraction(q_inv * q_inv))
    with working_precision(precision_bits + 16):
        h_lo = lo(iv.log(ival(lower_sq)) / 2)
        h_hi = hi(iv.log(ival(upper_sq)) / 2)
    return HeightProfile(norm, norm_inv, q, q_inv, Enclosure(h_lo, h_hi))


def dyadic_diag_height(m: int, precision_bits: int = DEFAULT_PRECISION) -> Enclosure:
    """Height of diag(2^m, 2^-m, 1, ...) without materialising it: |m| log 2."""
    with working_precision(precision_bits + 16):
        return Enclosure.from_iv(abs(m) * iv.log(iv.mpf(2)))
