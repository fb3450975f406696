"""Exact systoles of unimodular rational lattices ``g . Z^d``."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np
from mpmath import iv, mpf

from .intervals import Enclosure, Real, decimal, fraction_str, hi, ival, lo, mpf_to_fraction, working_precision
from .ratmat import DEFAULT_BUDGET_BITS, BudgetExceeded, RationalMatrix, denominator_lcm, mul

LLL_DELTA = Fraction(3, 4)
MAX_DIM = 6


@dataclass(frozen=True)
class LatticeBasis:
    """The lattice spanned by the columns of a determinant-one rational matrix."""

    basis: RationalMatrix

    def __post_init__(self) -> None:
        # the tag is set only by checked constructors and products of tagged matrices
        if not self.basis.unimodular and self.basis.det != 1:
            raise ValueError("lattice basis must have determinant exactly 1")

    @classmethod
    def standard(cls, d: int) -> "LatticeBasis":
        return cls(RationalMatrix.identity(d))

    @classmethod
    def of(cls, rows) -> "LatticeBasis":
        return cls(RationalMatrix(rows, unimodular=True))

    @property
    def dim(self) -> int:
        return self.basis.dim

    def transformed(self, g: RationalMatrix, budget_bits: int = DEFAULT_BUDGET_BITS) -> "LatticeBasis":
        return LatticeBasis(mul(g, self.basis, budget_bits))

    @cached_property
    def scale(self) -> int:
        """Common denominator D making ``D * basis`` integral."""
        return denominator_lcm(self.basis)

    @cached_property
    def int_gram(self) -> tuple[tuple[int, ...], ...]:
        """Gram matrix of ``D * basis``; squared lengths are ``x^T G x / D^2``."""
        D = self.scale
        cols = [[int(x * D) for x in self.basis.column(j)] for j in range(self.dim)]
        return tuple(tuple(sum(a * b for a, b in zip(ci, cj)) for cj in cols) for ci in cols)

    def vector(self, coeffs: Sequence[int]) -> tuple[Fraction, ...]:
        return self.basis.apply(coeffs)

    def norm_sq(self, coeffs: Sequence[int]) -> Fraction:
        G = self.int_gram
        d = self.dim
        q = sum(G[i][j] * coeffs[i] * coeffs[j] for i in range(d) for j in range(d))
        return Fraction(q, self.scale**2)


@dataclass(frozen=True)
class SystoleResult:
    delta_sq: Fraction
    witness: tuple[int, ...]

    @property
    def neg_log_delta(self) -> mpf:
        return self.neg_log_delta_enclosure(64).mid

    def neg_log_delta_enclosure(self, bits: int = 128) -> Enclosure:
        """-log(delta) = -log(delta_sq)/2, outward rounded."""
        with working_precision(bits):
            return Enclosure.from_iv(-iv.log(ival(self.delta_sq)) / 2)

    def to_json(self) -> dict:
        return {
            "delta_sq": fraction_str(self.delta_sq),
            "witness": list(self.witness),
            "neg_log_delta": decimal(self.neg_log_delta, 30),
        }


def _normalize_sign(x: Sequence[int]) -> tuple[int, ...]:
    for v in x:
        if v:
            return tuple(x) if v > 0 else tuple(-c for c in x)
    return tuple(x)


def _tie_key(x: tuple[int, ...]) -> tuple:
    first = next(i for i, v in enumerate(x) if v)
    return (first, x)


def _pick_witness(candidates) -> tuple[int, ...]:
    return min((_normalize_sign(c) for c in candidates), key=_tie_key)


# -- reduction ------------------------------------------------------------


def _gauss_2d(G) -> tuple[int, list[tuple[int, int]]]:
    """Lagrange-Gauss reduction of an integral binary form; returns (min, minimizers)."""
    a, b, c = G[0][0], G[0][1], G[1][1]
    u1, u2 = (1, 0), (0, 1)
    while True:
        if a > c:
            a, c = c, a
            u1, u2 = u2, u1
        q = (2 * b + a) // (2 * a)  # nearest integer to b/a
        if q:
            c = c - 2 * q * b + q * q * a
            b = b - q * a
            u2 = (u2[0] - q * u1[0], u2[1] - q * u1[1])
        if c >= a:
            break
    cands = {
        u1: a,
        u2: c,
        (u1[0] + u2[0], u1[1] + u2[1]): a + 2 * b + c,
        (u1[0] - u2[0], u1[1] - u2[1]): a - 2 * b + c,
    }
    best = min(cands.values())
    return best, [u for u, v in cands.items() if v == best]


def _gso(G: list[list[int]]) -> tuple[list[list[Fraction]], list[Fraction]]:
    n = len(G)
    mu = [[Fraction(0)] * n for _ in range(n)]
    B = [Fraction(0)] * n
    for i in range(n):
        for j in range(i):
            s = Fraction(G[i][j]) - sum((mu[j][k] * mu[i][k] * B[k] for k in range(j)), Fraction(0))
            mu[i][j] = s / B[j]
        B[i] = G[i][i] - sum((mu[i][k] ** 2 * B[k] for k in range(i)), Fraction(0))
    return mu, B


def lll_reduce(G0: Sequence[Sequence[int]], delta: Fraction = LLL_DELTA) -> list[list[int]]:
    """Exact LLL on an integral positive-definite Gram matrix.

    Returns the unimodular transform as a list of coefficient columns.
    """
    n = len(G0)
    U = [[int(i == j) for i in range(n)] for j in range(n)]  # U[k] = coeffs of b_k

    def gram_entry(i: int, j: int) -> int:
        return sum(G0[r][s] * U[i][r] * U[j][s] for r in range(n) for s in range(n) if U[i][r] and U[j][s])

    G = [list(r) for r in G0]

    def refresh(k: int) -> None:
        for i in range(n):
            G[k][i] = G[i][k] = gram_entry(k, i)

    mu, B = _gso(G)
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                U[k] = [x - q * y for x, y in zip(U[k], U[j])]
                refresh(k)
                mu, B = _gso(G)
        if B[k] >= (delta - mu[k][k - 1] ** 2) * B[k - 1]:
            k += 1
        else:
            U[k], U[k - 1] = U[k - 1], U[k]
            refresh(k)
            refresh(k - 1)
            mu, B = _gso(G)
            k = max(k - 1, 1)
    return U


def _int_window(c: Fraction, r: Fraction) -> range:
    """Integers x with (x - c)^2 <= r (r >= 0)."""
    if r < 0:
        return range(0)
    s = math.isqrt(r.numerator * r.denominator) // r.denominator  # floor(sqrt(r))
    fc = math.floor(c)
    hi_x = fc + s + 1
    while hi_x > c and (hi_x - c) ** 2 > r:
        hi_x -= 1
    lo_x = math.ceil(c) - s - 1
    while lo_x < c and (c - lo_x) ** 2 > r:
        lo_x += 1
    return range(lo_x, hi_x + 1)


def _enumerate_short(G: list[list[int]], radius: int) -> tuple[int, list[tuple[int, ...]]]:
    """All nonzero integer x with x^T G x minimal, given that the minimum is <= radius."""
    n = len(G)
    mu, B = _gso(G)
    best = [Fraction(radius)]
    found: list[tuple[int, ...]] = []
    x = [0] * n

    def rec(level: int, partial: Fraction) -> None:
        c = -sum((mu[j][level] * x[j] for j in range(level + 1, n)), Fraction(0))
        room = (best[0] - partial) / B[level]
        for v in _int_window(c, room):
            x[level] = v
            val = partial + B[level] * (v - c) ** 2
            if val > best[0]:
                continue
            if level == 0:
                if any(x):
                    if val < best[0]:
                        best[0] = val
                        found.clear()
                    found.append(tuple(x))
            else:
                rec(level - 1, val)
        x[level] = 0

    rec(n - 1, Fraction(0))
    return int(best[0]), found


def systole_sq(b: LatticeBasis, budget_bits: int = DEFAULT_BUDGET_BITS) -> SystoleResult:
    """Exact squared length of a shortest nonzero vector of ``b``."""
    d = b.dim
    if d > MAX_DIM:
        raise ValueError(f"systole supports d <= {MAX_DIM}")
    if b.basis.max_entry_bits() > budget_bits:
        raise BudgetExceeded("lattice basis exceeds the entry bit budget")
    G = b.int_gram
    D2 = b.scale**2
    if d == 1:
        return SystoleResult(Fraction(G[0][0], D2), (1,))
    if d == 2:
        best, mins = _gauss_2d(G)
        return SystoleResult(Fraction(best, D2), _pick_witness(mins))
    U = lll_reduce(G)
    G_red = [[sum(G[r][s] * U[i][r] * U[j][s] for r in range(d) for s in range(d)) for j in range(d)] for i in range(d)]
    best, mins = _enumerate_short(G_red, G_red[0][0])
    originals = [tuple(sum(y[k] * U[k][i] for k in range(d)) for i in range(d)) for y in mins]
    return SystoleResult(Fraction(best, D2), _pick_witness(originals))


# -- independent oracle ---------------------------------------------------


def certified_coeff_radius(b: LatticeBasis) -> int:
    """Box radius guaranteed to contain the coefficients of a shortest vector.

    For a shortest v = g x we have |x_i| <= |row_i(g^-1)| * min_j |b_j|.
    """
    g_inv = b.basis.inv
    shortest_col = min(sum((x * x for x in b.basis.column(j)), Fraction(0)) for j in range(b.dim))
    bound = max(sum((x * x for x in row), Fraction(0)) for row in g_inv.rows) * shortest_col
    return max(1, math.isqrt(bound.numerator * bound.denominator) // bound.denominator)


def brute_force_systole_sq(b: LatticeBasis, coeff_radius: int) -> Fraction:
    """Minimum squared length over nonzero coefficient vectors in [-R, R]^d."""
    if coeff_radius < 1:
        raise ValueError("coeff_radius must be >= 1")
    G = b.int_gram
    d = b.dim
    R = coeff_radius
    gmax = max(abs(v) for row in G for v in row)
    dtype = np.int64 if d * d * gmax * R * R < (1 << 62) else object
    grid = np.arange(-R, R + 1, dtype=np.int64).astype(dtype)
    if d == 1:
        vals = [G[0][0] * r * r for r in range(1, R + 1)]
        return Fraction(min(vals), b.scale**2)
    y = grid[:, None]
    z = grid[None, :]
    best = None
    for prefix in itertools.product(range(-R, R + 1), repeat=d - 2):
        p = list(prefix)
        const = sum(G[i][j] * p[i] * p[j] for i in range(d - 2) for j in range(d - 2))
        ly = 2 * sum(G[i][d - 2] * p[i] for i in range(d - 2))
        lz = 2 * sum(G[i][d - 1] * p[i] for i in range(d - 2))
        q = (const + ly * y + lz * z) + G[d - 2][d - 2] * y * y + 2 * G[d - 2][d - 1] * y * z + G[d - 1][d - 1] * z * z
        if any(p):
            m = q.min()
        else:
            flat = q.ravel()
            centre = R * (2 * R + 1) + R
            m = min(flat[:centre].min(), flat[centre + 1 :].min())
        if best is None or m < best:
            best = m
    return Fraction(int(best), b.scale**2)


# -- Mahler compact sets ------------------------------------------------------


def in_mahler_compact(b: LatticeBasis, B: Real, start_bits: int = 128, max_bits: int = 1 << 14) -> bool:
    """True iff -log(delta(b)) <= B, i.e. delta^2 >= exp(-2B)."""
    res = systole_sq(b)
    return systole_at_least(res.delta_sq, B, start_bits, max_bits)


def systole_at_least(delta_sq: Fraction, B: Real, start_bits: int = 128, max_bits: int = 1 << 14) -> bool:
    if isinstance(B, str):
        B = Fraction(B)
    bits = start_bits
    while bits <= max_bits:
        with working_precision(bits):
            e = iv.exp(-2 * ival(B))
            if delta_sq > mpf_to_fraction(hi(e)):
                return True
            if delta_sq < mpf_to_fraction(lo(e)):
                return False
        bits *= 2
    return True  # closed-set convention when undecidable
