"""Outward-rounded real enclosures on top of ``mpmath.iv``.

Every enclosure in the package is an :class:`Enclosure` holding two
``mpf`` endpoints.  Arithmetic is done in the interval context of mpmath,
whose operations round the lower endpoint down and the upper endpoint up.
"""

from __future__ import annotations

import contextlib
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Union

import mpmath
from mpmath import iv, mpf

Real = Union[int, float, Fraction, mpf]


@contextlib.contextmanager
def working_precision(bits: int) -> Iterator[None]:
    """Temporarily set the binary precision of the interval context."""
    saved = iv.prec
    iv.prec = max(int(bits), 53)
    try:
        yield
    finally:
        iv.prec = saved


def int_str(n: int) -> str:
    """Decimal string of an integer of any size (the interpreter caps str() at a few thousand digits)."""
    n = int(n)
    setter = getattr(sys, "set_int_max_str_digits", None)
    if setter is None or n.bit_length() < 10_000:
        return str(n)
    saved = sys.get_int_max_str_digits()
    setter(0)
    try:
        return str(n)
    finally:
        setter(saved)


def fraction_str(x: Fraction) -> str:
    """'p/q' with both parts in full."""
    x = Fraction(x)
    return f"{int_str(x.numerator)}/{int_str(x.denominator)}"


def decimal_digits(n: int) -> int:
    """Number of decimal digits of |n| without building the string."""
    n = abs(int(n))
    if n == 0:
        return 1
    d = int(n.bit_length() * 0.30102999566398120)
    return d + 1 if n >= 10**d else d


def ival(x) -> "iv.mpf":
    """Tight interval around an exact value (int, Fraction, float, mpf)."""
    if isinstance(x, Fraction):
        if x.denominator == 1:
            return iv.mpf(x.numerator)
        return iv.mpf(x.numerator) / iv.mpf(x.denominator)
    if isinstance(x, Enclosure):
        return x.to_iv()
    if isinstance(x, str):
        return iv.mpf([x, x])
    return iv.mpf(x)


def lo(x) -> mpf:
    """Lower endpoint of an ``iv.mpf`` as a plain ``mpf``."""
    return mpmath.mp.make_mpf(x._mpi_[0])


def hi(x) -> mpf:
    return mpmath.mp.make_mpf(x._mpi_[1])


def mpf_to_fraction(m: mpf) -> Fraction:
    """Exact rational value of a finite binary float."""
    if not mpmath.isfinite(m):
        raise ValueError(f"cannot convert {m} to a fraction")
    man, exp = m.man_exp
    man = int(man)
    if exp >= 0:
        return Fraction(man << exp)
    return Fraction(man, 1 << -exp)


@dataclass(frozen=True)
class Enclosure:
    """Closed interval ``[lower, upper]`` known to contain a real quantity."""

    lower: mpf
    upper: mpf

    def __post_init__(self) -> None:
        if self.lower > self.upper:
            raise ValueError(f"empty enclosure [{self.lower}, {self.upper}]")

    @classmethod
    def from_iv(cls, x) -> "Enclosure":
        return cls(lo(x), hi(x))

    @classmethod
    def exact(cls, x) -> "Enclosure":
        return cls.from_iv(ival(x))

    def to_iv(self):
        return iv.mpf([self.lower, self.upper])

    @property
    def width(self) -> mpf:
        return self.upper - self.lower

    @property
    def mid(self) -> mpf:
        return (self.lower + self.upper) / 2

    def contains(self, x) -> bool:
        return self.lower <= x <= self.upper

    def encloses(self, other: "Enclosure") -> bool:
        return self.lower <= other.lower and other.upper <= self.upper

    def intersects(self, other: "Enclosure") -> bool:
        return self.lower <= other.upper and other.lower <= self.upper

    def to_json(self, digits: int = 30) -> dict:
        return {
            "lower": mpmath.nstr(self.lower, digits, strip_zeros=False),
            "upper": mpmath.nstr(self.upper, digits, strip_zeros=False),
        }

    def __float__(self) -> float:
        return float(self.mid)

    def __repr__(self) -> str:
        return f"Enclosure[{mpmath.nstr(self.lower, 15)}, {mpmath.nstr(self.upper, 15)}]"


def log2_enclosure() -> "iv.mpf":
    return iv.log(iv.mpf(2))


def exp_lower_fraction(x: Real, bits: int = 128) -> Fraction:
    """A rational number that is ``<= exp(x)``."""
    with working_precision(bits):
        return mpf_to_fraction(lo(iv.exp(ival(x))))


def exp_upper_fraction(x: Real, bits: int = 128) -> Fraction:
    with working_precision(bits):
        return mpf_to_fraction(hi(iv.exp(ival(x))))


def decimal(x: mpf, digits: int = 30) -> str:
    return mpmath.nstr(x, digits, strip_zeros=False)
