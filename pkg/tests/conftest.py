import random
from fractions import Fraction

import pytest

from latwalk.ratmat import RationalMatrix


def _small_rational(rnd: random.Random, bound: int) -> Fraction:
    return Fraction(rnd.randint(-bound, bound), rnd.randint(1, bound))


FREE_BOUND = {2: 7, 3: 4, 4: 3}


def random_unimodular(rnd: random.Random, d: int, bound: int = 50) -> RationalMatrix:
    """Random determinant-one rational matrix whose entries have |num|, den <= bound.

    All entries but one are drawn from a smaller range; the last one is solved
    from the determinant (which is affine in it) and rejected if out of range.
    """
    free = min(bound, FREE_BOUND.get(d, 2))
    while True:
        rows = [[_small_rational(rnd, free) for _ in range(d)] for _ in range(d)]
        rows[-1][-1] = Fraction(0)
        m0 = RationalMatrix(rows)
        rows[-1][-1] = Fraction(1)
        slope = RationalMatrix(rows).det - m0.det
        if slope == 0:
            continue
        x = (1 - m0.det) / slope
        if abs(x.numerator) <= bound and x.denominator <= bound:
            rows[-1][-1] = x
            return RationalMatrix(rows, unimodular=True)


def random_small_rational_vector(rnd: random.Random, d: int, bound: int = 20) -> list[Fraction]:
    while True:
        v = [_small_rational(rnd, bound) for _ in range(d)]
        if any(v):
            return v


@pytest.fixture
def rnd():
    return random.Random(20240601)


# one line per acceptance criterion, echoed again at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
