from fractions import Fraction

import pytest

from frobvir.exactmath import TruncSeries, solve_linear_exact
from frobvir.gw import (
    p1p1_rational, p1p1_elliptic, p1p1_rational_wdvv, cp3_rational, cp3_elliptic,
    p1p1_potential_part, p1p1_system, p1p1_gradient, cp3_potential_part, cp3_system,
    cp3_gradient, EllipticInconsistency, table_rows, rows_to_csv,
    rows_to_json,
)

from table1 import TABLE1


@pytest.fixture(scope="module")
def n0():
    return p1p1_rational(14)


@pytest.fixture(scope="module")
def n1(n0):
    return p1p1_elliptic(14, n0)


def test_rational_examples(n0):
    assert n0[(1, 1)] == 1
    assert n0[(2, 2)] == 12
    assert n0[(3, 3)] == 3510
    assert n0[(7, 7)] == 30814236194426422332


def test_boundary_rows(n0, n1):
    for k in range(1, 14):
        assert n0[(k, 1)] == n0[(1, k)] == 1
        assert n1[(k, 1)] == n1[(1, k)] == 0
    for k in range(1, 15):
        assert n0[(k, 0)] == n0[(0, k)] == (k == 1)


@pytest.mark.parametrize("key", sorted(TABLE1))
def test_table_rows(key, n0, n1):
    a, b = TABLE1[key]
    assert n0[key] == a
    assert n1[key] == b


def test_symmetry(n0, n1):
    assert all(n0[(l, k)] == v for (k, l), v in n0.items())
    assert all(n1[(l, k)] == v for (k, l), v in n1.items())
    assert all(isinstance(v, int) for v in n1.entries.values())


def test_rational_positive(n0):
    assert all(v > 0 for (k, l), v in n0.items() if k and l)


def test_recursion_matches_associativity():
    # independent route: impose WDVV on the P1xP1 ansatz directly
    assert p1p1_rational_wdvv(5).entries == p1p1_rational(5).entries


def test_first_equation_cancels_identically(n0):
    # 2 G2 + 2 G3 - t4 G4 = -1/3 for any g once t4 G4 is rewritten in z
    M, rhs = p1p1_system(p1p1_potential_part(n0, 6))
    g = TruncSeries(("Q1", "Q2"), 6, {(1, 2): 5, (3, 1): Fraction(1, 7)})
    X = p1p1_gradient(g)
    assert sum((m * x for m, x in zip(M[0], X)), -rhs[0]).is_zero()
    M3, r3 = cp3_system(cp3_potential_part(cp3_rational(2), 2))
    h = TruncSeries(("z1", "Q"), 2, {(3, 1): 2, (0, 2): 1}, (0, 1))
    Y = cp3_gradient(h)
    assert sum((m * y for m, y in zip(M3[0], Y)), -r3[0]).is_zero()


def test_three_by_three_block_at_total_four(n0):
    # the square block of the second equation for (3,1), (2,2), (1,3)
    f = p1p1_potential_part(n0, 4)
    M, rhs = p1p1_system(f)
    low = TruncSeries(("Q1", "Q2"), 4, dict(p1p1_elliptic(3, n0).extra["g"].items()))
    X = p1p1_gradient(low)
    res = sum((m * x for m, x in zip(M[1], X)), -rhs[1]).homogeneous_part(4)
    keys = [(3, 1), (2, 2), (1, 3)]
    A = [[32 if i == j else 0 for j in range(3)] for i in range(3)]
    c = solve_linear_exact(A, [-res.coefficient(k) for k in keys])
    from math import factorial
    assert [x * factorial(8) for x in c] == [0, 1, 0]


def test_overdetermined_rows_checked(n1):
    assert n1.extra["rows_checked"] > sum(1 for k, l in n1.keys())


def test_corrupted_input_is_inconsistent(n0):
    bad = dict(n0.entries)
    bad[(2, 2)] = 13
    from frobvir.gw import GWTable
    with pytest.raises(EllipticInconsistency) as info:
        p1p1_elliptic(8, GWTable("p1xp1", 0, bad))
    assert info.value.degree == 8


def test_cp3_rational_low_degree():
    t = cp3_rational(3)
    assert t[(1, 2)] == 1      # a line through two points
    assert t[(1, 0)] == 2      # lines meeting four lines
    assert t[(1, 1)] == 1
    assert t[(2, 4)] == 0      # four general points are not coplanar
    assert t[(2, 0)] == 92
    assert t[(3, 6)] == 1
    assert t[(3, 0)] == 80160
    assert set(t.keys()) == {(k, l) for k in (1, 2, 3) for l in range(2 * k + 1)}


def test_cp3_elliptic():
    t = cp3_elliptic(3)
    ell = t.extra["elliptic"]
    assert all(ell[(1, l)] == 0 for l in range(3))
    assert all(ell[(2, l)] == 0 for l in range(5))
    assert ell[(3, 0)] == 1500
    assert t.extra["g2_constant"] == Fraction(-1, 4)


def test_cp3_corruption_detected():
    from frobvir.gw import GWTable
    good = cp3_rational(2)
    bad = dict(good.entries)
    bad[(2, 1)] += 1
    with pytest.raises(EllipticInconsistency):
        cp3_elliptic(2, GWTable("cp3", 0, bad))


def test_outputs():
    h, rows = table_rows("p1xp1", 0, 6)
    text = rows_to_csv(h, rows)
    assert "2,2,12\n" in text
    h, rows = table_rows("p1xp1", 1, 6)
    assert ["3", "2", "96", "20"] in rows
    doc = rows_to_json("p1xp1", 1, h, rows)
    assert '"N1": "20"' in doc
    h, rows = table_rows("cp3", 1, 1)
    assert [r[-1] for r in rows] == ["0", "0", "0"]
