from fractions import Fraction
from math import factorial

import pytest
from hypothesis import given, settings, strategies as st

from frobvir.exactmath import (
    TruncSeries, series_mul, series_compose_exp, solve_linear_exact,
    solve_consistent_exact, StructuralError, SingularMatrixError,
    InconsistentSystemError, UnsupportedDirectionError, mat_vec, rational,
)

T = ("t",)


def s1(cut, coeffs):
    return TruncSeries(T, cut, {(k,): v for k, v in coeffs.items()})


def test_difference_of_squares():
    a = s1(3, {0: 1, 1: 1})
    b = s1(3, {0: 1, 1: -1})
    assert series_mul(a, b) == s1(3, {0: 1, 2: -1})


def test_truncation_drops_high_degree():
    a = s1(3, {2: 1})
    assert series_mul(a, a).is_zero()


def test_exp_times_exp_minus():
    # Cauchy product of e^t and e^-t vanishes in every positive degree
    e = s1(6, {k: Fraction(1, factorial(k)) for k in range(7)})
    em = s1(6, {k: Fraction((-1) ** k, factorial(k)) for k in range(7)})
    assert series_mul(e, em) == s1(6, {0: 1})


def test_variable_mismatch():
    a = TruncSeries(("x",), 3, {(1,): 1})
    b = TruncSeries(("y",), 3, {(1,): 1})
    with pytest.raises(StructuralError):
        series_mul(a, b)


def test_cutoff_is_minimum():
    a = s1(5, {1: 1})
    b = s1(2, {1: 1})
    assert series_mul(a, b).cutoff == 2


def test_no_stored_zeros_or_overflow():
    a = TruncSeries(T, 2, {(0,): 0, (1,): 3, (3,): 5})
    assert a.terms() == {(1,): 3}


def test_exp_log_roundtrip():
    x = TruncSeries(("a", "b"), 6, {(1, 0): 1, (0, 1): Fraction(1, 3), (1, 1): -2})
    assert x.exp().log() == x


def test_inverse():
    x = TruncSeries(("a", "b"), 5, {(0, 0): 2, (1, 0): 1, (0, 2): 7})
    assert x * x.inverse() == TruncSeries.constant(x.variables, 5, 1)


def test_sqrt():
    x = TruncSeries(("a",), 6, {(0,): 4, (1,): 1, (3,): -2})
    r = x.sqrt()
    assert r * r == x


def test_substitute_composition():
    # f(u) = u^2 with u = a + a^2 gives a^2 + 2a^3 + a^4
    f = TruncSeries(("u",), 4, {(2,): 1})
    u = TruncSeries(("a",), 4, {(1,): 1, (2,): 1})
    assert f.substitute({"u": u}, ("a",), 4) == TruncSeries(("a",), 4, {(2,): 1, (3,): 2, (4,): 1})


def test_diff_and_euler():
    x = TruncSeries(("a", "b"), 4, {(2, 1): 3, (0, 1): 1})
    assert x.diff("a") == TruncSeries(("a", "b"), 3, {(1, 1): 6})
    assert x.euler("b", 2) == TruncSeries(("a", "b"), 4, {(2, 1): 6, (0, 1): 2})


@pytest.mark.parametrize("k,expected", [((0, 0), {(0, 0): 1}), ((1, 0), {(1, 0): 1}),
                                        ((2, 3), {(2, 3): 1})])
def test_compose_exp(k, expected):
    s = series_compose_exp(k, ("Q1", "Q2"))
    assert s.terms() == expected


def test_compose_exp_negative():
    with pytest.raises(UnsupportedDirectionError):
        series_compose_exp((1, -1), ("Q1", "Q2"))


def test_solve_identity():
    assert solve_linear_exact([[1, 0], [0, 1]], [1, 2]) == [1, 2]


def test_solve_vandermonde():
    assert solve_linear_exact([[1, 1], [1, 2]], [0, 1]) == [-1, 1]


def test_solve_singular_reports_rank():
    with pytest.raises(SingularMatrixError) as err:
        solve_linear_exact([[1, 2], [2, 4]], [1, 2])
    assert err.value.rank == 1


def test_consistent_overdetermined():
    assert solve_consistent_exact([[1, 0], [0, 1], [1, 1]], [2, 3, 5]) == [2, 3]
    with pytest.raises(InconsistentSystemError) as err:
        solve_consistent_exact([[1, 0], [0, 1], [1, 1]], [2, 3, 6])
    assert err.value.row == 2


def test_rational_parse():
    assert rational("-3/6") == Fraction(-1, 2)
    assert rational(4) == 4


# property tests

VARS = ("x", "y")
small = st.integers(-3, 3)


@st.composite
def series(draw, integer=False):
    cut = draw(st.integers(0, 8))
    n = draw(st.integers(0, 6))
    coeffs = {}
    for _ in range(n):
        e = (draw(st.integers(0, 4)), draw(st.integers(0, 4)))
        num = draw(small)
        den = 1 if integer else draw(st.integers(1, 4))
        coeffs[e] = Fraction(num, den)
    return TruncSeries(VARS, cut, coeffs)


@settings(max_examples=60, deadline=None)
@given(series(), series(), series())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
    assert (a + b) + c == a + (b + c)


@settings(max_examples=60, deadline=None)
@given(series(integer=True), series(integer=True))
def test_integer_products_stay_integer(a, b):
    assert all(v.denominator == 1 for _, v in (a * b).items())


@settings(max_examples=50, deadline=None)
@given(st.lists(st.lists(st.integers(-5, 5), min_size=3, max_size=3), min_size=3, max_size=3),
       st.lists(st.integers(-5, 5), min_size=3, max_size=3))
def test_solve_then_apply_is_identity(a, rhs):
    try:
        x = solve_linear_exact(a, rhs)
    except SingularMatrixError:
        return
    assert mat_vec([[Fraction(v) for v in row] for row in a], x) == [Fraction(v) for v in rhs]


# graded (weighted) series

W = (0, 1)


def test_weight_zero_variable_is_not_truncated():
    s = TruncSeries(VARS, 1, {(7, 0): 1, (3, 1): 2, (0, 2): 5}, weights=W)
    assert s.coefficient((7, 0)) == 1 and s.coefficient((3, 1)) == 2
    assert s.coefficient((0, 2)) == 0
    assert s.max_degree() == 1


def test_weighted_diff_keeps_cutoff_for_weight_zero():
    s = TruncSeries(VARS, 2, {(3, 2): 1}, weights=W)
    assert s.diff("x").cutoff == 2
    assert s.diff("y").cutoff == 1


def test_weights_are_structural():
    a = TruncSeries(VARS, 2, {(1, 0): 1}, weights=W)
    b = TruncSeries(VARS, 2, {(1, 0): 1})
    with pytest.raises(StructuralError):
        a + b
    assert TruncSeries(VARS, 2, {(1, 0): 1}, weights=(1, 1)) == b


def test_exp_refuses_degree_zero_part():
    with pytest.raises(ValueError):
        TruncSeries(VARS, 2, {(1, 0): 1}, weights=W).exp()
    q = TruncSeries(VARS, 2, {(2, 1): 1}, weights=W)
    assert (q.exp() * (-q).exp()) == 1


@st.composite
def graded_series(draw):
    s = draw(series())
    return s.regrade(W, draw(st.integers(0, 4)))


@settings(max_examples=40, deadline=None)
@given(graded_series(), graded_series(), graded_series())
def test_weighted_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a * b == b * a
