from fractions import Fraction

import pytest

from frobvir.exactmath import TruncSeries
from frobvir.frobenius import FrobeniusModel, Genus0, Genus1, load_model, g_function
from frobvir.constraints import (
    evaluate_A0, evaluate_A1, evaluate_range, genus0_residual, genus1_residual,
    CutoffIncompatible, NotSemisimple, window,
)
from frobvir.virasoro import build_operator, commutator, VirasoroOperator

F = Fraction


def test_string_equation_trivial():
    assert evaluate_A0("n1", -1, 4, 6).passed


def test_genus0_trivial_range():
    reports = evaluate_range("n1", 0, range(0, 4), 5, 5)
    assert all(r.passed for r in reports)
    assert [r.window for r in reports] == [5, 4, 3, 2]


def test_genus0_cp1_range():
    assert all(r.passed for r in evaluate_range("cp1", 0, range(-1, 3), 4, 4))


def test_genus0_p1xp1():
    assert all(r.passed for r in evaluate_range("p1xp1", 0, range(-1, 3), 3, 3))


def test_genus0_cp3():
    assert all(r.passed for r in evaluate_range("cp3", 0, range(-1, 2), 3, 3))


def _corrupt(F0, exps):
    return F0 + TruncSeries.monomial(F0.variables, F0.cutoff, exps, 1)


def test_corrupted_free_energy_is_detected():
    model = load_model("cp1")
    g = Genus0(model, 3, 5)
    L = build_operator(model.monodromy, 0, 3, strict=False)
    F0 = g.free_energy()
    assert genus0_residual(L, g.ring, F0, 4, 3).is_zero()
    names = g.ring.vars
    exps = tuple({"T1_0": 2, "T2_1": 1}.get(v, 0) for v in names)
    res = genus0_residual(L, g.ring, _corrupt(F0, exps), 4, 3)
    assert not res.is_zero()
    # the perturbation enters linearly through the Tt d F0 terms at its own degree
    assert res.min_degree() <= 3


def test_genus1_cp1():
    assert all(r.passed for r in evaluate_range("cp1", 1, [-1, 0], 3, 3))
    assert all(r.passed for r in evaluate_range("cp1", 1, [1, 2], 3, 2))


def test_genus1_trivial():
    assert all(r.passed for r in evaluate_range("n1", 1, [-1, 0, 1], 3, 3))


def test_genus1_p1xp1_uses_elliptic_numbers():
    # at total degree 4 the first nonzero elliptic count N1(2,2) enters G
    assert all(r.passed for r in evaluate_range("p1xp1", 1, [-1, 0], 2, 4))


def test_genus1_cp3():
    assert all(r.passed for r in evaluate_range("cp3", 1, [-1, 0], 2, 3))


def test_l0_constant_is_needed_at_genus_one():
    model = load_model("cp1")
    D, P = 3, 3
    g0 = Genus0(model, P, D + 2)
    g1 = Genus1(g0, g_function(model, D + 1))
    L = build_operator(model.monodromy, 0, P, strict=False)
    assert L.const == 0
    assert genus1_residual(L, g0.ring, g0.free_energy(), g1.F1, D, P).is_zero()
    # genus 0 carries no constant; the trivial model has a nonzero one at genus 1
    n1 = load_model("n1")
    h0 = Genus0(n1, P, D + 2)
    h1 = Genus1(h0)
    L = build_operator(n1.monodromy, 0, P, strict=False)
    assert L.const == F(1, 16)
    stripped = VirasoroOperator(0, P, 1, L.dd, L.td, L.tt, 0)
    res = genus1_residual(stripped, h0.ring, h0.free_energy(), h1.F1, D, P)
    assert res == h0.ring.zero(D) - F(1, 16)
    assert genus0_residual(L, h0.ring, h0.free_energy(), D, P).is_zero()


def test_commutator_closure_genus0():
    model = load_model("cp1")
    P, D, m = 6, 4, 2
    g = Genus0(model, P, D + 1)
    F0 = g.free_energy()
    C = commutator(build_operator(model.monodromy, m, P, strict=False),
                   build_operator(model.monodromy, 1, P, strict=False))
    W = P - abs(m) - 1 - model.monodromy.r_window()
    assert W >= 1
    assert genus0_residual(C, g.ring, F0, D, W).is_zero()
    # a term the dilaton slot of L_3 reads back inside the window
    bad = _corrupt(F0, tuple({"T1_0": 1, "T2_3": 1}.get(v, 0) for v in g.ring.vars))
    via_commutator = genus0_residual(C, g.ring, bad, D, W)
    assert not via_commutator.is_zero()
    L3 = build_operator(model.monodromy, m + 1, P, strict=False)
    assert via_commutator == genus0_residual(L3, g.ring, bad, D, W).scale(m - 1)


def test_not_semisimple_refusal():
    p = load_model("p1xp1")
    other = FrobeniusModel("other", p.monodromy, p.poly_terms, p.q_terms,
                           list(zip(p.qnames, p.directions)), q_order=p.q_order)
    with pytest.raises(NotSemisimple):
        evaluate_A1(other, 0, 2, 1)


def test_cutoff_incompatibility():
    with pytest.raises(CutoffIncompatible):
        evaluate_A0("n1", 3, 2, 3)
    with pytest.raises(CutoffIncompatible):
        g = Genus0(load_model("n1"), 3, 3)
        evaluate_A0("n1", 0, 3, 4, genus0=g)
    assert window(2, 5) == 3 and window(-1, 5) == 5


def test_report_json():
    r = evaluate_A0("n1", 0, 3, 3)
    doc = r.to_json()
    assert doc == {"model": "trivial-n1", "m": 0, "genus": 0, "order": 3, "P": 3,
                   "level_window": 3, "pass": True, "nonzero_terms": 0, "first_failure": None}
