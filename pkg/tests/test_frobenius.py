import json
from fractions import Fraction
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from frobvir.exactmath import TruncSeries
from frobvir.monodromy import load_monodromy
from frobvir.frobenius import (
    FrobeniusModel, load_model, structure_constants, wdvv_residuals, unity_residuals,
    quasihomogeneity_residual, theta, pairing_residuals, omega, omega_e_residuals,
    omega_euler_residuals, omega_shift_residuals, potential_from_omega, integrate_closed,
    IntegrabilityError, CutoffExhausted, Genus0, genus0_solution, genus0_free_energy,
    canonical_frame, SemisimplicityError, g_function, g_gradient_residuals, euler_power_row,
    log_det_residuals, genus1_free_energy, novikov_terms_from_tables, VandermondeDegenerate,
)
from frobvir.virasoro import coupling_name

F = Fraction
ORDERS = {"trivial-n1": 3, "cp1": 4, "p1xp1": 4, "cp3": 3}


@pytest.fixture(scope="module")
def tables():
    out = {}
    for name, order in ORDERS.items():
        model = load_model(name)
        th = theta(model, 5, order)
        out[name] = (model, th, omega(model, 2, order, th))
    return out


# models

@pytest.mark.parametrize("name", ["p1xp1", "cp3"])
def test_bundle_matches_genus_zero_engine(name):
    model = load_model(name)
    assert model.q_terms == novikov_terms_from_tables(name, model.q_order)


@pytest.mark.parametrize("name", list(ORDERS))
def test_bundle_roundtrip_and_euler_data(name):
    model = load_model(name)
    doc = json.loads(resources.files("frobvir.models").joinpath(f"{name}.model.json").read_text())
    assert model.to_json() == doc
    derived = FrobeniusModel(name, load_monodromy(name), model.poly_terms)
    assert derived.euler_degrees == model.euler_degrees
    assert derived.euler_constants == model.euler_constants


def test_alias_and_euler_values():
    assert load_model("n1").name == "trivial-n1"
    cp1 = load_model("cp1")
    assert cp1.euler_degrees == [1, 0] and cp1.euler_constants == [0, 2]
    assert load_model("p1xp1").euler_degrees == [1, 0, 0, -1]
    assert load_model("cp3").euler_constants == [0, 4, 0, 0]


def test_stored_order_is_enforced():
    model = load_model("cp3")
    with pytest.raises(CutoffExhausted):
        model.potential(model.q_order + 1)


# structure constants

def test_trivial_structure_constant():
    c = structure_constants(load_model("n1"), 2)
    assert c[0][0][0] == c[0][0][0].scale(0) + 1


def test_cp1_c22_1_is_novikov_marker():
    model = load_model("cp1")
    c = structure_constants(model, 3)
    assert c[1][1][0] == TruncSeries.variable(model.vars, 3, "Q", weights=model.weights)


@pytest.mark.parametrize("name", list(ORDERS))
def test_wdvv_unity_quasihomogeneity(name):
    model = load_model(name)
    order = ORDERS[name]
    assert wdvv_residuals(model, order) == {}
    assert unity_residuals(model, order) == {}
    assert quasihomogeneity_residual(model, order).is_zero()


def test_p1xp1_associativity_to_degree_three():
    assert wdvv_residuals(load_model("p1xp1"), 3) == {}


def test_wdvv_detects_corrupted_potential():
    good = load_model("p1xp1")
    terms = dict(good.q_terms)
    key = (0, 0, 0, 3, 1, 1)
    terms[key] += 1
    bad = FrobeniusModel("bad", good.monodromy, good.poly_terms, terms,
                         list(zip(good.qnames, good.directions)), q_order=4)
    assert wdvv_residuals(bad, 3)


# theta

def test_theta_trivial_model(tables):
    model, th, _ = tables["trivial-n1"]
    for p in range(5):
        expect = TruncSeries.monomial(model.vars, th.order, (p + 1,), F(1, _fact(p + 1)),
                                      model.weights)
        assert th[(0, p)] == expect


def _fact(k):
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


@pytest.mark.parametrize("name", list(ORDERS))
def test_theta_level_zero(tables, name):
    model, th, _ = tables[name]
    for a in range(model.n):
        expect = sum((model.t(b, th.order).scale(model.eta[a][b]) for b in range(model.n)),
                     model.constant(0, th.order))
        assert th[(a, 0)] == expect


def test_cp1_theta_2_1(tables):
    model, th, _ = tables["cp1"]
    q = (0, 0, 1)
    assert th[(1, 1)].coefficient(q) == 1
    assert th[(1, 1)].coefficient((2, 0, 0)) == F(1, 2)


@pytest.mark.parametrize("name", list(ORDERS))
def test_theta_recursion_and_pairing(tables, name):
    model, th, _ = tables[name]
    c = structure_constants(model, th.order)
    n = model.n
    for a in range(n):
        for p in range(th.p_max):
            grad = th.gradient(a, p)
            for g in range(n):
                for b in range(n):
                    lhs = model.D(g, model.D(b, th[(a, p + 1)]))
                    rhs = sum((c[g][b][e] * grad[e] for e in range(n)), model.constant(0, th.order))
                    assert lhs == rhs
    assert pairing_residuals(model, th) == {}


def test_resonant_slots_recorded(tables):
    _, th, _ = tables["p1xp1"]
    assert th.resonant
    assert all(p + th.model.mu[g] + th.model.mu[a] == 0 for a, p, g in th.resonant)
    assert tables["trivial-n1"][1].resonant == []


def test_integration_rejects_non_closed_form():
    model = load_model("cp1")
    t1 = model.t(0, 2)
    with pytest.raises(IntegrabilityError):
        integrate_closed(model, [model.t(1, 2), t1.scale(2)])


# omega

@pytest.mark.parametrize("name", list(ORDERS))
def test_omega_identities(tables, name):
    model, _, om = tables[name]
    Fp = model.potential(om.order)
    for a in range(model.n):
        for b in range(model.n):
            assert om[(a, 0, b, 0)] == model.D(a, model.D(b, Fp))
    assert omega_shift_residuals(model, om, 2) == {}
    assert omega_e_residuals(model, om, 2) == {}
    assert omega_euler_residuals(model, om, 2) == {}
    assert (potential_from_omega(model, om) - Fp).is_zero()


def test_omega_gradient_rule(tables):
    # d_g Omega_{a,p;b,q} = d_x theta_{a,p} eta^{xz} c^y_{gz} d_y theta_{b,q}
    model, th, om = tables["cp1"]
    n = model.n
    c = structure_constants(model, om.order)
    for (a, p, b, q), w in om.entries.items():
        ga, gb = th.gradient(a, p), th.gradient(b, q)
        for g in range(n):
            rhs = model.constant(0, om.order)
            for x in range(n):
                for z in range(n):
                    if not model.eta_inv[x][z]:
                        continue
                    for y in range(n):
                        rhs = rhs + (ga[x] * c[g][z][y] * gb[y]).scale(model.eta_inv[x][z])
            assert model.D(g, w) == rhs


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1), st.integers(0, 1))
def test_omega_symmetric(a, p, b, q):
    om = _cp1_omega()
    assert om[(a, p, b, q)] == om[(b, q, a, p)]


_CACHE = {}


def _cp1_omega():
    if "cp1" not in _CACHE:
        _CACHE["cp1"] = omega(load_model("cp1"), 2, 3)
    return _CACHE["cp1"]


# genus 0

def _levels_above_zero(ring):
    return [x for x in ring.names if not x.endswith("_0")]


@pytest.mark.parametrize("name,P,D", [("trivial-n1", 3, 5), ("cp1", 2, 4), ("p1xp1", 2, 3),
                                      ("cp3", 2, 3)])
def test_genus0_restriction_and_fixed_point(name, P, D):
    model = load_model(name)
    g = Genus0(model, P, D)
    hi = _levels_above_zero(g.ring)
    for a, t in enumerate(g.t0()):
        assert t.set_zero(hi) == g.ring.var(a, 0)
    assert all(r.is_zero() for r in g.fixed_point_residual())
    rest = g.free_energy().set_zero(hi)
    mapping = {f"t{a + 1}": coupling_name(a, 0) for a in range(model.n)}
    expect = model.potential(D).regrade(None, D)
    names = [mapping.get(v, v) for v in expect.variables]
    assert dict(rest.project(names).items()) == dict(expect.items())


def test_trivial_first_order_in_t11():
    t0 = genus0_solution("n1", 2, 4)[0]
    e = tuple(1 if v == "T1_0" else 0 for v in t0.variables)
    assert t0.coefficient(e) == 1
    e2 = tuple({"T1_0": 2, "T1_1": 0, "T1_2": 1}.get(v, 0) for v in t0.variables)
    assert t0.coefficient(e2) == F(1, 2)
    e3 = tuple({"T1_0": 1, "T1_1": 1}.get(v, 0) for v in t0.variables)
    assert t0.coefficient(e3) == 1


def test_trivial_free_energy_values():
    F0 = genus0_free_energy("n1", 3, 5)
    names = F0.variables

    def coeff(**k):
        return F0.coefficient(tuple(k.get(v, 0) for v in names))

    assert coeff(T1_0=3) == F(1, 6)
    assert coeff(T1_0=3, T1_1=1) == F(1, 6)
    assert coeff(T1_0=4, T1_2=1) == F(1, 24)
    assert coeff(T1_0=3, T1_1=2) == F(1, 6)


def _dilaton(ring, s):
    """sum Tt^{a,p} d/dT^{a,p} applied to s."""
    out = ring.zero(s.cutoff - 1)
    for p in range(ring.P + 1):
        for a in range(ring.model.n):
            d = ring.d(s, a, p)
            if d.is_zero():
                continue
            out = out + ring.times_var(d, a, p)
            if (a, p) == (ring.model.unit, 1):
                out = out - d
    return out


@pytest.mark.parametrize("name,P,D", [("trivial-n1", 3, 4), ("cp1", 2, 4), ("p1xp1", 2, 3)])
def test_homogeneity(name, P, D):
    g = Genus0(load_model(name), P, D)
    for t in g.t0():
        assert _dilaton(g.ring, t).truncate(D - 1).is_zero()
    F0 = g.free_energy()
    assert (_dilaton(g.ring, F0) - F0.scale(2)).truncate(D - 1).is_zero()


def test_second_derivatives_are_two_point_functions():
    model = load_model("cp1")
    D = 4
    g = Genus0(model, 2, D)
    F0 = g.free_energy()
    for x in [(0, 0), (1, 0), (0, 1), (1, 1), (1, 2)]:
        for y in [(0, 0), (1, 1), (0, 2)]:
            lhs = g.ring.d(g.ring.d(F0, *x), *y).truncate(D - 2)
            om = g.omega_total(x[0], x[1], y[0], y[1], D - 2)
            rhs = g.composer(om, D - 2)
            assert lhs == rhs.truncate(D - 2), (x, y)


# canonical coordinates

def test_cp1_canonical_frame():
    cf = canonical_frame("cp1", 4)
    assert [u.constant_term() for u in cf.u] == [-2, 2]
    assert all(r.is_zero() for r in cf.gram_residual().values())
    assert all(r.is_zero() for r in cf.euler_residual())
    assert all(r.is_zero() for r in cf.eigen_residual())
    assert all(r.is_zero() for r in cf.h_residual())
    assert [s.constant_term() for s in cf.psi1_sq] == [F(-1, 2), F(1, 2)]


def test_canonical_frame_refuses_degenerate_point():
    cp1 = load_model("cp1")
    flat = FrobeniusModel("flat", cp1.monodromy, {(2, 1, 0): F(1, 2)}, {}, [("Q", 1)])
    with pytest.raises(SemisimplicityError):
        canonical_frame(flat, 3)


# G-function

def test_cp1_g_function():
    model = load_model("cp1")
    G = g_function(model, 4)
    assert G == TruncSeries.variable(model.vars, 4, "t2", F(-1, 24), model.weights)
    _, rhs = euler_power_row(model, 4, 1)
    assert rhs.constant_term() == F(-1, 12)
    # the k = 2 row is not part of the n = 2 system; it holds anyway
    row, value = euler_power_row(model, 4, 2)
    grad = [model.D(a, G) for a in range(2)]
    assert sum((r * g for r, g in zip(row, grad)), -value).is_zero()


def test_trivial_g_function():
    assert g_function("n1", 3).is_zero()


def test_p1xp1_g_function_polynomial_part():
    model = load_model("p1xp1")
    G = g_function(model, 4)
    assert G.coefficient((0, 1, 0, 0, 0, 0)) == F(-1, 12)
    assert G.coefficient((0, 0, 1, 0, 0, 0)) == F(-1, 12)
    assert G.coefficient((0, 0, 0, 8, 2, 2)) == F(1, _fact(8))
    assert all(r.is_zero() for r in g_gradient_residuals(model, G, 4))


def test_cp3_g_function_system():
    model = load_model("cp3")
    G = g_function(model, 3)
    assert G.coefficient((0, 1, 0, 0, 0)) == F(-1, 4)
    assert all(r.is_zero() for r in g_gradient_residuals(model, G, 3))


def test_g_function_derivative_along_unit_vanishes():
    for name in ORDERS:
        model = load_model(name)
        G = g_function(model, 3)
        assert model.D(model.unit, G).is_zero()


def test_g_function_without_route_is_degenerate():
    p = load_model("p1xp1")
    other = FrobeniusModel("other", p.monodromy, p.poly_terms, p.q_terms,
                           list(zip(p.qnames, p.directions)), q_order=p.q_order)
    with pytest.raises(VandermondeDegenerate):
        g_function(other, 2)


# genus 1

@pytest.mark.parametrize("name,order", [("trivial-n1", 4), ("cp1", 4), ("p1xp1", 3), ("cp3", 2)])
def test_log_det_identities(name, order):
    res = log_det_residuals(name, order)
    assert res["lie_e"].is_zero()
    assert res["lie_E"].is_zero()
    assert res["scaling"].is_zero()


def test_trivial_genus_one_values():
    F1 = genus1_free_energy("n1", 3, 3)
    names = F1.variables

    def coeff(**k):
        return F1.coefficient(tuple(k.get(v, 0) for v in names))

    # 1/24 log(1/(1 - T1)) plus the T0 T2 correction
    assert coeff(T1_1=1) == F(1, 24)
    assert coeff(T1_1=2) == F(1, 48)
    assert coeff(T1_1=3) == F(1, 72)
    assert coeff(T1_0=1, T1_2=1) == F(1, 24)


def test_cp1_genus_one_contains_g():
    F1 = genus1_free_energy("cp1", 2, 2)
    e = tuple(1 if v == "T2_0" else 0 for v in F1.variables)
    assert F1.coefficient(e) == F(-1, 24)
