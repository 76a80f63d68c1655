"""Gromov-Witten number engines for P1xP1 and CP3.

Genus 0: the closed bidegree recursion for P1xP1 and a WDVV solve of the
CP3 potential ansatz.  Genus 1: the three linear equations for the
gradient of the G-function, expanded in Novikov monomials and solved
degree by degree.  The equations overdetermine the unknowns; every row is
checked on the solution.

Novikov variables: for P1xP1, Q1 = e^{z1}, Q2 = e^{z2}; a subscript i on f
means the z_i derivative, i.e. Q_i d/dQ_i.  For CP3 the variables are the
plain z1 = t4/t3^2 and Q = e^{z2}; f_1 = d/dz1 and f_2 = Q d/dQ.
"""

import csv
import io
import json
from fractions import Fraction
from math import comb, factorial

from .exactmath import (
    TruncSeries, solve_consistent_exact, InconsistentSystemError, SingularMatrixError,
    rational_str,
)


class EllipticInconsistency(ArithmeticError):
    def __init__(self, target, degree, row, residual):
        super().__init__(
            f"{target}: elliptic system inconsistent at degree {degree} "
            f"(row {row}, residual {rational_str(residual)})")
        self.target = target
        self.degree = degree
        self.row = row
        self.residual = residual


class WDVVInconsistency(ArithmeticError):
    pass


class GWTable:
    """Exact invariants of one target and genus, keyed by index pairs."""

    def __init__(self, target, genus, entries, extra=None):
        self.target = target
        self.genus = genus
        self.entries = dict(entries)
        self.extra = dict(extra or {})

    def __getitem__(self, key):
        return self.entries[key]

    def get(self, key, default=None):
        return self.entries.get(key, default)

    def __len__(self):
        return len(self.entries)

    def keys(self):
        return self.entries.keys()

    def items(self):
        return self.entries.items()


# genus 0

def p1p1_rational(max_total):
    """N0_{k,l} for k + l <= max_total by the bidegree recursion."""
    if max_total < 1:
        raise ValueError("max_total must be at least 1")
    N = {}
    for total in range(1, max_total + 1):
        for k in range(total + 1):
            l = total - k
            if k == 0 or l == 0:
                N[(k, l)] = 1 if total == 1 else 0
                continue
            s = 0
            for k1 in range(k + 1):
                k2 = k - k1
                for l1 in range(l + 1):
                    l2 = l - l1
                    a = N.get((k1, l1), 0)
                    b = N.get((k2, l2), 0)
                    if not a or not b:
                        continue
                    top = 2 * total - 4
                    bot = 2 * (k1 + l1)
                    w = (k1 * l2 + k2 * l1) * l2 * (k1 * _binom(top, bot - 2)
                                                    - k2 * _binom(top, bot - 3))
                    s += w * a * b
            N[(k, l)] = s
    return GWTable("p1xp1", 0, N)


def _binom(n, k):
    return comb(n, k) if 0 <= k <= n else 0


def _third_derivatives(F, derivs, n):
    out = {}
    for a in range(n):
        fa = derivs[a](F)
        for b in range(a, n):
            fab = derivs[b](fa)
            for c in range(b, n):
                out[(a, b, c)] = derivs[c](fab)
    return lambda a, b, c: out[tuple(sorted((a, b, c)))]


def _wdvv(T1, T2, eta_inv, idx, deg):
    """Coefficient rows of the associativity residuals in a fixed degree."""
    res = {}
    n = len(eta_inv)
    for a in idx:
        for b in idx:
            for c in idx:
                for d in idx:
                    if (a, b) >= (c, d) or a == c:
                        continue
                    total = None
                    for e in range(n):
                        for f in range(n):
                            g = eta_inv[e][f]
                            if not g:
                                continue
                            term = (T1(a, b, e) * T2(f, c, d) - T1(a, c, e) * T2(f, b, d)).scale(g)
                            total = term if total is None else total + term
                    res[(a, b, c, d)] = total.homogeneous_part(deg)
    return res


def wdvv_solve(variables, weights, eta_inv, derivs, cubic, ansatz, max_degree, seeds,
               skip=(0,)):
    """Fix the unknown coefficients of a potential ansatz by associativity.

    ``ansatz(deg)`` lists (key, series) pairs, each series being the term
    multiplying the unknown.  ``seeds`` pins keys left free by rescalings of
    the Novikov variables.  Index ``skip`` (the unit) gives trivial rows.
    """
    n = len(eta_inv)
    idx = [i for i in range(n) if i not in skip]
    known = cubic
    values = {}
    for deg in range(1, max_degree + 1):
        basis = ansatz(deg)
        keys = [k for k, _ in basis]
        Tk = _third_derivatives(known.truncate(deg), derivs, n)
        rhs_parts = _wdvv(Tk, Tk, eta_inv, idx, deg)
        Tc = _third_derivatives(cubic.truncate(deg), derivs, n)
        lin = []
        for _, phi in basis:
            Tp = _third_derivatives(phi, derivs, n)
            a = _wdvv(Tc, Tp, eta_inv, idx, deg)
            b = _wdvv(Tp, Tc, eta_inv, idx, deg)
            lin.append({q: a[q] + b[q] for q in a})
        rows, rhs = [], []
        for q, r in rhs_parts.items():
            monos = set(e for e, _ in r.items())
            for part in lin:
                monos.update(e for e, _ in part[q].items())
            for m in sorted(monos):
                rows.append([part[q].coefficient(m) for part in lin])
                rhs.append(-r.coefficient(m))
        for key, value in seeds.items():
            if key in keys:
                rows.append([int(k == key) for k in keys])
                rhs.append(value)
        try:
            sol = solve_consistent_exact(rows, rhs, len(keys))
        except (InconsistentSystemError, SingularMatrixError) as exc:
            raise WDVVInconsistency(f"associativity solve failed at degree {deg}: {exc}")
        for key, (_, phi), v in zip(keys, basis, sol):
            values[key] = v
            if v:
                known = known + phi.scale(v)
    return values, known


def _cp3_frame(cutoff):
    vs = ("t1", "t2", "t3", "t4", "Q")
    w = (0, 0, 0, 0, 1)

    def d(i):
        name = vs[i]
        if i == 1:
            return lambda s: s.diff(name) + s.euler("Q")
        return lambda s: s.diff(name)
    return vs, w, [d(i) for i in range(4)]


def cp3_monomial(k, l, cutoff):
    """z1^l e^{k z2} = t4^l t3^(4k-2l) Q^k in flat variables."""
    vs, w, _ = _cp3_frame(cutoff)
    return TruncSeries(vs, cutoff, {(0, 0, 4 * k - 2 * l, l, k): 1}, w)


def cp3_rational(max_degree):
    """N0_{4k-2l,l}: degree-k rational curves through l points and 4k-2l lines."""
    if max_degree < 1:
        raise ValueError("max_degree must be at least 1")
    vs, w, derivs = _cp3_frame(max_degree)
    cubic = TruncSeries(vs, max_degree, {
        (2, 0, 0, 1, 0): Fraction(1, 2), (1, 1, 1, 0, 0): 1, (0, 3, 0, 0, 0): Fraction(1, 6)}, w)
    eta_inv = [[int(i + j == 3) for j in range(4)] for i in range(4)]

    def ansatz(k):
        return [((4 * k - 2 * l, l),
                 cp3_monomial(k, l, max_degree).scale(
                     Fraction(1, factorial(4 * k - 2 * l) * factorial(l))))
                for l in range(2 * k + 1)]
    # one line through two points; fixes the rescaling freedom of Q
    values, _ = wdvv_solve(vs, w, eta_inv, derivs, cubic, ansatz, max_degree, {(0, 2): 1})
    entries = {}
    for (lines, points), v in values.items():
        k = (lines + 2 * points) // 4
        entries[(k, points)] = v
    return GWTable("cp3", 0, entries)


def p1p1_rational_wdvv(max_total):
    """The P1xP1 genus-0 numbers recomputed by associativity of the ansatz."""
    vs = ("t1", "t2", "t3", "t4", "Q1", "Q2")
    w = (0, 0, 0, 0, 1, 1)
    cut = max_total

    def d(i):
        name = vs[i]
        if i == 1:
            return lambda s: s.diff(name) + s.euler("Q1")
        if i == 2:
            return lambda s: s.diff(name) + s.euler("Q2")
        return lambda s: s.diff(name)
    derivs = [d(i) for i in range(4)]
    cubic = TruncSeries(vs, cut, {(2, 0, 0, 1, 0, 0): Fraction(1, 2), (1, 1, 1, 0, 0, 0): 1}, w)
    eta_inv = [[int(i + j == 3) for j in range(4)] for i in range(4)]

    def ansatz(total):
        return [((k, total - k),
                 TruncSeries(vs, cut, {(0, 0, 0, 2 * total - 1, k, total - k):
                                       Fraction(1, factorial(2 * total - 1))}, w))
                for k in range(total + 1)]
    values, _ = wdvv_solve(vs, w, eta_inv, derivs, cubic, ansatz, max_total,
                           {(1, 0): 1, (0, 1): 1})
    return GWTable("p1xp1", 0, values)


# genus 1

def _solve_gradient(target, eqs, grad, unknowns, top, assert_integer=False):
    """Degree-by-degree solve of sum_i M[e][i] X_i(g) = rhs[e].

    ``grad(g)`` returns the gradient-component series X_i for a candidate
    G-correction ``g``; ``unknowns(deg)`` returns (key, basis series) pairs.
    Coefficient matrices may have degree-0 parts depending on weight-0
    variables; their action on a new unknown is taken exactly.
    """
    M, rhs = eqs
    template = rhs[0]
    g = template.scale(0)
    values = {}
    rows_checked = 0
    M0 = [[m.homogeneous_part(0) for m in row] for row in M]

    def residual(g, deg):
        X = grad(g)
        out = []
        for row, r in zip(M, rhs):
            total = -r
            for m, x in zip(row, X):
                total = total + m * x
            out.append(total.homogeneous_part(deg))
        return out

    for r, e in enumerate(residual(g, 0)):
        if not e.is_zero():
            m, v = next(iter(e.items()))
            raise EllipticInconsistency(target, 0, r, v)
    for deg in range(1, top + 1):
        basis = unknowns(deg)
        res = residual(g, deg)
        contrib = []
        for _, phi in basis:
            X = grad(phi)
            contrib.append([sum((m0 * x for m0, x in zip(row, X)), template.scale(0))
                            .homogeneous_part(deg) for row in M0])
        rows, b, labels = [], [], []
        monos = set()
        for e, r in enumerate(res):
            monos.update(m for m, _ in r.items())
            for c in contrib:
                monos.update(m for m, _ in c[e].items())
        for e, r in enumerate(res):
            for m in sorted(monos):
                rows.append([c[e].coefficient(m) for c in contrib])
                b.append(-r.coefficient(m))
                labels.append((e, m))
        try:
            sol = solve_consistent_exact(rows, b, len(basis))
        except InconsistentSystemError as exc:
            raise EllipticInconsistency(target, deg, labels[exc.row], exc.residual)
        rows_checked += len(rows)
        for (key, phi), v in zip(basis, sol):
            values[key] = v
            if v:
                g = g + phi.scale(v)
    for deg in range(1, top + 1):
        for r, e in enumerate(residual(g, deg)):
            if not e.is_zero():
                m, v = next(iter(e.items()))
                raise EllipticInconsistency(target, deg, r, v)
    return values, g, rows_checked


def _z_derivs_p1p1(f):
    d = {"": f}
    for word in ("1", "2", "11", "12", "22", "112", "122"):
        s = f
        for ch in word:
            s = s.euler("Q" + ch)
        d[word] = s
    return d


def p1p1_potential_part(table, max_total):
    """f(z1, z2) = sum N0_{k,l} / (2(k+l)-1)! Q1^k Q2^l."""
    coeffs = {(k, l): Fraction(v, factorial(2 * (k + l) - 1))
              for (k, l), v in table.items() if v and k + l <= max_total}
    return TruncSeries(("Q1", "Q2"), max_total, coeffs)


def p1p1_system(f):
    """The three gradient equations, as coefficient rows over (G2, G3, t4 G4)."""
    d = _z_derivs_p1p1(f)
    f1, f2, f11, f12, f22, f112, f122 = (d[k] for k in ("1", "2", "11", "12", "22", "112", "122"))
    one = f.scale(0) + 1
    M = [
        [one.scale(2), one.scale(2), -one],
        [f2 - f22 - f12, f1 - f12 - f11, one.scale(4)],
        [f2.scale(4) - f22.scale(12) - f1.scale(4) - f22 * f1 - f12.scale(8) - f2 * f12
         + (f22 * f12).scale(2) + f12 * f12 + f11.scale(4) + f22 * f11,
         -f2.scale(4) + f22.scale(4) + f1.scale(4) - f12.scale(8) - f1 * f12 + f12 * f12
         - f11.scale(12) - f2 * f11 + f22 * f11 + (f12 * f11).scale(2),
         one.scale(0)],
    ]
    rhs = [
        one.scale(Fraction(-1, 3)),
        (f122 + f112).scale(Fraction(1, 12)),
        (f22.scale(2) + f12.scale(4) + f11.scale(2)).scale(Fraction(1, 3))
        - (f12 * f122 + f122 * f11 + f22 * f112 + f12 * f112).scale(Fraction(1, 12)),
    ]
    return M, rhs


def p1p1_gradient(g):
    """(G2, G3, t4 G4) for G = -t2/12 - t3/12 + g(z1, z2)."""
    g1, g2 = g.euler("Q1"), g.euler("Q2")
    return [g1 - Fraction(1, 12), g2 - Fraction(1, 12), (g1 + g2).scale(2)]


def p1p1_elliptic(max_total, rational=None):
    """N1_{k,l} (k, l >= 1, k + l <= max_total) from the gradient system."""
    if rational is None:
        rational = p1p1_rational(max_total)
    f = p1p1_potential_part(rational, max_total)

    def unknowns(total):
        return [((k, total - k),
                 TruncSeries(("Q1", "Q2"), max_total, {(k, total - k): 1})
                 .scale(Fraction(1, factorial(2 * total))))
                for k in range(1, total)]
    values, g, checked = _solve_gradient("p1xp1", p1p1_system(f), p1p1_gradient,
                                         unknowns, max_total)
    for key, v in values.items():
        if v.denominator != 1:
            raise ArithmeticError(f"N1{key} = {v} is not an integer")
        values[key] = int(v)
    return GWTable("p1xp1", 1, values, {"rows_checked": checked, "g": g})


CP3_W = (0, 1)
CP3_VARS = ("z1", "Q")


def cp3_potential_part(table, max_degree):
    """f(z1, z2) = sum N0_{4k-2l,l} / ((4k-2l)! l!) z1^l Q^k."""
    coeffs = {}
    for (k, l), v in table.items():
        if v and k <= max_degree:
            coeffs[(l, k)] = Fraction(v, factorial(4 * k - 2 * l) * factorial(l))
    return TruncSeries(CP3_VARS, max_degree, coeffs, CP3_W)


def cp3_system(f):
    """The three CP3 gradient equations over (G2, t3 G3, t3^2 G4)."""
    D = {"1": lambda s: s.diff("z1"), "2": lambda s: s.euler("Q")}
    d = {}
    for word in ("1", "2", "11", "12", "22", "112", "122", "222"):
        s = f
        for ch in word:
            s = D[ch](s)
        d[word] = s
    f1, f2, f11, f12, f22, f112, f122, f222 = (
        d[k] for k in ("1", "2", "11", "12", "22", "112", "122", "222"))
    one = f.scale(0) + 1
    z = TruncSeries.variable(CP3_VARS, f.cutoff, "z1", weights=CP3_W)
    z2, z3 = z * z, z * z * z
    F = Fraction
    M = [
        [one.scale(4), -one, z.scale(-2)],
        [f22.scale(4) - f2.scale(2) - z2 * f11,
         f22 - 4 + (z * f12).scale(F(1, 2)),
         one.scale(2)],
        [f2.scale(16) - f22.scale(64) - (f2 * f22).scale(8) + (f22 * f22).scale(24)
         - f1.scale(9) - (z * f1).scale(24) + (z * f22 * f1).scale(6) + f12.scale(14)
         + (z * f12).scale(64) - (z * f22 * f12).scale(12) + (z2 * f1 * f12).scale(3)
         - (z2 * f12 * f12).scale(8)
         + z * (-5 - z.scale(16) + (z * f22).scale(2) + (z2 * f12).scale(3)) * f11,
         (f2.scale(-16) + (f22 * f22).scale(8) + f1.scale(3) + f12.scale(6)
          + (z * f12).scale(16) - (z2 * f12 * f12).scale(2)
          - z * (1 + z.scale(8)) * f11).scale(F(1, 4)),
         f2 - 8 + (z * f1).scale(F(3, 2))],
    ]
    rhs = [
        one.scale(-1),
        (f22 - f222.scale(2)).scale(F(1, 6)) + (z2 * f112).scale(F(1, 12)),
        (f2.scale(-12) + f22.scale(72) + (f22 * f22).scale(16) - f222.scale(96)
         - (f2 * f222).scale(12) + (f22 * f222).scale(16) + f1.scale(24) + (z * f1).scale(18)
         + (z * f222 * f1).scale(12) + f12.scale(16) - (z * f12).scale(84)
         - (z * f22 * f12).scale(12) - (z * f222 * f12).scale(28)
         + (z * f122).scale(96) + (z * f2 * f122).scale(6) - (z * f22 * f122).scale(12)
         - (z2 * f1 * f122).scale(6)
         + (z2 * f12 * f122).scale(20) + (z * f11).scale(3) + (z2 * f11).scale(12)
         + (z2 * f222 * f11).scale(6) - (z3 * f122 * f11).scale(3)
         - z2 * (24 - f22.scale(2) + (z * f12).scale(3)) * f112).scale(F(1, 24)),
    ]
    return M, rhs


def cp3_gradient(g):
    """(G2, t3 G3, t3^2 G4) for G = -t2/4 + g(z1, z2).

    With z1 = t4/t3^2 and z2 = t2 + 4 log t3 the chain rule gives
    t3 G3 = -2 z1 g_1 + 4 g_2 and t3^2 G4 = g_1.
    """
    g1, g2 = g.diff("z1"), g.euler("Q")
    z = TruncSeries.variable(CP3_VARS, g.cutoff, "z1", weights=CP3_W)
    return [g2 - Fraction(1, 4), g2.scale(4) - (z * g1).scale(2), g1]


def cp3_elliptic(max_degree, rational=None):
    """N1_{4k-2l,l} and the elliptic counts E_{k,l} = N1 + (2k-1)/12 N0."""
    if rational is None:
        rational = cp3_rational(max_degree)
    f = cp3_potential_part(rational, max_degree)

    def unknowns(k):
        return [((k, l), TruncSeries(CP3_VARS, max_degree, {(l, k): 1}, CP3_W)
                 .scale(Fraction(1, factorial(4 * k - 2 * l) * factorial(l))))
                for l in range(2 * k + 1)]
    values, g, checked = _solve_gradient("cp3", cp3_system(f), cp3_gradient,
                                         unknowns, max_degree)
    elliptic = {(k, l): v + Fraction(2 * k - 1, 12) * rational[(k, l)]
                for (k, l), v in values.items()}
    grad = cp3_gradient(g)
    return GWTable("cp3", 1, values, {
        "rows_checked": checked, "g": g, "elliptic": elliptic,
        "g2_constant": grad[0].constant_term()})


# output

def table_rows(target, genus, bound):
    """Header and rows of the requested table; values are exact strings."""
    if genus not in (0, 1):
        raise ValueError("genus must be 0 or 1")
    if target == "p1xp1":
        n0 = p1p1_rational(bound)
        if genus == 0:
            header = ["k", "l", "N0"]
            rows = [[k, l, n0[(k, l)]] for (k, l) in sorted(n0.keys(), key=lambda x: (sum(x), -x[0]))]
        else:
            n1 = p1p1_elliptic(bound, n0)
            header = ["k", "l", "N0", "N1"]
            rows = [[k, l, n0[(k, l)], n1[(k, l)]]
                    for (k, l) in sorted(n1.keys(), key=lambda x: (sum(x), -x[0]))]
    elif target == "cp3":
        n0 = cp3_rational(bound)
        keys = sorted(n0.keys())
        if genus == 0:
            header = ["degree", "points", "lines", "N0"]
            rows = [[k, l, 4 * k - 2 * l, n0[(k, l)]] for (k, l) in keys]
        else:
            n1 = cp3_elliptic(bound, n0)
            ell = n1.extra["elliptic"]
            header = ["degree", "points", "lines", "N0", "N1", "elliptic_count"]
            rows = [[k, l, 4 * k - 2 * l, n0[(k, l)], n1[(k, l)], ell[(k, l)]] for (k, l) in keys]
    else:
        raise ValueError(f"unknown target {target!r}")
    return header, [[_cell(x) for x in row] for row in rows]


def _cell(x):
    return rational_str(x) if isinstance(x, Fraction) else str(x)


def rows_to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def rows_to_json(target, genus, header, rows):
    doc = {"target": target, "genus": genus,
           "rows": [dict(zip(header, row)) for row in rows]}
    return json.dumps(doc, indent=1) + "\n"
