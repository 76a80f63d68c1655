"""Concrete Frobenius manifolds and the genus 0/1 calculus on them.

A model is a potential F(t, Q) in flat coordinates t^1..t^n and Novikov
variables Q_j = exp(t^{a_j}).  Flat derivatives act on Q by the chain rule
D_a = d/dt^a + sum_{j: a_j = a} Q_j d/dQ_j.

Two series rings are used:

* the exact ring over (t, Q) with weight 0 on t and 1 on Q, so functions
  are exact polynomials in t inside every Novikov sector and truncated
  only in Q-degree.  The deformed flat coordinates are integrated here,
  because inverting d/dt^a + lambda inside a sector needs every t-power;
* the coupling ring over (T^{alpha,p}, Q) with every weight 1.  Q in that
  ring stands for exp(T^{a_j,0}).  Free energies live here, truncated in
  total degree.
"""

import json
from fractions import Fraction
from importlib import resources

from .exactmath import (
    TruncSeries, rational, rational_str, StructuralError, rational_sqrt,
)
from .monodromy import load_monodromy, MODEL_ALIASES
from .virasoro import coupling_name


class CutoffExhausted(ValueError):
    pass


class IntegrabilityError(ArithmeticError):
    pass


class ThetaGradingError(ArithmeticError):
    def __init__(self, alpha, p, detail):
        super().__init__(f"theta_({alpha + 1},{p}): {detail}")
        self.alpha = alpha
        self.p = p


class VandermondeDegenerate(ArithmeticError):
    pass


class SemisimplicityError(ArithmeticError):
    pass


# models

class FrobeniusModel:
    def __init__(self, name, monodromy, poly_terms, q_terms=(), novikov=(),
                 euler_degrees=None, euler_constants=None, q_order=None):
        self.name = name
        self.monodromy = monodromy
        self.n = n = monodromy.n
        self.eta = monodromy.eta
        self.eta_inv = monodromy.eta_inv
        self.mu = list(monodromy.mu_diag)
        self.charge_d = monodromy.charge_d
        self.tvars = tuple(f"t{a + 1}" for a in range(n))
        self.qnames = tuple(q for q, _ in novikov)
        self.directions = tuple(int(a) for _, a in novikov)
        self.r = len(self.qnames)
        self.vars = self.tvars + self.qnames
        self.weights = (0,) * n + (1,) * self.r
        self.poly_terms = {tuple(e): rational(v) for e, v in poly_terms.items()}
        self.q_terms = {tuple(e): rational(v) for e, v in dict(q_terms).items()}
        self.q_order = q_order
        u = monodromy.unit_index - 1
        mu1 = self.mu[u]
        r1 = monodromy.r(1)
        self.euler_degrees = ([1 + mu1 - m for m in self.mu] if euler_degrees is None
                              else [rational(x) for x in euler_degrees])
        self.euler_constants = ([r1[a][u] for a in range(n)] if euler_constants is None
                                else [rational(x) for x in euler_constants])
        self.unit = u

    def __repr__(self):
        return f"FrobeniusModel({self.name!r}, n={self.n})"

    def _check_order(self, order):
        if self.q_order is not None and self.r and order > self.q_order:
            raise CutoffExhausted(
                f"{self.name}: potential stored to Novikov degree {self.q_order}, asked {order}")

    def potential(self, order):
        """F as a series in the exact ring, Novikov terms up to ``order``."""
        self._check_order(order)
        coeffs = dict(self.poly_terms)
        for e, v in self.q_terms.items():
            coeffs[e] = coeffs.get(e, 0) + v
        return TruncSeries(self.vars, order, coeffs, self.weights)

    def D(self, a, s):
        """Flat derivative d/dt^a including the Novikov chain rule."""
        out = s.diff(self.tvars[a])
        for q, d in zip(self.qnames, self.directions):
            if d == a:
                out = out + s.euler(q)
        return out

    def euler_field(self, s):
        """E(s) = sum_a (w_a t^a + r_a) D_a s."""
        out = s.scale(0)
        for a in range(self.n):
            da = self.D(a, s)
            w, c = self.euler_degrees[a], self.euler_constants[a]
            if w:
                out = out + _times_t(da, a, w)
            if c:
                out = out + da.scale(c)
        return out

    def constant(self, value, order):
        return TruncSeries.constant(self.vars, order, value, self.weights)

    def t(self, a, order):
        return TruncSeries.variable(self.vars, order, self.tvars[a], weights=self.weights)

    def pairing(self, x, y):
        return sum((x[i] * self.eta[i][j] * y[j] for i in range(self.n)
                    for j in range(self.n) if self.eta[i][j]), Fraction(0))

    def to_json(self):
        return {
            "name": self.name,
            "monodromy": f"{self.name}.monodromy.json",
            "variables": list(self.tvars),
            "novikov": [{"name": q, "direction": a + 1}
                        for q, a in zip(self.qnames, self.directions)],
            "potential": {
                "polynomial": [{"exponents": list(e), "coeff": rational_str(v)}
                               for e, v in sorted(self.poly_terms.items())],
                "novikov_terms": [{"exponents": list(e), "coeff": rational_str(v)}
                                  for e, v in sorted(self.q_terms.items())],
                "novikov_order": self.q_order,
            },
            "euler": {"degrees": [rational_str(x) for x in self.euler_degrees],
                      "constants": [rational_str(x) for x in self.euler_constants]},
            "charge_d": rational_str(self.charge_d),
        }


def _times_t(s, a, w):
    """w * t^a * s, exponent shift (t has weight 0 in the exact ring)."""
    out = {}
    for e, v in s.items():
        f = e[:a] + (e[a] + 1,) + e[a + 1:]
        out[f] = v * w
    return TruncSeries._raw(s.variables, s.cutoff, out, s.weights)


def model_from_json(doc, monodromy=None):
    if monodromy is None:
        monodromy = load_monodromy(doc["monodromy"].replace(".monodromy.json", ""))
    pot = doc["potential"]
    poly = {tuple(t["exponents"]): t["coeff"] for t in pot.get("polynomial", [])}
    qt = {tuple(t["exponents"]): t["coeff"] for t in pot.get("novikov_terms", [])}
    nov = [(x["name"], int(x["direction"]) - 1) for x in doc.get("novikov", [])]
    eu = doc.get("euler", {})
    model = FrobeniusModel(doc["name"], monodromy, poly, qt, nov, eu.get("degrees"),
                           eu.get("constants"), pot.get("novikov_order"))
    if rational(doc.get("charge_d", model.charge_d)) != model.charge_d:
        raise StructuralError("charge in the model bundle disagrees with its monodromy data")
    return model


def load_model(source):
    """A bundled model by id (or alias), a FrobeniusModel, or a JSON path."""
    if isinstance(source, FrobeniusModel):
        return source
    key = MODEL_ALIASES.get(source, source)
    try:
        text = resources.files("frobvir.models").joinpath(f"{key}.model.json").read_text()
    except FileNotFoundError:
        with open(source) as fh:
            text = fh.read()
    return model_from_json(json.loads(text))


def novikov_terms_from_tables(name, order):
    """The Novikov part of the P1xP1 or CP3 potential from the genus-0 engines."""
    from math import factorial
    from . import gw
    terms = {}
    if name == "p1xp1":
        table = gw.p1p1_rational(order)
        for (k, l), v in table.items():
            if v:
                d = k + l
                terms[(0, 0, 0, 2 * d - 1, k, l)] = Fraction(v, factorial(2 * d - 1))
    elif name == "cp3":
        table = gw.cp3_rational(order)
        for (k, l), v in table.items():
            if v:
                terms[(0, 0, 4 * k - 2 * l, l, k)] = Fraction(
                    v, factorial(4 * k - 2 * l) * factorial(l))
    else:
        raise ValueError(f"no genus-0 engine for {name}")
    return terms


# structure constants

def third_derivatives(model, order):
    F = model.potential(order)
    n = model.n
    out = {}
    for a in range(n):
        fa = model.D(a, F)
        for b in range(a, n):
            fab = model.D(b, fa)
            for c in range(b, n):
                out[(a, b, c)] = model.D(c, fab)
    return {(a, b, c): out[tuple(sorted((a, b, c)))]
            for a in range(n) for b in range(n) for c in range(n)}


def structure_constants(model, order):
    """c[a][b][g] = c^g_{ab} = eta^{g e} d_e d_a d_b F."""
    T = third_derivatives(model, order)
    n = model.n
    zero = model.constant(0, order)
    c = [[[zero for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for a in range(n):
        for b in range(n):
            for g in range(n):
                acc = zero
                for e in range(n):
                    if model.eta_inv[g][e]:
                        acc = acc + T[(e, a, b)].scale(model.eta_inv[g][e])
                c[a][b][g] = acc
    return c


def wdvv_residuals(model, order):
    """Nonzero entries of c^e_{ab} c^d_{eg} - c^e_{ag} c^d_{eb} (empty when associative)."""
    c = structure_constants(model, order)
    n = model.n
    bad = {}
    for a in range(n):
        for b in range(n):
            for g in range(n):
                for d in range(n):
                    r = model.constant(0, order)
                    for e in range(n):
                        r = r + c[a][b][e] * c[e][g][d] - c[a][g][e] * c[e][b][d]
                    if not r.is_zero():
                        bad[(a, b, g, d)] = r
    return bad


def unity_residuals(model, order):
    T = third_derivatives(model, order)
    u = model.unit
    n = model.n
    bad = {}
    for a in range(n):
        for b in range(n):
            r = T[(u, a, b)] - model.eta[a][b]
            if not r.is_zero():
                bad[(a, b)] = r
    return bad


def quasihomogeneity_residual(model, order):
    """E F - (3 + 2 mu_1) F - 1/2 <t, R1 t> - <e1, R2 t> + 1/2 <e1, R3 e1>."""
    data = model.monodromy
    F = model.potential(order)
    n, u = model.n, model.unit
    res = model.euler_field(F) - F.scale(3 + 2 * model.mu[u])
    ts = [model.t(a, order) for a in range(n)]
    r1, r2, r3 = data.r(1), data.r(2), data.r(3)
    e1 = [Fraction(int(i == u)) for i in range(n)]
    for a in range(n):
        for b in range(n):
            w = sum((model.eta[a][g] * r1[g][b] for g in range(n)), Fraction(0))
            if w:
                res = res - (ts[a] * ts[b]).scale(w / 2)
    eta_r2 = [sum((e1[a] * model.eta[a][g] * r2[g][b] for a in range(n) for g in range(n)),
                  Fraction(0)) for b in range(n)]
    for b in range(n):
        if eta_r2[b]:
            res = res - ts[b].scale(eta_r2[b])
    res = res + model.pairing(e1, [sum((r3[i][j] * e1[j] for j in range(n)), Fraction(0))
                                   for i in range(n)]) / 2
    return res


# integration of closed one-forms in the exact ring

def _sectors(s, n):
    out = {}
    for e, v in s.items():
        out.setdefault(e[n:], {})[e[:n]] = v
    return out


def integrate_closed(model, omega):
    """A function P with D_a P = omega_a, constant term 0; verified exactly."""
    n = model.n
    secs = [_sectors(w, n) for w in omega]
    keys = set()
    for s in secs:
        keys.update(s)
    out = {}
    for q in keys:
        lam = [sum((k for k, d in zip(q, model.directions) if d == a), 0) for a in range(n)]
        if not any(lam):
            for a in range(n):
                for e, v in secs[a].get(q, {}).items():
                    f = e[:a] + (e[a] + 1,) + e[a + 1:]
                    key = f + q
                    out[key] = out.get(key, 0) + v / (sum(e) + 1)
        else:
            a = next(i for i in range(n) if lam[i])
            term = dict(secs[a].get(q, {}))
            lm = Fraction(lam[a])
            j = 0
            while term:
                c = Fraction((-1) ** (j % 2)) / lm ** (j + 1)
                for e, v in term.items():
                    key = e + q
                    out[key] = out.get(key, 0) + v * c
                nxt = {}
                for e, v in term.items():
                    if e[a]:
                        f = e[:a] + (e[a] - 1,) + e[a + 1:]
                        nxt[f] = nxt.get(f, 0) + v * e[a]
                term = {e: v for e, v in nxt.items() if v}
                j += 1
    cut = min(w.cutoff for w in omega)
    P = TruncSeries(model.vars, cut, {e: v for e, v in out.items() if v}, model.weights)
    for a in range(n):
        if model.D(a, P) != omega[a].truncate(cut):
            raise IntegrabilityError(f"one-form is not closed in direction t{a + 1}")
    return P


# deformed flat coordinates

class ThetaTable:
    def __init__(self, model, order, entries, resonant):
        self.model = model
        self.order = order
        self.entries = entries
        self.resonant = resonant

    def __getitem__(self, key):
        return self.entries[key]

    @property
    def p_max(self):
        return max(p for _, p in self.entries)

    def gradient(self, alpha, p):
        """Covector D_a theta_{alpha,p}."""
        key = ("grad", alpha, p)
        cache = self.__dict__.setdefault("_grad", {})
        if key not in cache:
            cache[key] = [self.model.D(a, self.entries[(alpha, p)]) for a in range(self.model.n)]
        return cache[key]


def _grading_tail(model, table, alpha, p, order):
    """sum_{k>=1} theta_{g,p-k} (R_k)^g_alpha."""
    out = model.constant(0, order)
    for k, rk in model.monodromy.r_parts.items():
        if p - k < 0:
            continue
        for g in range(model.n):
            if rk[g][alpha]:
                out = out + table[(g, p - k)].scale(rk[g][alpha])
    return out


def theta(model, p_max, order):
    """theta_{alpha,p} for p <= p_max, exact in t, Novikov degree <= order.

    Each level integrates c . grad(theta_{alpha,p-1}) twice.  The free
    linear terms are fixed by the grading
        E theta_{a,p} = (p + 1 + mu_1 + mu_a) theta_{a,p}
                        + sum_k theta_{g,p-k} (R_k)^g_a + const,
    and constants are set to zero.  Where p + mu_g + mu_a = 0 the linear
    coefficient is not fixed by the grading; it is set to zero (recorded in
    ``resonant``) and the grading must already hold there.
    """
    n = model.n
    c = structure_constants(model, order)
    mu1 = model.mu[model.unit]
    table = {}
    resonant = []
    for a in range(n):
        acc = model.constant(0, order)
        for b in range(n):
            if model.eta[a][b]:
                acc = acc + model.t(b, order).scale(model.eta[a][b])
        table[(a, 0)] = acc
    for p in range(1, p_max + 1):
        for alpha in range(n):
            prev = table[(alpha, p - 1)]
            grad = [model.D(e, prev) for e in range(n)]
            cols = []
            for b in range(n):
                form = []
                for g in range(n):
                    h = model.constant(0, order)
                    for e in range(n):
                        if not c[g][b][e].is_zero() and not grad[e].is_zero():
                            h = h + c[g][b][e] * grad[e]
                    form.append(h)
                cols.append(integrate_closed(model, form))
            th = integrate_closed(model, cols)
            lam = p + 1 + mu1 + model.mu[alpha]
            res = model.euler_field(th) - th.scale(lam) - _grading_tail(model, table, alpha, p, order)
            for g in range(n):
                e = tuple(int(i == g) for i in range(n)) + (0,) * model.r
                rg = res.coefficient(e)
                denom = p + model.mu[g] + model.mu[alpha]
                if denom == 0:
                    resonant.append((alpha, p, g))
                    if rg:
                        raise ThetaGradingError(alpha, p, f"resonant linear term t{g + 1} "
                                                f"has residual {rational_str(rg)}")
                    continue
                if rg:
                    th = th + model.t(g, order).scale(rg / denom)
            res = model.euler_field(th) - th.scale(lam) - _grading_tail(model, table, alpha, p, order)
            rest = res - res.constant_term()
            if not rest.is_zero():
                raise ThetaGradingError(alpha, p, f"grading residual {rest.to_str()[:80]}")
            table[(alpha, p)] = th
    return ThetaTable(model, order, table, resonant)


def pairing_residuals(model, table):
    """sum_{p+q=N} (-1)^p <grad theta_{a,p}, grad theta_{b,q}> - eta_{ab} delta_{N,0}."""
    n = model.n
    P = table.p_max
    bad = {}
    for a in range(n):
        for b in range(n):
            for N in range(P + 1):
                acc = model.constant(0, table.order)
                for p in range(N + 1):
                    acc = acc + _inner(model, table.gradient(a, p),
                                       table.gradient(b, N - p)).scale((-1) ** p)
                if N == 0:
                    acc = acc - model.eta[a][b]
                if not acc.is_zero():
                    bad[(a, b, N)] = acc
    return bad


def _inner(model, x, y):
    """eta^{ab} x_a y_b for covectors."""
    n = model.n
    acc = None
    for i in range(n):
        for j in range(n):
            g = model.eta_inv[i][j]
            if g and not x[i].is_zero() and not y[j].is_zero():
                term = (x[i] * y[j]).scale(g)
                acc = term if acc is None else acc + term
    if acc is None:
        acc = x[0].scale(0)
    return acc


# two-point functions

class OmegaTable:
    def __init__(self, model, order, entries):
        self.model = model
        self.order = order
        self.entries = entries

    def __getitem__(self, key):
        return self.entries[key]

    def get(self, a, p, b, q):
        if p < 0 or q < 0:
            return self.model.constant(0, self.order)
        return self.entries[(a, p, b, q)]


def omega(model, p_max, order, table=None):
    """Omega_{a,p;b,q} = sum_{m=0}^{q} (-1)^m <grad theta_{a,p+m+1}, grad theta_{b,q-m}>."""
    need = 2 * p_max + 1
    if table is None or table.p_max < need or table.order < order:
        table = theta(model, need, order)
    n = model.n
    out = {}
    for a in range(n):
        for p in range(p_max + 1):
            for b in range(n):
                for q in range(p_max + 1):
                    acc = model.constant(0, order)
                    for m in range(q + 1):
                        acc = acc + _inner(model, table.gradient(a, p + m + 1),
                                           table.gradient(b, q - m)).scale((-1) ** m)
                    out[(a, p, b, q)] = acc
    return OmegaTable(model, order, out)


def omega_e_residuals(model, om, p_max):
    """D_1 Omega_{a,p;b,q} - Omega_{a,p-1;b,q} - Omega_{a,p;b,q-1} - eta_{ab} [p=q=0]."""
    n = model.n
    bad = {}
    for a in range(n):
        for p in range(p_max + 1):
            for b in range(n):
                for q in range(p_max + 1):
                    r = (model.D(model.unit, om.get(a, p, b, q))
                         - om.get(a, p - 1, b, q) - om.get(a, p, b, q - 1))
                    if p == 0 and q == 0:
                        r = r - model.eta[a][b]
                    if not r.is_zero():
                        bad[(a, p, b, q)] = r
    return bad


def omega_euler_residuals(model, om, p_max):
    """The Euler-derivative identity for Omega in coefficient form."""
    n = model.n
    data = model.monodromy
    bad = {}
    for a in range(n):
        for p in range(p_max + 1):
            for b in range(n):
                for q in range(p_max + 1):
                    w = om.get(a, p, b, q)
                    r = model.euler_field(w) - w.scale(p + q + 1 + model.mu[a] + model.mu[b])
                    for k, rk in data.r_parts.items():
                        for g in range(n):
                            if rk[g][a] and p - k >= 0:
                                r = r - om.get(g, p - k, b, q).scale(rk[g][a])
                            if rk[g][b] and q - k >= 0:
                                r = r - om.get(a, p, g, q - k).scale(rk[g][b])
                    rr = data.r(p + q + 1)
                    const = sum((model.eta[a][g] * rr[g][b] for g in range(n)), Fraction(0))
                    r = r - const * (-1) ** p
                    if not r.is_zero():
                        bad[(a, p, b, q)] = r
    return bad


def omega_shift_residuals(model, om, p_max):
    """Omega_{a,p+1;b,q} + Omega_{a,p;b,q+1} - Omega_{a,p;s,0} eta^{sr} Omega_{r,0;b,q}."""
    n = model.n
    bad = {}
    for a in range(n):
        for p in range(p_max):
            for b in range(n):
                for q in range(p_max):
                    r = om.get(a, p + 1, b, q) + om.get(a, p, b, q + 1)
                    for s in range(n):
                        for t in range(n):
                            g = model.eta_inv[s][t]
                            if g:
                                r = r - (om.get(a, p, s, 0) * om.get(t, 0, b, q)).scale(g)
                    if not r.is_zero():
                        bad[(a, p, b, q)] = r
    return bad


def potential_from_omega(model, om):
    """1/2 [Omega_{1,1;1,1} - 2 t^a Omega_{a,0;1,1} + t^a t^b Omega_{a,0;b,0}]."""
    n, u = model.n, model.unit
    acc = om.get(u, 1, u, 1)
    for a in range(n):
        ta = model.t(a, om.order)
        acc = acc - (ta * om.get(a, 0, u, 1)).scale(2)
        for b in range(n):
            acc = acc + ta * model.t(b, om.order) * om.get(a, 0, b, 0)
    return acc.scale(Fraction(1, 2))


# the coupling ring and composition

class CouplingRing:
    """Series in the couplings T^{alpha,p} (p <= P) and the Novikov markers."""

    def __init__(self, model, P, cutoff):
        self.model = model
        self.P = P
        self.cutoff = cutoff
        n = model.n
        self.names = [coupling_name(a, p) for p in range(P + 1) for a in range(n)]
        self.vars = tuple(self.names) + model.qnames
        self.index = {name: i for i, name in enumerate(self.vars)}

    def var(self, alpha, p, cutoff=None):
        return TruncSeries.variable(self.vars, self.cutoff if cutoff is None else cutoff,
                                    coupling_name(alpha, p))

    def shifted(self, alpha, p, cutoff=None):
        """T~^{alpha,p}: the coupling, minus one at the dilaton slot."""
        v = self.var(alpha, p, cutoff)
        if alpha == self.model.unit and p == 1:
            v = v - 1
        return v

    def zero(self, cutoff=None):
        return TruncSeries.zero(self.vars, self.cutoff if cutoff is None else cutoff)

    def d(self, s, alpha, p):
        """d/dT^{alpha,p}; at p = 0 the Novikov markers exp(T^{a_j,0}) respond."""
        out = s.diff(coupling_name(alpha, p))
        if p == 0:
            for q, a in zip(self.model.qnames, self.model.directions):
                if a == alpha:
                    out = out + s.euler(q).truncate(out.cutoff)
        return out

    def times_var(self, s, alpha, p):
        i = self.index[coupling_name(alpha, p)]
        cut = s.cutoff
        out = {}
        for e, v in s.items():
            if sum(e) + 1 <= cut:
                out[e[:i] + (e[i] + 1,) + e[i + 1:]] = v
        return TruncSeries._raw(self.vars, cut, out)

    def restrict_levels(self, s, window):
        """Drop every monomial containing a coupling of level above ``window``."""
        n = self.model.n
        hi = [i for i, name in enumerate(self.names) if i // n > window]
        return s.select(lambda e: not any(e[i] for i in hi))


class Composer:
    """Evaluates series over (t, Q) at t = T0 + X, Q_j = Q_j exp(X^{a_j})."""

    def __init__(self, ring, X, cutoff):
        model = ring.model
        self.ring = ring
        self.cutoff = cutoff
        n = model.n
        bases = []
        for a in range(n):
            b = TruncSeries.variable(ring.vars, cutoff, coupling_name(a, 0))
            bases.append(b + X[a].truncate(cutoff))
        for q, a in zip(model.qnames, model.directions):
            qv = TruncSeries.variable(ring.vars, cutoff, q)
            bases.append(qv * X[a].truncate(cutoff).exp())
        self.bases = bases
        self.nvars = len(bases)
        self.cache = {(0,) * self.nvars: TruncSeries.constant(ring.vars, cutoff, 1)}

    def image(self, e):
        hit = self.cache.get(e)
        if hit is not None:
            return hit
        i = max(j for j, k in enumerate(e) if k)
        f = e[:i] + (e[i] - 1,) + e[i + 1:]
        out = self.image(f) * self.bases[i]
        self.cache[e] = out
        return out

    def __call__(self, s, cutoff=None):
        cut = self.cutoff if cutoff is None else min(cutoff, self.cutoff)
        acc = {}
        for e, v in s.items():
            if sum(e) > cut:
                continue
            for f, w in self.image(e).items():
                if sum(f) <= cut:
                    acc[f] = acc.get(f, 0) + v * w
        return TruncSeries._raw(self.ring.vars, cut, {f: v for f, v in acc.items() if v})


def _total(s, cutoff):
    """Regrade an exact-ring series to total degree with the given cutoff."""
    return s.regrade(None, cutoff)


class Genus0:
    """The genus-0 solution t0(T) and its free energy on a coupling ring."""

    def __init__(self, model, P, cutoff, table=None):
        self.model = model
        self.P = P
        self.cutoff = cutoff
        self.ring = CouplingRing(model, P, cutoff)
        model._check_order(cutoff)
        need = 2 * P + 1
        if table is None or table.p_max < need or table.order < cutoff:
            table = theta(model, need, cutoff)
        self.table = table
        n = model.n
        # grad theta_{alpha,p} raised with eta^{-1}, in total degree
        self.vec = {}
        for a in range(n):
            for p in range(need + 1):
                cov = [_total(x, cutoff) for x in table.gradient(a, p)]
                self.vec[(a, p)] = [
                    sum((cov[d].scale(model.eta_inv[g][d]) for d in range(n)
                         if model.eta_inv[g][d]), cov[0].scale(0)) for g in range(n)]
        self.cov = {k: [_total(x, cutoff) for x in table.gradient(*k)]
                    for k in self.vec}
        self.X = self._solve()
        self.composer = Composer(self.ring, self.X, cutoff)

    def _solve(self):
        ring, n = self.ring, self.model.n
        X = [ring.zero(0) for _ in range(n)]
        for it in range(1, self.cutoff + 1):
            comp = Composer(ring, [x.truncate(it - 1) for x in X], it - 1)
            new = [ring.zero(it) for _ in range(n)]
            for a in range(n):
                for p in range(1, self.P + 1):
                    v = self.vec[(a, p)]
                    for g in range(n):
                        if v[g].min_degree() is None or v[g].min_degree() > it - 1:
                            continue
                        img = comp(v[g], it - 1)
                        if not img.is_zero():
                            img = TruncSeries._raw(ring.vars, it, dict(img.items()))
                            new[g] = new[g] + ring.times_var(img, a, p)
            X = new
        return X

    def t0(self):
        n = self.model.n
        return [self.ring.var(a, 0) + self.X[a] for a in range(n)]

    def fixed_point_residual(self):
        """t0 - T0 - sum_{p>=1} T^{a,p} grad theta_{a,p}(t0), componentwise."""
        ring, n = self.ring, self.model.n
        out = []
        for g in range(n):
            acc = self.X[g]
            for a in range(n):
                for p in range(1, self.P + 1):
                    img = self.composer(self.vec[(a, p)][g], self.cutoff - 1)
                    img = TruncSeries._raw(ring.vars, self.cutoff, dict(img.items()))
                    acc = acc - ring.times_var(img, a, p)
            out.append(acc)
        return out

    def omega_total(self, a, p, b, q, cutoff):
        """Omega_{a,p;b,q} over (t, Q) truncated to total degree ``cutoff``."""
        n, model = self.model.n, self.model
        acc = None
        for m in range(q + 1):
            x, y = self.cov[(a, p + m + 1)], self.cov[(b, q - m)]
            for i in range(n):
                for j in range(n):
                    g = model.eta_inv[i][j]
                    if not g or x[i].is_zero() or y[j].is_zero():
                        continue
                    if x[i].min_degree() + y[j].min_degree() > cutoff:
                        continue
                    term = (x[i].truncate(cutoff) * y[j].truncate(cutoff)).scale(g * (-1) ** m)
                    acc = term if acc is None else acc + term
        if acc is None:
            acc = TruncSeries.zero(model.vars, cutoff)
        return acc

    def free_energy(self):
        """F0 = 1/2 sum Omega_{x,y}(t0) T~^x T~^y, truncated at the ring cutoff."""
        if getattr(self, "_F0", None) is None:
            self._F0 = self._free_energy()
        return self._F0

    def _free_energy(self):
        ring, model, n, C = self.ring, self.model, self.model.n, self.cutoff
        keys = [(a, p) for p in range(self.P + 1) for a in range(n)]
        dil = (model.unit, 1)
        total = ring.zero()
        for i, x in enumerate(keys):
            for y in keys[i:]:
                shift = (x == dil) + (y == dil)
                need = C - 2 + shift
                if need < 0:
                    continue
                om = self.omega_total(x[0], x[1], y[0], y[1], need)
                if om.is_zero():
                    continue
                img = self.composer(om, need)
                if img.is_zero():
                    continue
                img = TruncSeries._raw(ring.vars, C, dict(img.items()))
                w = Fraction(1, 2) if x == y else Fraction(1)
                total = total + (img * ring.shifted(*x) * ring.shifted(*y)).scale(w)
        return total


def genus0_solution(model, P, D, table=None):
    """t0(T) through total degree D as a list of series in the coupling ring."""
    g = Genus0(load_model(model), P, D, table)
    return g.t0()


def genus0_free_energy(model, P, D, table=None):
    return Genus0(load_model(model), P, D, table).free_energy()


# canonical coordinates (two-dimensional models)

class CanonicalFrame:
    def __init__(self, model, order, u, dt_du, psi1_sq, U, H, E, variables):
        self.model = model
        self.order = order
        self.u = u
        self.dt_du = dt_du
        self.psi1_sq = psi1_sq
        self.U = U
        self.H = H
        self.E = E
        self.variables = variables

    def psi1(self):
        """psi_{i1} when its square has a rational square-root leading term."""
        out = []
        for s in self.psi1_sq:
            r = rational_sqrt(s.constant_term())
            out.append(s.sqrt() if r else None)
        return out

    def lowered(self, i):
        """d t_alpha / d u_i."""
        n = self.model.n
        eta = self.model.eta
        return [sum((self.dt_du[b][i].scale(eta[a][b]) for b in range(n) if eta[a][b]),
                    self.dt_du[0][i].scale(0)) for a in range(n)]

    def gram_residual(self):
        """Psi^T Psi - eta, using psi_{ia} psi_{ib} = dt_a/du_i dt_b/du_i / psi_{i1}^2."""
        n = self.model.n
        out = {}
        for a in range(n):
            for b in range(n):
                acc = -self.model.eta[a][b] + self.u[0].scale(0)
                for i in range(n):
                    lo = self.lowered(i)
                    acc = acc + lo[a] * lo[b] * self.psi1_sq[i].inverse()
                out[(a, b)] = acc
        return out

    def euler_residual(self):
        n = self.model.n
        return [sum((self.u[i] * self.dt_du[a][i] for i in range(n)), -self.E[a])
                for a in range(n)]

    def eigen_residual(self):
        """det(U - u_i) for each i."""
        out = []
        for ui in self.u:
            a = self.U[0][0] - ui
            d = self.U[1][1] - ui
            out.append(a * d - self.U[0][1] * self.U[1][0])
        return out

    def h_residual(self):
        n = self.model.n
        out = []
        for a in range(n):
            acc = -self.H[a]
            for i in range(n):
                acc = acc + self.lowered(i)[a] * self.psi1_sq[i].inverse()
            out.append(acc)
        return out


def _specialize_novikov(model, s, variables, order):
    """Map Q_j -> exp(t^{a_j}) (basepoint Q = 1) as plain series in t."""
    mapping = {}
    for a, name in enumerate(model.tvars):
        mapping[name] = TruncSeries.variable(variables, order, name)
    for q, a in zip(model.qnames, model.directions):
        mapping[q] = TruncSeries.variable(variables, order, model.tvars[a]).exp()
    return s.regrade(None, 10 ** 6).substitute(mapping, variables, order)


def flat_data_at_unit_novikov(model, order):
    """Potential third derivatives and Euler field with Q specialized to 1 at t = 0."""
    vs = model.tvars
    n = model.n
    F = model.potential(order + 3) if model.r else model.potential(0)
    Fs = _specialize_novikov(model, F, vs, order + 3)
    d = lambda s, a: s.diff(vs[a])
    T = {}
    for a in range(n):
        fa = d(Fs, a)
        for b in range(n):
            fab = d(fa, b)
            for c in range(n):
                T[(a, b, c)] = d(fab, c).truncate(order)
    c = [[[sum((T[(e, a, b)].scale(model.eta_inv[g][e]) for e in range(n)
                if model.eta_inv[g][e]), TruncSeries.zero(vs, order))
           for g in range(n)] for b in range(n)] for a in range(n)]
    E = [TruncSeries.variable(vs, order, vs[a]).scale(model.euler_degrees[a])
         + model.euler_constants[a] for a in range(n)]
    return c, E


def canonical_frame(model, order):
    """Canonical coordinates of a two-dimensional model around t = 0, Q = 1."""
    model = load_model(model)
    if model.n != 2:
        raise NotImplementedError("canonical_frame is implemented for n = 2")
    vs = model.tvars
    n = 2
    c, E = flat_data_at_unit_novikov(model, order + 1)
    U = [[sum((E[e] * c[e][b][a] for e in range(n)), TruncSeries.zero(vs, order + 1))
          for b in range(n)] for a in range(n)]
    tr = U[0][0] + U[1][1]
    det = U[0][0] * U[1][1] - U[0][1] * U[1][0]
    disc = tr * tr - det.scale(4)
    if disc.constant_term() == 0:
        raise SemisimplicityError("coincident canonical coordinates at the basepoint")
    if disc.constant_term() < 0 or rational_sqrt(disc.constant_term()) is None:
        raise SemisimplicityError("discriminant has no rational square-root leading term")
    root = disc.sqrt()
    u = [(tr - root).scale(Fraction(1, 2)), (tr + root).scale(Fraction(1, 2))]
    u.sort(key=lambda s: s.constant_term())
    J = [[u[i].diff(vs[a]) for a in range(n)] for i in range(n)]
    jdet = J[0][0] * J[1][1] - J[0][1] * J[1][0]
    inv = jdet.inverse()
    # dt^a/du_i = (J^{-1})[a][i]
    K = [[(J[1][1] * inv), (-J[0][1] * inv)],
         [(-J[1][0] * inv), (J[0][0] * inv)]]
    K = [[x.truncate(order) for x in row] for row in K]
    u = [x.truncate(order) for x in u]
    psi1_sq = [sum((K[b][i].scale(model.eta[model.unit][b]) for b in range(n)
                    if model.eta[model.unit][b]), TruncSeries.zero(vs, order)) for i in range(n)]
    H = [sum((c[v][a][v] for v in range(n)), TruncSeries.zero(vs, order + 1)).truncate(order)
         for a in range(n)]
    Ut = [[x.truncate(order) for x in row] for row in U]
    Et = [x.truncate(order) for x in E]
    return CanonicalFrame(model, order, u, K, psi1_sq, Ut, H, Et, vs)


# G-function

def _mat(n, zero):
    return [[zero for _ in range(n)] for _ in range(n)]


def _mat_mul(A, B, zero):
    n = len(A)
    out = _mat(n, zero)
    for i in range(n):
        for j in range(n):
            acc = zero
            for k in range(n):
                if not A[i][k].is_zero() and not B[k][j].is_zero():
                    acc = acc + A[i][k] * B[k][j]
            out[i][j] = acc
    return out


def _mat_vec(A, v, zero):
    n = len(A)
    return [sum((A[i][k] * v[k] for k in range(n) if not A[i][k].is_zero()), zero)
            for i in range(n)]


def euler_power_system(model, order):
    """Rows (E^k)^a and right-hand sides of d_{E^k} G for k = 0..n-1.

    k = 0 is the unit (d_e G = 0), k = 1 gives n d/48 - tr(mu^2)/4, and
    k >= 2 uses the trace formula in U = E . c and H_a = c^v_{va}.
    """
    rows, rhs = [], []
    for k in range(model.n):
        r, v = euler_power_row(model, order, k)
        rows.append(r)
        rhs.append(v)
    return rows, rhs


def euler_power_row(model, order, k):
    n = model.n
    c = structure_constants(model, order)
    zero = model.constant(0, order)
    E = [model.t(a, order).scale(model.euler_degrees[a]) + model.euler_constants[a]
         for a in range(n)]
    U = [[sum((E[e] * c[e][b][a] for e in range(n)), zero) for b in range(n)] for a in range(n)]
    mu = [[model.constant(model.mu[i] if i == j else 0, order) for j in range(n)]
          for i in range(n)]
    H = [sum((c[v][a][v] for v in range(n)), zero) for a in range(n)]
    ident = [[model.constant(int(i == j), order) for j in range(n)] for i in range(n)]
    powers = [ident]
    for _ in range(max(k, 1)):
        powers.append(_mat_mul(U, powers[-1], zero))
    unit = [model.constant(int(a == model.unit), order) for a in range(n)]
    vec = _mat_vec(powers[k], unit, zero) if k else unit
    tr_mu2 = sum((m * m for m in model.mu), Fraction(0))
    if k == 0:
        value = zero
    elif k == 1:
        value = model.constant(Fraction(n) * model.charge_d / 48 - tr_mu2 / 4, order)
    else:
        value = zero
        for j in range(k):
            A = _mat_mul(_mat_mul(mu, powers[j], zero), _mat_mul(mu, powers[k - 1 - j], zero), zero)
            value = value - sum((A[i][i] for i in range(n)), zero).scale(Fraction(1, 4))
        w = [zero] * n
        for j in range(k - 1):
            v = _mat_vec(_mat_mul(_mat_mul(powers[j], mu, zero), powers[k - 2 - j], zero), E, zero)
            w = [x + y for x, y in zip(w, v)]
        v = _mat_vec(powers[k - 2], E, zero)
        w = [x - y.scale(model.charge_d / 2) for x, y in zip(w, v)]
        value = value - sum((w[a] * H[a] for a in range(n)), zero).scale(Fraction(1, 24))
    return vec, value


def _solve_series(rows, rhs):
    """Gaussian elimination over the series ring with unit pivots."""
    n = len(rows)
    A = [list(r) + [b] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((i for i in range(col, n) if A[i][col].constant_term()), None)
        if piv is None:
            raise VandermondeDegenerate(
                f"no invertible pivot in column {col + 1}: not semisimple at the basepoint")
        A[col], A[piv] = A[piv], A[col]
        inv = A[col][col].inverse()
        A[col] = [x * inv for x in A[col]]
        for i in range(n):
            if i != col and not A[i][col].is_zero():
                f = A[i][col]
                A[i] = [x - f * y for x, y in zip(A[i], A[col])]
    return [A[i][n] for i in range(n)]


def g_gradient_residuals(model, G, order):
    """d_{E^k} G minus the prescribed values, k = 0..n-1 (all zero when valid)."""
    rows, rhs = euler_power_system(model, order)
    grad = [model.D(a, G).truncate(order) for a in range(model.n)]
    out = []
    for row, v in zip(rows, rhs):
        out.append(sum((r * g for r, g in zip(row, grad)), -v))
    return out


def g_function(model, order):
    """The G-function with G(t = 0, Q = 0) = 0.

    The gradient is the unique solution of the d_{E^k} G system when that
    system has invertible pivots at the basepoint.  At a nilpotent basepoint
    (P1xP1, CP3 at Q = 0) the system is solved sector by sector through the
    elliptic recursion instead, and every row is re-checked here.
    """
    model = load_model(model)
    rows, rhs = euler_power_system(model, order)
    try:
        grad = _solve_series(rows, rhs)
        G = integrate_closed(model, grad)
    except VandermondeDegenerate:
        G = _g_from_elliptic(model, order)
    bad = [r for r in g_gradient_residuals(model, G, order) if not r.is_zero()]
    if bad:
        raise ArithmeticError(f"{model.name}: G fails its defining system: {bad[0].to_str()[:80]}")
    return G


def _g_from_elliptic(model, order):
    from math import factorial
    from . import gw
    F = Fraction
    if model.name == "p1xp1":
        table = gw.p1p1_elliptic(max(order, 1))
        coeffs = {(0, 1, 0, 0, 0, 0): F(-1, 12), (0, 0, 1, 0, 0, 0): F(-1, 12)}
        for (k, l), v in table.items():
            if v and k + l <= order:
                coeffs[(0, 0, 0, 2 * (k + l), k, l)] = F(v, factorial(2 * (k + l)))
    elif model.name == "cp3":
        table = gw.cp3_elliptic(max(order, 1))
        coeffs = {(0, 1, 0, 0, 0): F(-1, 4)}
        for (k, l), v in table.items():
            if v and k <= order:
                coeffs[(0, 0, 4 * k - 2 * l, l, k)] = v / (factorial(4 * k - 2 * l) * factorial(l))
    else:
        raise VandermondeDegenerate(f"{model.name}: degenerate system and no elliptic route")
    return TruncSeries(model.vars, order, coeffs, model.weights)


# genus one

def _trace_log(N, zero, cutoff):
    """tr log(I + N) for a matrix N of positive-degree series."""
    n = len(N)
    acc = zero
    power = N
    k = 1
    while k <= cutoff:
        tr = sum((power[i][i] for i in range(n)), zero)
        if tr.is_zero() and all(x.is_zero() for row in power for x in row):
            break
        acc = acc + tr.scale(Fraction((-1) ** (k + 1), k))
        power = _mat_mul(power, N, zero)
        k += 1
    return acc


def f1_part(model, order):
    """F^(1)(t, s) = 1/24 log det(c(t) . (e_1 + s)) over (t, Q, s).

    Weights: t 0, Q 1, s 1; truncated at ``order``.
    """
    n = model.n
    svars = tuple(f"s{a + 1}" for a in range(n))
    vs = model.vars + svars
    w = model.weights + (1,) * n
    c = structure_constants(model, order)
    emb = lambda x: x.embed(vs, order, w)
    zero = TruncSeries.zero(vs, order, w)
    s = [TruncSeries.variable(vs, order, name, weights=w) for name in svars]
    N = [[sum((emb(c[g][b][a]) * s[g] for g in range(n) if not c[g][b][a].is_zero()), zero)
          for b in range(n)] for a in range(n)]
    return _trace_log(N, zero, order).scale(Fraction(1, 24)), vs, w, svars


def log_det_residuals(model, order):
    """Lie_e F1 = 0, Lie_E F1 = n/24 and t_X . dF1/dt_X = n/24 on F^(1)(t, s)."""
    model = load_model(model)
    n = model.n
    F1, vs, w, svars = f1_part(model, order)
    ext = FrobeniusModel.__new__(FrobeniusModel)
    ext.__dict__.update(model.__dict__)
    ext.vars = vs
    ext.weights = w
    lie_e = ext.D(model.unit, F1)
    ds = [F1.diff(x) for x in svars]
    tx = [TruncSeries.variable(vs, order, x, weights=w) + int(a == model.unit)
          for a, x in enumerate(svars)]
    scaling = sum((tx[a] * ds[a] for a in range(n)), TruncSeries.zero(vs, order, w))
    lie_E = ext.euler_field(F1) + sum(
        (tx[a] * ds[a] * model.euler_degrees[a] for a in range(n)), TruncSeries.zero(vs, order, w))
    q = Fraction(n, 24)
    return {"lie_e": lie_e, "lie_E": lie_E - q, "scaling": scaling - q}


class Genus1:
    """F1(T) = G(t0) + 1/24 tr log(c(t0) . t_X) on a coupling ring."""

    def __init__(self, g0, G=None):
        self.g0 = g0
        model = g0.model
        self.model = model
        ring = g0.ring
        C = g0.cutoff - 1
        self.cutoff = C
        n = model.n
        if G is None:
            G = g_function(model, max(C, 1))
        comp = g0.composer
        self.G = comp(_total(G, C), C)
        c = structure_constants(model, C)
        sX = [ring.d(x, model.unit, 0).truncate(C) for x in g0.X]
        zero = ring.zero(C)
        N = [[zero for _ in range(n)] for _ in range(n)]
        for a in range(n):
            for b in range(n):
                acc = zero
                for g in range(n):
                    if c[g][b][a].is_zero() or sX[g].is_zero():
                        continue
                    acc = acc + comp(_total(c[g][b][a], C), C) * sX[g]
                N[a][b] = acc
        self.logdet = _trace_log(N, zero, C).scale(Fraction(1, 24))
        self.F1 = self.G + self.logdet


def genus1_free_energy(model, P, D, G=None):
    """F1 through total degree D (uses the genus-0 solution through D + 1)."""
    g0 = Genus0(load_model(model), P, D + 1)
    return Genus1(g0, G).F1
