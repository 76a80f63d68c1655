"""Genus 0 and genus 1 Virasoro constraint residuals on concrete models.

With Z = exp(sum_g eps^(2g-2) F_g) the coefficient of eps^(2g-2) in
Z^{-1} L_m Z is

    A_{m,0} = sum dd d F0 d F0 + sum td Tt d F0 + sum tt Tt Tt
    A_{m,1} = sum dd (d d F0 + 2 d F0 d F1) + sum td Tt d F1 + const

where (dd, td, tt, const) are the tables of L_m.  Both vanish identically
when the free energies come from the model the operator was built from.

Certification.  The free energies are computed on couplings of level <= P
and truncated in total degree.  A term Tt^{a,p} d/dT^{b,q} of L_m has
q <= p + m, so on monomials whose couplings all have level <= P - max(m, 0)
no term is lost to the level cutoff.  The reports certify that subring,
through the requested total degree.
"""

from .exactmath import TruncSeries
from .frobenius import (
    Genus0, Genus1, load_model, g_function, VandermondeDegenerate,
)
from .virasoro import build_operator


class CutoffIncompatible(ValueError):
    pass


class NotSemisimple(ValueError):
    pass


class ConstraintReport:
    def __init__(self, model, m, genus, order, P, window, residual):
        self.model = model
        self.m = m
        self.genus = genus
        self.order = order
        self.P = P
        self.window = window
        self.residual = residual
        self.passed = residual.is_zero()

    def __repr__(self):
        state = "pass" if self.passed else "FAIL"
        return (f"ConstraintReport({self.model}, m={self.m}, genus={self.genus}, "
                f"order={self.order}, window={self.window}: {state})")

    def first_failure(self):
        if self.passed:
            return None
        e, v = min(self.residual.items(), key=lambda kv: (sum(kv[0]), kv[0]))
        names = self.residual.variables
        mono = "*".join(f"{x}^{k}" if k > 1 else x for x, k in zip(names, e) if k) or "1"
        return {"monomial": mono, "degree": sum(e), "coefficient": str(v)}

    def to_json(self):
        return {
            "model": self.model, "m": self.m, "genus": self.genus, "order": self.order,
            "P": self.P, "level_window": self.window, "pass": self.passed,
            "nonzero_terms": len(self.residual), "first_failure": self.first_failure(),
        }


def window(m, P):
    return P - max(m, 0)


def _check(m, P, D):
    if D < 0 or P < 0:
        raise CutoffIncompatible("order and level cutoff must be non-negative")
    if window(m, P) < 0:
        raise CutoffIncompatible(f"level cutoff {P} leaves no certified window for m = {m}")
    if m + 1 > P and m >= 1:
        # the dilaton slot of L_m reaches level m + 1
        raise CutoffIncompatible(f"L_{m} needs couplings up to level {m + 1}, cutoff is {P}")


class _Assembler:
    def __init__(self, ring, D):
        self.ring = ring
        self.D = D
        self._d = {}

    def derivatives(self, F, tag):
        def get(x):
            key = (tag, x)
            if key not in self._d:
                self._d[key] = self.ring.d(F, *x)
            return self._d[key]
        return get

    def shifted_times(self, s, x):
        """Tt^x * s truncated at D."""
        r = self.ring
        s = TruncSeries._raw(r.vars, self.D, dict(s.truncate(self.D).items()))
        out = r.times_var(s, *x)
        if x == (r.model.unit, 1):
            out = out - s
        return out

    def tt(self, x, y):
        r = self.ring
        return r.shifted(*x, cutoff=self.D) * r.shifted(*y, cutoff=self.D)

    def finish(self, total, W):
        return self.ring.restrict_levels(total.truncate(self.D), W)


def _sum_pairs(table):
    """Merge symmetric ordered pairs: {x<=y: total coefficient}."""
    out = {}
    for (x, y), v in table.items():
        key = (x, y) if x <= y else (y, x)
        out[key] = out.get(key, 0) + v
    return {k: v for k, v in out.items() if v}


def _operator(model, m, P):
    return build_operator(model.monodromy, m, P, strict=False)


def genus0_residual(L, ring, F0, D, W):
    asm = _Assembler(ring, D)
    dF = asm.derivatives(F0, 0)
    total = ring.zero(D)
    for (x, y), v in _sum_pairs(L.dd).items():
        total = total + (dF(x).truncate(D) * dF(y).truncate(D)).scale(v)
    for (x, y), v in L.td.items():
        total = total + asm.shifted_times(dF(y), x).scale(v)
    for (x, y), v in _sum_pairs(L.tt).items():
        total = total + asm.tt(x, y).scale(v)
    return asm.finish(total, W)


def genus1_residual(L, ring, F0, F1, D, W):
    asm = _Assembler(ring, D)
    d0 = asm.derivatives(F0, 0)
    d1 = asm.derivatives(F1, 1)
    total = ring.zero(D) + L.const
    for (x, y), v in L.dd.items():
        second = ring.d(d0(x), *y).truncate(D)
        total = total + (second + (d0(x).truncate(D) * d1(y).truncate(D)).scale(2)).scale(v)
    for (x, y), v in L.td.items():
        total = total + asm.shifted_times(d1(y), x).scale(v)
    return asm.finish(total, W)


def evaluate_A0(model, m, P, D, genus0=None, operator=None):
    """A_{m,0} certified through total degree D on levels <= P - max(m, 0)."""
    model = load_model(model)
    _check(m, P, D)
    if genus0 is None:
        genus0 = Genus0(model, P, D + 1)
    if genus0.cutoff < D + 1 or genus0.P != P:
        raise CutoffIncompatible(f"genus-0 data at cutoff {genus0.cutoff}, need {D + 1}")
    L = operator if operator is not None else _operator(model, m, P)
    if L.P != P:
        raise CutoffIncompatible(f"operator built at level {L.P}, free energy at {P}")
    W = window(m, P)
    F0 = genus0.free_energy()
    res = genus0_residual(L, genus0.ring, F0, D, W)
    return ConstraintReport(model.name, m, 0, D, P, W, res)


def _genus1_data(model, P, D):
    g0 = Genus0(model, P, D + 2)
    try:
        G = g_function(model, D + 1)
    except VandermondeDegenerate as err:
        raise NotSemisimple(f"{model.name}: genus-1 constraints need a semisimple model "
                            f"({err})") from err
    return g0, Genus1(g0, G)


def evaluate_A1(model, m, P, D, data=None):
    """A_{m,1} certified through total degree D on levels <= P - max(m, 0).

    ``data`` may carry a precomputed (Genus0, Genus1) pair with genus-0
    cutoff D + 2, so several m share one solve.
    """
    model = load_model(model)
    _check(m, P, D)
    g0, g1 = data if data is not None else _genus1_data(model, P, D)
    if g0.cutoff < D + 2 or g0.P != P:
        raise CutoffIncompatible(f"genus-0 data at cutoff {g0.cutoff}, need {D + 2}")
    L = _operator(model, m, P)
    W = window(m, P)
    F0 = g0.free_energy()
    res = genus1_residual(L, g0.ring, F0, g1.F1, D, W)
    return ConstraintReport(model.name, m, 1, D, P, W, res)


def evaluate_range(model, genus, ms, P, D):
    """Reports for several m sharing one genus-0 (and genus-1) computation."""
    model = load_model(model)
    ms = list(ms)
    for m in ms:
        _check(m, P, D)
    if genus == 0:
        g0 = Genus0(model, P, D + 1)
        return [evaluate_A0(model, m, P, D, genus0=g0) for m in ms]
    if genus == 1:
        data = _genus1_data(model, P, D)
        return [evaluate_A1(model, m, P, D, data=data) for m in ms]
    raise ValueError("genus must be 0 or 1")
