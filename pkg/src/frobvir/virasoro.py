"""Virasoro operators L_m attached to monodromy data, as finite coefficient
tables in the shifted couplings.

An operator is stored as

    L = sum dd[x, y] d/dT_x d/dT_y + sum td[x, y] Tt_x d/dT_y
        + sum tt[x, y] Tt_x Tt_y + const

where x, y run over coupling labels (alpha, p) with 0-based alpha and level
p <= P, and Tt is the shifted coupling (Tt^{1,1} = T^{1,1} - 1 on the unit
direction).  dd and tt are summed over ordered pairs and stored symmetric,
so a monomial d_x d_y (x != y) carries the total coefficient
dd[x, y] + dd[y, x].
"""

from fractions import Fraction

from .exactmath import mat_mul, transpose, rational_str
from .monodromy import (
    HalfIntegerResonance, pm_component, r_power_component, load_monodromy,
)


class CutoffTooSmall(ValueError):
    pass


class CutoffMismatch(ValueError):
    pass


class VirasoroOperator:
    def __init__(self, m, P, n, dd=None, td=None, tt=None, const=Fraction(0)):
        self.m = m
        self.P = P
        self.n = n
        self.dd = _clean(dd or {})
        self.td = _clean(td or {})
        self.tt = _clean(tt or {})
        self.const = Fraction(const)
        if not (_is_symmetric(self.dd) and _is_symmetric(self.tt)):
            raise ValueError("dd and tt tables must be symmetric")
        for table in (self.dd, self.td, self.tt):
            for (a, p), (b, q) in table:
                if not (0 <= p <= P and 0 <= q <= P and 0 <= a < n and 0 <= b < n):
                    raise ValueError(f"index out of range: {(a, p)}, {(b, q)}")

    def __eq__(self, other):
        return (isinstance(other, VirasoroOperator) and self.n == other.n
                and self.P == other.P and self.dd == other.dd and self.td == other.td
                and self.tt == other.tt and self.const == other.const)

    def is_zero(self):
        return not (self.dd or self.td or self.tt or self.const)

    def __add__(self, other):
        _same_frame(self, other)
        return VirasoroOperator(self.m, self.P, self.n, _tadd(self.dd, other.dd),
                                _tadd(self.td, other.td), _tadd(self.tt, other.tt),
                                self.const + other.const)

    def scale(self, c):
        c = Fraction(c)
        return VirasoroOperator(self.m, self.P, self.n, _tscale(self.dd, c),
                                _tscale(self.td, c), _tscale(self.tt, c), self.const * c)

    def __sub__(self, other):
        return self + other.scale(-1)

    def restrict(self, window):
        """Keep only entries whose levels are all <= window."""
        keep = lambda t: {k: v for k, v in t.items() if k[0][1] <= window and k[1][1] <= window}
        return VirasoroOperator(self.m, self.P, self.n, keep(self.dd), keep(self.td),
                                keep(self.tt), self.const)

    def to_json(self):
        def rows(t):
            return [[a + 1, p, b + 1, q, rational_str(v)]
                    for ((a, p), (b, q)), v in sorted(t.items())]
        return {"m": self.m, "cutoff": self.P, "n": self.n, "dd": rows(self.dd),
                "td": rows(self.td), "tt": rows(self.tt), "const": rational_str(self.const)}

    def first_difference(self, other):
        """First differing entry as {indices, expected, got}, or None."""
        for name in ("dd", "td", "tt"):
            a, b = getattr(other, name), getattr(self, name)
            for key in sorted(set(a) | set(b)):
                if a.get(key, 0) != b.get(key, 0):
                    (x, p), (y, q) = key
                    return {"indices": [name, x + 1, p, y + 1, q],
                            "expected": rational_str(a.get(key, 0)),
                            "got": rational_str(b.get(key, 0))}
        if self.const != other.const:
            return {"indices": ["const"], "expected": rational_str(other.const),
                    "got": rational_str(self.const)}
        return None


def _clean(t):
    return {k: Fraction(v) for k, v in t.items() if v}


def _is_symmetric(t):
    return all(t.get((y, x), 0) == v for (x, y), v in t.items())


def _tadd(a, b):
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return {k: v for k, v in out.items() if v}


def _tscale(a, c):
    return {k: v * c for k, v in a.items() if v * c}


def _symmetrize(t):
    out = {}
    for (x, y), v in t.items():
        half = Fraction(v) / 2
        out[(x, y)] = out.get((x, y), 0) + half
        out[(y, x)] = out.get((y, x), 0) + half
    return {k: v for k, v in out.items() if v}


def _same_frame(a, b):
    if a.P != b.P or a.n != b.n:
        raise CutoffMismatch(f"operators differ in cutoff or dimension: "
                             f"({a.P}, {a.n}) vs ({b.P}, {b.n})")


def _sign(k):
    return -1 if k % 2 else 1


def _acc(table, key, value):
    if value:
        table[key] = table.get(key, 0) + value


def _spread(data):
    return int(max(data.mu_diag) - min(data.mu_diag))


def _check_cutoff(data, m, P):
    need = abs(m) + data.r_window()
    if P < need:
        raise CutoffTooSmall(f"cutoff {P} is below |m| + (n-1)K = {need}")


def build_operator(data, m, P, strict=True):
    """L_m from the normally ordered bilinear form in the Heisenberg modes.

    Mode a_k (k >= 0) acts as eta^{-1} d/dT^k, and a_k (k < 0) as
    (-1)^(k+1) Tt^{-k-1}.  Each (k, l) pair contributes
    1/2 (-1)^(k+1) <a_l, [P_m(mu - k, R)]_{m-1-l-k} a_k>.
    """
    data = load_monodromy(data)
    if strict:
        _check_cutoff(data, m, P)
    n = data.n
    eta, eta_inv = data.eta, data.eta_inv
    spread = _spread(data)
    dd, td, tt = {}, {}, {}
    for k in range(-P - 1, P + 1):
        for l in range(-P - 1, P + 1):
            q = m - 1 - l - k
            if q < 0 or q > spread:
                continue
            M = pm_component(data, m, -k, q)
            if not any(any(row) for row in M):
                continue
            s = Fraction(_sign(k + 1), 2)
            if k >= 0 and l >= 0:
                X = mat_mul(M, eta_inv)
                for b in range(n):
                    for d in range(n):
                        _acc(dd, ((b, l), (d, k)), s * X[b][d])
            elif k >= 0:
                X = mat_mul(mat_mul(eta, M), eta_inv)
                sign = _sign(l + 1)
                for a in range(n):
                    for d in range(n):
                        _acc(td, ((a, -l - 1), (d, k)), s * sign * X[a][d])
            elif l >= 0:
                sign = _sign(k + 1)
                for b in range(n):
                    for g in range(n):
                        _acc(td, ((g, -k - 1), (b, l)), s * sign * M[b][g])
            else:
                X = mat_mul(eta, M)
                sign = _sign(l + 1) * _sign(k + 1)
                for a in range(n):
                    for g in range(n):
                        _acc(tt, ((a, -l - 1), (g, -k - 1)), s * sign * X[a][g])
    const = Fraction(0)
    if m == 0:
        const = sum((Fraction(1, 4) - x * x for x in data.mu_diag), Fraction(0)) / 4
    return VirasoroOperator(m, P, n, _symmetrize(dd), td, _symmetrize(tt), const)


# closed forms for m in {-2, -1, 0, 1, 2}

class _Builder:
    """Accumulates <X T^p, d/dT^q>, <X T^p, T^q> and <dA, dB> pairings."""

    def __init__(self, data, P):
        self.data, self.P, self.n = data, P, data.n
        self.dd, self.td, self.tt = {}, {}, {}

    def t_d(self, X, p, q, c=1):
        if not (0 <= p <= self.P and 0 <= q <= self.P):
            return
        for a in range(self.n):
            for b in range(self.n):
                _acc(self.td, ((b, p), (a, q)), c * X[a][b])

    def t_t(self, X, p, q, c=1):
        if not (0 <= p <= self.P and 0 <= q <= self.P):
            return
        Y = mat_mul(transpose(X), self.data.eta)
        for b in range(self.n):
            for g in range(self.n):
                _acc(self.tt, ((b, p), (g, q)), c * Y[b][g])

    def d_d(self, A, p, B, q, c=1):
        # covector pairing <e^a A, e^b B> = (A eta^{-1} B^T)[a][b]
        if not (0 <= p <= self.P and 0 <= q <= self.P):
            return
        Y = mat_mul(mat_mul(A, self.data.eta_inv), transpose(B))
        for a in range(self.n):
            for b in range(self.n):
                _acc(self.dd, ((a, p), (b, q)), c * Y[a][b])

    def done(self, m, const=Fraction(0)):
        return VirasoroOperator(m, self.P, self.n, _symmetrize(self.dd), self.td,
                                _symmetrize(self.tt), const)


def _diag(values):
    n = len(values)
    return [[values[i] if i == j else Fraction(0) for j in range(n)] for i in range(n)]


def _mu_poly(data, f):
    return _diag([Fraction(f(x)) for x in data.mu_diag])


def _nonzero(X):
    return any(any(row) for row in X)


def closed_form_operator(data, m, P, strict=True):
    """Direct transcription of the displayed L_{-2}, ..., L_2."""
    data = load_monodromy(data)
    if m not in (-2, -1, 0, 1, 2):
        raise ValueError("closed forms exist for m in -2..2 only")
    if strict:
        _check_cutoff(data, m, P)
    half = Fraction(1, 2)
    b = _Builder(data, P)
    spread = _spread(data)
    R = data.r
    R2 = lambda k: r_power_component(data, k, 2)
    R3 = lambda k: r_power_component(data, k, 3)
    ident = _mu_poly(data, lambda x: 1)
    const = Fraction(0)

    if m == -1:
        for p in range(1, P + 1):
            b.t_d(ident, p, p - 1)
        b.t_t(ident, 0, 0, half)

    elif m == 0:
        for p in range(P + 1):
            b.t_d(_mu_poly(data, lambda x: p + half + x), p, p)
            for r in range(1, p + 1):
                b.t_d(R(r), p, p - r)
        for p in range(spread + 1):
            for q in range(spread + 1):
                if 1 <= p + q + 1 <= spread:
                    b.t_t(R(p + q + 1), p, q, half * (-1) ** q)
        const = sum((Fraction(1, 4) - x * x for x in data.mu_diag), Fraction(0)) / 4

    elif m == 1:
        for p in range(P + 1):
            b.t_d(_mu_poly(data, lambda x: (p + half + x) * (p + 3 * half + x)), p, p + 1)
            for r in range(1, p + 2):
                b.t_d(mat_mul(R(r), _mu_poly(data, lambda x: 2 * p + 2 + 2 * x)), p, p - r + 1)
            for r in range(2, p + 2):
                b.t_d(R2(r), p, p - r + 1)
        D = _mu_poly(data, lambda x: half + x)
        b.d_d(D, 0, D, 0, half)
        for p in range(spread + 1):
            for q in range(spread + 1):
                if p + q + 2 <= spread:
                    b.t_t(mat_mul(R(p + q + 2), _mu_poly(data, lambda x: p + x + 1)), p, q,
                          (-1) ** q)
                    b.t_t(R2(p + q + 2), p, q, half * (-1) ** q)

    elif m == 2:
        for p in range(P + 1):
            b.t_d(_mu_poly(data, lambda x: (p + half + x) * (p + 3 * half + x)
                           * (p + 5 * half + x)), p, p + 2)
            for r in range(1, p + 3):
                b.t_d(mat_mul(R(r), _mu_poly(
                    data, lambda x: 3 * (p + half + x) ** 2 + 6 * (p + half + x) + 2)),
                    p, p - r + 2)
            for r in range(2, p + 3):
                b.t_d(mat_mul(R2(r), _mu_poly(data, lambda x: 3 * p + 9 * half + 3 * x)),
                      p, p - r + 2)
            for r in range(3, p + 3):
                b.t_d(R3(r), p, p - r + 2)
        b.d_d(_mu_poly(data, lambda x: half - x), 1,
              _mu_poly(data, lambda x: (half - x) * (3 * half - x)), 0)
        b.d_d(R(1), 0, _mu_poly(data, lambda x: Fraction(1, 4) + 3 * x - 3 * x * x), 0, half)
        for p in range(spread + 1):
            for q in range(spread + 1):
                s = p + q + 3
                if s > spread:
                    continue
                X = R3(s)
                X = [[u + v for u, v in zip(r1, r2)] for r1, r2 in zip(
                    X, mat_mul(R2(s), _mu_poly(data, lambda x: 3 * (p + x + 3 * half))))]
                X = [[u + v for u, v in zip(r1, r2)] for r1, r2 in zip(
                    X, mat_mul(R(s), _mu_poly(
                        data, lambda x: Fraction(3, 4) * (2 * p + 2 * x + 3) ** 2 - 1)))]
                b.t_t(X, p, q, half * (-1) ** q)

    else:  # m == -2
        for x in data.mu_diag:
            if (x - half).denominator == 1:
                raise HalfIntegerResonance(m, x)
        for p in range(2, P + 1):
            b.t_d(_mu_poly(data, lambda x: 1 / (p - half + x)), p, p - 2)
        for k in range(1, data.n):
            for l in range(k, spread + 1):
                Rlk = r_power_component(data, l, k)
                if not _nonzero(Rlk):
                    continue
                for p in range(l + 2, P + 1):
                    b.t_d(mat_mul(Rlk, _mu_poly(data, lambda x: (p - half + x) ** (-k - 1))),
                          p, p - l - 2, (-1) ** k)
                for p in range(0, l + 2):
                    b.t_t(mat_mul(Rlk, _mu_poly(data, lambda x: (p - half + x) ** (-k - 1))),
                          p, l - p + 1, half * _sign(l + p + k + 1))
        b.t_t(_mu_poly(data, lambda x: 1 / (half - x)), 0, 1)

    return b.done(m, const)


# commutators

def _rows(t):
    out = {}
    for (x, y), v in t.items():
        out.setdefault(x, []).append((y, v))
    return out


def _tmul(a, b):
    """(AB)[x, z] = sum_y A[x, y] B[y, z] for sparse tables."""
    brows = _rows(b)
    out = {}
    for (x, y), v in a.items():
        for z, w in brows.get(y, ()):
            out[(x, z)] = out.get((x, z), 0) + v * w
    return {k: v for k, v in out.items() if v}


def _trace(t):
    return sum((v for (x, y), v in t.items() if x == y), Fraction(0))


def commutator(li, lj):
    """Exact tables of [L_i, L_j] as operators truncated at level P."""
    _same_frame(li, lj)
    A1, B1, C1 = li.dd, li.td, li.tt
    A2, B2, C2 = lj.dd, lj.td, lj.tt
    dd = _symmetrize(_tadd(_tscale(_tmul(A1, B2), 2), _tscale(_tmul(A2, B1), -2)))
    td = _tadd(_tmul(B1, B2), _tscale(_tmul(B2, B1), -1))
    td = _tadd(td, _tscale(_tmul(C2, A1), 4))
    td = _tadd(td, _tscale(_tmul(C1, A2), -4))
    tt = _symmetrize(_tadd(_tscale(_tmul(B1, C2), 2), _tscale(_tmul(B2, C1), -2)))
    const = 2 * _trace(_tmul(A1, C2)) - 2 * _trace(_tmul(A2, C1))
    return VirasoroOperator(li.m + lj.m, li.P, li.n, dd, td, tt, const)


def trust_window(data, i, j, P):
    return P - abs(i) - abs(j) - data.r_window()


def check_virasoro_relations(data, m_range, P):
    """Compare [L_i, L_j] with (i - j) L_{i+j} + n (i^3 - i)/12 delta_{i+j,0}.

    Returns a list of rows {i, j, pass, window, first_discrepancy}; rows
    touching an undefined L_m carry ``resonant: true`` and pass = None.
    """
    data = load_monodromy(data)
    cache = {}

    def op(m):
        if m not in cache:
            try:
                cache[m] = build_operator(data, m, P, strict=False)
            except HalfIntegerResonance as err:
                cache[m] = err
        return cache[m]

    report = []
    for i in m_range:
        for j in m_range:
            row = {"i": i, "j": j, "window": trust_window(data, i, j, P)}
            ops = [op(i), op(j), op(i + j)]
            bad = next((o for o in ops if isinstance(o, HalfIntegerResonance)), None)
            if bad is not None:
                row.update({"pass": None, "resonant": True, "first_discrepancy": None,
                            "error": str(bad)})
                report.append(row)
                continue
            W = row["window"]
            got = commutator(ops[0], ops[1])
            expected = ops[2].scale(i - j)
            if i + j == 0:
                expected = expected + VirasoroOperator(0, P, data.n,
                                                       const=Fraction(data.n * (i ** 3 - i), 12))
            diff = (got.restrict(W)).first_difference(expected.restrict(W)) if W >= 0 else None
            row.update({"pass": diff is None, "resonant": False, "first_discrepancy": diff,
                        "vacuous": W < 0})
            report.append(row)
    return report


def coupling_name(alpha, p):
    """Variable name of the coupling T^{alpha,p} (alpha 0-based)."""
    return f"T{alpha + 1}_{p}"
