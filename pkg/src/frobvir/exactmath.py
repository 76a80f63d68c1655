"""Exact rational scalars, truncated sparse multivariate series and exact
linear solves.

Every other module in the package computes with the objects defined here.
Scalars are ``fractions.Fraction`` (always reduced, positive denominator).
A :class:`TruncSeries` is a sparse map from exponent tuples to fractions,
over a fixed ordered list of variable names, with a total-degree cutoff:
terms of total degree above the cutoff are never stored.
"""

from fractions import Fraction
from math import factorial

Rational = Fraction


class StructuralError(ValueError):
    """Operands live over different variable lists."""


class SingularMatrixError(ArithmeticError):
    def __init__(self, rank, size):
        super().__init__(f"matrix is singular: rank {rank} < {size}")
        self.rank = rank
        self.size = size


class InconsistentSystemError(ArithmeticError):
    def __init__(self, row, residual):
        super().__init__(f"linear system inconsistent at row {row}: residual {residual}")
        self.row = row
        self.residual = residual


class UnsupportedDirectionError(ValueError):
    """Negative weights cannot be represented as a Novikov monomial."""


def rational(value):
    """Parse an int, Fraction or a ``"p/q"`` string into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"not an exact rational: {value!r}")


def rational_str(x):
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def _add_exp(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _degree_fn(weights):
    if weights is None:
        return sum
    w = weights
    return lambda e: sum([a * b for a, b in zip(w, e) if b])


def _norm_weights(variables, weights):
    if weights is None:
        return None
    weights = tuple(int(x) for x in weights)
    if len(weights) != len(variables):
        raise StructuralError("one weight per variable is required")
    if any(x < 0 for x in weights):
        raise ValueError("weights must be non-negative")
    return None if all(x == 1 for x in weights) else weights


class TruncSeries:
    """Sparse multivariate power series truncated at a total degree.

    Instances are treated as immutable; every operation returns a new
    object.  The coefficient dictionary never holds zeros and never holds
    an exponent of degree above ``cutoff``.

    By default every variable has degree one.  Optional non-negative
    ``weights`` change the grading used by the cutoff; a weight-0 variable
    is kept exactly (no truncation in it), which is how Novikov sectors are
    computed exactly in the flat variables.
    """

    __slots__ = ("variables", "cutoff", "weights", "_deg", "_c")

    def __init__(self, variables, cutoff, coeffs=None, weights=None):
        self.variables = tuple(variables)
        self.cutoff = int(cutoff)
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        self.weights = _norm_weights(self.variables, weights)
        self._deg = deg = _degree_fn(self.weights)
        n = len(self.variables)
        c = {}
        if coeffs:
            for e, v in coeffs.items():
                e = tuple(e)
                if len(e) != n:
                    raise StructuralError(f"exponent {e} does not match {n} variables")
                if deg(e) > self.cutoff:
                    continue
                v = rational(v)
                if v:
                    c[e] = c.get(e, 0) + v
                    if not c[e]:
                        del c[e]
        self._c = c

    @classmethod
    def _raw(cls, variables, cutoff, coeffs, weights=None):
        s = object.__new__(cls)
        s.variables = variables
        s.cutoff = cutoff
        s.weights = weights
        s._deg = _degree_fn(weights)
        s._c = coeffs
        return s

    def _like(self, coeffs, cutoff=None):
        return TruncSeries._raw(self.variables, self.cutoff if cutoff is None else cutoff,
                                coeffs, self.weights)

    # construction helpers

    @classmethod
    def constant(cls, variables, cutoff, value=1, weights=None):
        v = rational(value)
        variables = tuple(variables)
        n = len(variables)
        return cls._raw(variables, int(cutoff), {(0,) * n: v} if v else {},
                        _norm_weights(variables, weights))

    @classmethod
    def zero(cls, variables, cutoff, weights=None):
        variables = tuple(variables)
        return cls._raw(variables, int(cutoff), {}, _norm_weights(variables, weights))

    @classmethod
    def variable(cls, variables, cutoff, name, coeff=1, weights=None):
        variables = tuple(variables)
        i = variables.index(name)
        e = [0] * len(variables)
        e[i] = 1
        return cls(variables, cutoff, {tuple(e): coeff}, weights)

    @classmethod
    def monomial(cls, variables, cutoff, exps, coeff=1, weights=None):
        return cls(variables, cutoff, {tuple(exps): coeff}, weights)

    def degree(self, exps):
        """Graded degree of an exponent vector."""
        return self._deg(tuple(exps))

    # inspection

    def items(self):
        return self._c.items()

    def terms(self):
        return dict(self._c)

    def __len__(self):
        return len(self._c)

    def coefficient(self, exps):
        return self._c.get(tuple(exps), Fraction(0))

    def constant_term(self):
        return self._c.get((0,) * len(self.variables), Fraction(0))

    def is_zero(self):
        return not self._c

    def min_degree(self):
        if not self._c:
            return None
        return min(map(self._deg, self._c))

    def max_degree(self):
        if not self._c:
            return None
        return max(map(self._deg, self._c))

    def __eq__(self, other):
        if isinstance(other, TruncSeries):
            return (self.variables == other.variables and self.cutoff == other.cutoff
                    and self.weights == other.weights and self._c == other._c)
        if isinstance(other, (int, Fraction)):
            return self == self._like({(0,) * len(self.variables): rational(other)}
                                      if other else {})
        return NotImplemented

    def __hash__(self):
        return hash((self.variables, self.cutoff, self.weights, frozenset(self._c.items())))

    def __repr__(self):
        return f"TruncSeries({self.variables}, cutoff={self.cutoff}, {self.to_str()})"

    def to_str(self):
        if not self._c:
            return "0"
        parts = []
        for e in sorted(self._c, key=lambda e: (self._deg(e), tuple(-x for x in e))):
            mono = "*".join(
                v if k == 1 else f"{v}^{k}" for v, k in zip(self.variables, e) if k)
            c = rational_str(self._c[e])
            parts.append(c if not mono else (mono if c == "1" else f"{c}*{mono}"))
        return " + ".join(parts)

    # arithmetic

    def _check(self, other):
        if self.variables != other.variables:
            raise StructuralError(
                f"variable lists differ: {self.variables} vs {other.variables}")
        if self.weights != other.weights:
            raise StructuralError(f"weights differ: {self.weights} vs {other.weights}")

    def _coerce(self, other):
        if isinstance(other, TruncSeries):
            self._check(other)
            return other
        if isinstance(other, (int, Fraction)):
            other = rational(other)
            return self._like({(0,) * len(self.variables): other} if other else {})
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        cut = min(self.cutoff, other.cutoff)
        deg = self._deg
        c = {e: v for e, v in self._c.items() if deg(e) <= cut} \
            if cut < self.cutoff else dict(self._c)
        for e, v in other._c.items():
            if cut < other.cutoff and deg(e) > cut:
                continue
            w = c.get(e, 0) + v
            if w:
                c[e] = w
            else:
                c.pop(e, None)
        return self._like(c, cut)

    __radd__ = __add__

    def __neg__(self):
        return self._like({e: -v for e, v in self._c.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, k):
        k = rational(k)
        if not k:
            return self._like({})
        return self._like({e: v * k for e, v in self._c.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if isinstance(other, TruncSeries):
            return series_mul(self, other)
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, k):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers")
        result = self._one()
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def _one(self):
        return self._like({(0,) * len(self.variables): Fraction(1)})

    def truncate(self, cutoff):
        cutoff = min(int(cutoff), self.cutoff)
        deg = self._deg
        return self._like({e: v for e, v in self._c.items() if deg(e) <= cutoff}, cutoff)

    def homogeneous_part(self, degree):
        deg = self._deg
        return self._like({e: v for e, v in self._c.items() if deg(e) == degree})

    def diff(self, name):
        """Plain partial derivative; the cutoff drops by the variable's weight."""
        i = self.variables.index(name)
        w = 1 if self.weights is None else self.weights[i]
        cut = max(self.cutoff - w, 0)
        deg = self._deg
        c = {}
        for e, v in self._c.items():
            k = e[i]
            if k:
                f = e[:i] + (k - 1,) + e[i + 1:]
                if deg(f) <= cut:
                    c[f] = v * k
        return self._like(c, cut)

    def euler(self, name, weight=1):
        """``weight * x d/dx`` for the variable ``x = name``; degree preserving."""
        i = self.variables.index(name)
        weight = rational(weight)
        c = {}
        for e, v in self._c.items():
            if e[i] and weight:
                c[e] = v * e[i] * weight
        return self._like(c)

    def set_zero(self, names):
        """Specialize the given variables to zero."""
        idx = [self.variables.index(n) for n in names]
        c = {e: v for e, v in self._c.items() if not any(e[i] for i in idx)}
        return self._like(c)

    def select(self, predicate):
        """Keep the terms whose exponent satisfies ``predicate``."""
        return self._like({e: v for e, v in self._c.items() if predicate(e)})

    def embed(self, variables, cutoff=None, weights=None):
        """Re-express over a superset of variables (new ones get exponent 0).

        Terms whose degree in the new grading exceeds the cutoff are dropped.
        """
        variables = tuple(variables)
        weights = _norm_weights(variables, weights)
        pos = [variables.index(v) for v in self.variables]
        n = len(variables)
        cut = self.cutoff if cutoff is None else min(cutoff, self.cutoff)
        deg = _degree_fn(weights)
        c = {}
        for e, v in self._c.items():
            f = [0] * n
            for j, k in zip(pos, e):
                f[j] = k
            f = tuple(f)
            if deg(f) <= cut:
                c[f] = v
        return TruncSeries._raw(variables, cut, c, weights)

    def project(self, variables):
        """Drop variables (they must not occur) and re-express over the rest."""
        variables = tuple(variables)
        pos = [self.variables.index(v) for v in variables]
        weights = None if self.weights is None else tuple(self.weights[j] for j in pos)
        c = {}
        for e, v in self._c.items():
            f = tuple(e[j] for j in pos)
            if sum(f) != sum(e):
                raise StructuralError("projected variable occurs in the series")
            c[f] = v
        return TruncSeries._raw(variables, self.cutoff, c, _norm_weights(variables, weights))

    def regrade(self, weights, cutoff):
        """Same terms under a different grading and cutoff."""
        return TruncSeries(self.variables, cutoff, self._c, weights)

    def substitute(self, mapping, variables, cutoff):
        """Compose: replace every variable by a series over ``variables``.

        ``mapping`` sends each of our variable names to a TruncSeries (or a
        rational).  Substituted series must have zero constant term unless
        the exponents involved are bounded, which is the caller's contract.
        """
        variables = tuple(variables)
        weights = None
        for s in mapping.values():
            if isinstance(s, TruncSeries):
                weights = s.weights
                break
        targets = []
        for name in self.variables:
            s = mapping.get(name)
            if s is None:
                raise KeyError(f"no substitution for {name}")
            if not isinstance(s, TruncSeries):
                s = TruncSeries.constant(variables, cutoff, s, weights)
            if s.variables != variables or s.weights != weights:
                raise StructuralError("substitution values over a different variable list")
            targets.append(s.truncate(cutoff))
        one = TruncSeries.constant(variables, cutoff, 1, weights)
        powers = [{0: one} for _ in targets]

        def power(i, k):
            table = powers[i]
            j = max(table)
            while j < k:
                table[j + 1] = table[j] * targets[i]
                j += 1
            return table[k]

        result = {}
        for e, v in self._c.items():
            term = None
            for i, k in enumerate(e):
                if k:
                    p = power(i, k)
                    term = p if term is None else term * p
            if term is None:
                term = one
            for f, w in term._c.items():
                x = result.get(f, 0) + v * w
                if x:
                    result[f] = x
                else:
                    result.pop(f, None)
        return TruncSeries._raw(variables, int(cutoff), result, weights)

    def _positive_low_degree(self, what):
        lo = self.min_degree()
        if lo == 0:
            raise ValueError(f"{what} needs the non-constant part to have positive degree")
        return lo

    def exp(self):
        """exp of a series with zero constant term."""
        if self.constant_term():
            raise ValueError("exp needs a zero constant term")
        one = self._one()
        result = one
        term = one
        lo = self._positive_low_degree("exp")
        if lo is None:
            return one
        k = 1
        while k * lo <= self.cutoff:
            term = (term * self).scale(Fraction(1, k))
            if term.is_zero():
                break
            result = result + term
            k += 1
        return result

    def log(self):
        """log of a series with constant term 1."""
        if self.constant_term() != 1:
            raise ValueError("log needs constant term 1")
        x = self - 1
        result = self._like({})
        lo = x._positive_low_degree("log")
        if lo is None:
            return result
        term = self._one()
        k = 1
        while k * lo <= self.cutoff:
            term = term * x
            if term.is_zero():
                break
            result = result + term.scale(Fraction((-1) ** (k + 1), k))
            k += 1
        return result

    def inverse(self):
        """Multiplicative inverse of a series with nonzero constant term."""
        c0 = self.constant_term()
        if not c0:
            raise ZeroDivisionError("series has no constant term")
        x = self.scale(1 / c0) - 1
        one = self._one()
        result = one
        term = one
        lo = x._positive_low_degree("inverse")
        if lo is not None:
            k = 1
            while k * lo <= self.cutoff:
                term = (term * x).scale(-1)
                if term.is_zero():
                    break
                result = result + term
                k += 1
        return result.scale(1 / c0)

    def sqrt(self):
        """Square root with positive rational leading constant."""
        c0 = self.constant_term()
        r = rational_sqrt(c0)
        if r is None or r == 0:
            raise ValueError(f"constant term {c0} has no rational square root")
        x = self.scale(1 / c0) - 1
        result = self._one()
        term = result
        lo = x._positive_low_degree("sqrt")
        if lo is not None:
            k = 1
            coef = Fraction(1)
            while k * lo <= self.cutoff:
                coef = coef * (Fraction(1, 2) - (k - 1)) / k
                term = term * x
                if term.is_zero():
                    break
                result = result + term.scale(coef)
                k += 1
        return result.scale(r)


def rational_sqrt(x):
    """Exact square root of a non-negative rational, or None."""
    from math import isqrt
    x = Fraction(x)
    if x < 0:
        return None
    p, q = x.numerator, x.denominator
    a, b = isqrt(p), isqrt(q)
    if a * a == p and b * b == q:
        return Fraction(a, b)
    return None


def series_mul(a, b):
    """Truncated product; the result cutoff is the smaller of the two."""
    a._check(b)
    cut = min(a.cutoff, b.cutoff)
    if not a._c or not b._c:
        return a._like({}, cut)
    if len(a._c) > len(b._c):
        a, b = b, a
    deg = a._deg
    bb = {}
    for e, v in b._c.items():
        bb.setdefault(deg(e), []).append((e, v))
    bdeg = sorted(bb)
    out = {}
    get = out.get
    for ea, va in a._c.items():
        da = deg(ea)
        room = cut - da
        for db in bdeg:
            if db > room:
                break
            for eb, vb in bb[db]:
                f = tuple([x + y for x, y in zip(ea, eb)])
                out[f] = get(f, 0) + va * vb
    return a._like({e: v for e, v in out.items() if v}, cut)


def series_compose_exp(k, q_vars, cutoff=None):
    """The exponential monomial exp(k . z) written as Q_1^k_1 ... Q_r^k_r."""
    k = tuple(int(x) for x in k)
    if len(k) != len(q_vars):
        raise StructuralError("weights and variables differ in length")
    if any(x < 0 for x in k):
        raise UnsupportedDirectionError(f"negative weight in {k}")
    if cutoff is None:
        cutoff = sum(k)
    return TruncSeries(q_vars, cutoff, {k: 1})


# exact linear algebra

def mat_mul(a, b):
    n, m, p = len(a), len(b), len(b[0]) if b else 0
    return [[sum((a[i][k] * b[k][j] for k in range(m) if a[i][k] and b[k][j]),
                 Fraction(0)) for j in range(p)] for i in range(n)]


def mat_vec(a, x):
    return [sum((row[j] * x[j] for j in range(len(x)) if row[j]), Fraction(0)) for row in a]


def transpose(a):
    return [list(r) for r in zip(*a)] if a else []


def identity(n):
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def zeros(n, m=None):
    return [[Fraction(0)] * (n if m is None else m) for _ in range(n)]


def _row_reduce(aug, ncols):
    """Gauss-Jordan on an augmented matrix in place; returns pivot columns."""
    rows = len(aug)
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, rows) if aug[i][c]), None)
        if p is None:
            continue
        aug[r], aug[p] = aug[p], aug[r]
        inv = 1 / aug[r][c]
        aug[r] = [x * inv for x in aug[r]]
        for i in range(rows):
            if i != r and aug[i][c]:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return pivots


def rank_exact(a):
    if not a:
        return 0
    aug = [[rational(x) for x in row] for row in a]
    return len(_row_reduce(aug, len(aug[0])))


def solve_linear_exact(a, rhs):
    """Solve a square nonsingular system exactly; verified by back-substitution."""
    n = len(a)
    if any(len(row) != n for row in a) or len(rhs) != n:
        raise StructuralError("solve_linear_exact needs a square system")
    aug = [[rational(x) for x in row] + [rational(y)] for row, y in zip(a, rhs)]
    pivots = _row_reduce(aug, n)
    if len(pivots) < n:
        raise SingularMatrixError(len(pivots), n)
    x = [aug[i][n] for i in range(n)]
    check = mat_vec([[rational(v) for v in row] for row in a], x)
    if check != [rational(y) for y in rhs]:
        raise ArithmeticError("back-substitution check failed")
    return x


def solve_consistent_exact(a, rhs, unknowns=None):
    """Solve a possibly overdetermined system with full column rank.

    Raises SingularMatrixError if the solution is not unique and
    InconsistentSystemError (with the first violated row) if no solution
    exists.  Every equation is re-checked on the returned solution.
    """
    m = len(a)
    n = unknowns if unknowns is not None else (len(a[0]) if a else 0)
    aug = [[rational(x) for x in row] + [rational(y)] for row, y in zip(a, rhs)]
    pivots = _row_reduce(aug, n)
    if len(pivots) < n:
        raise SingularMatrixError(len(pivots), n)
    x = [Fraction(0)] * n
    for i, c in enumerate(pivots):
        x[c] = aug[i][n]
    for i in range(m):
        lhs = sum((rational(a[i][j]) * x[j] for j in range(n) if a[i][j]), Fraction(0))
        if lhs != rational(rhs[i]):
            raise InconsistentSystemError(i, lhs - rational(rhs[i]))
    return x


def binomial(n, k):
    if k < 0 or k > n or n < 0:
        return 0
    from math import comb
    return comb(n, k)


__all__ = [
    "Rational", "rational", "rational_str", "TruncSeries", "series_mul",
    "series_compose_exp", "solve_linear_exact", "solve_consistent_exact",
    "rank_exact", "StructuralError", "SingularMatrixError",
    "InconsistentSystemError", "UnsupportedDirectionError", "mat_mul",
    "mat_vec", "transpose", "identity", "zeros", "binomial", "factorial",
    "rational_sqrt",
]
