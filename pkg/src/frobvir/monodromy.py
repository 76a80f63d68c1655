"""Monodromy data (V, <,>, mu, R) with a marked unit vector, its structural
checks, and the Pochhammer-type matrices P_m(mu + z, R).

Matrices are lists of rows of Fractions; entry ``A[i][j]`` is the
coefficient of ``e_i`` in ``A e_j``.  Indices are 0-based in code and
1-based in JSON documents and reports.
"""

import json
from fractions import Fraction
from importlib import resources

from .exactmath import rational, rational_str, mat_mul, transpose, identity, zeros


class HalfIntegerResonance(ValueError):
    def __init__(self, m, eigenvalue):
        super().__init__(
            f"P_{m} is undefined: eigenvalue {rational_str(eigenvalue)} is a half-integer")
        self.m = m
        self.eigenvalue = eigenvalue


class MonodromyData:
    def __init__(self, eta, mu_diag, r_parts=None, unit_index=1, charge_d=None, name=None):
        self.eta = [[rational(x) for x in row] for row in eta]
        self.n = len(self.eta)
        self.mu_diag = [rational(x) for x in mu_diag]
        parts = {}
        for k, mat in (r_parts or {}).items():
            mat = [[rational(x) for x in row] for row in mat]
            if any(any(row) for row in mat):
                parts[int(k)] = mat
        self.r_parts = dict(sorted(parts.items()))
        self.unit_index = int(unit_index)
        self.charge_d = (-2 * self.mu_diag[self.unit_index - 1]
                         if charge_d is None else rational(charge_d))
        self.name = name
        self.eta_inv = _inverse(self.eta)
        if any(len(row) != self.n for row in self.eta) or len(self.mu_diag) != self.n:
            raise ValueError("eta and mu must have size n")
        for mat in self.r_parts.values():
            if len(mat) != self.n or any(len(row) != self.n for row in mat):
                raise ValueError("R parts must be n x n")
        spread = max(self.mu_diag) - min(self.mu_diag)
        if self.r_parts and max(self.r_parts) > spread:
            raise ValueError(f"R part of degree {max(self.r_parts)} exceeds the mu spread {spread}")

    @property
    def mu(self):
        return [[self.mu_diag[i] if i == j else Fraction(0) for j in range(self.n)]
                for i in range(self.n)]

    @property
    def K(self):
        """Number of stored graded parts of R (the largest grade present)."""
        return max(self.r_parts) if self.r_parts else 0

    def r(self, k):
        return self.r_parts.get(k, zeros(self.n))

    def has_half_integer_spectrum(self):
        return any((2 * x).denominator == 1 and x.denominator == 2 for x in self.mu_diag)

    def r_window(self):
        """(n-1)*K, the widest level shift the R-tail can produce."""
        return (self.n - 1) * self.K

    # serialization

    def to_json(self):
        return {
            "name": self.name,
            "n": self.n,
            "eta": [[rational_str(x) for x in row] for row in self.eta],
            "mu_diag": [rational_str(x) for x in self.mu_diag],
            "r_parts": [{"k": k, "matrix": [[rational_str(x) for x in row] for row in m]}
                        for k, m in self.r_parts.items()],
            "unit_index": self.unit_index,
            "charge_d": rational_str(self.charge_d),
        }

    @classmethod
    def from_json(cls, doc):
        n = int(doc["n"])
        eta = doc["eta"]
        if len(eta) == n * n and not isinstance(eta[0], list):
            eta = [eta[i * n:(i + 1) * n] for i in range(n)]
        parts = {}
        for item in doc.get("r_parts", []):
            mat = item["matrix"]
            if len(mat) == n * n and not isinstance(mat[0], list):
                mat = [mat[i * n:(i + 1) * n] for i in range(n)]
            parts[int(item["k"])] = mat
        return cls(eta, doc["mu_diag"], parts, doc.get("unit_index", 1),
                   doc.get("charge_d"), doc.get("name"))


def load_monodromy(source):
    """Load from a bundled model id or a JSON file path."""
    if isinstance(source, MonodromyData):
        return source
    text = None
    ids = bundled_ids()
    key = MODEL_ALIASES.get(source, source)
    if key in ids:
        text = resources.files("frobvir.models").joinpath(f"{key}.monodromy.json").read_text()
    else:
        with open(source) as fh:
            text = fh.read()
    return MonodromyData.from_json(json.loads(text))


MODEL_ALIASES = {"n1": "trivial-n1"}


def bundled_ids():
    return ("trivial-n1", "cp1", "p1xp1", "cp3")


def _inverse(a):
    from .exactmath import solve_linear_exact
    n = len(a)
    cols = [solve_linear_exact(a, [Fraction(int(i == j)) for i in range(n)]) for j in range(n)]
    return transpose(cols)


def _first_nonzero(mat):
    for i, row in enumerate(mat):
        for j, x in enumerate(row):
            if x:
                return {"row": i + 1, "col": j + 1, "value": rational_str(x)}
    return None


def _sub(a, b):
    return [[x - y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _add(a, b):
    return [[x + y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _scale(a, c):
    return [[x * c for x in row] for row in a]


def validate(data):
    """Check the structural conditions; every check appears in the report."""
    n = data.n
    mu, eta = data.mu, data.eta
    checks = []

    def add(name, residual):
        bad = _first_nonzero(residual)
        checks.append({"check": name, "pass": bad is None, "first_violation": bad})

    add("eta_symmetric", _sub(eta, transpose(eta)))
    add("mu_antisymmetric", _add(mat_mul(transpose(mu), eta), mat_mul(eta, mu)))
    for k, rk in data.r_parts.items():
        comm = _sub(_sub(mat_mul(mu, rk), mat_mul(rk, mu)), _scale(rk, k))
        add(f"R{k}_grading", comm)
        sym = _add(mat_mul(transpose(rk), eta), _scale(mat_mul(eta, rk), (-1) ** k))
        add(f"R{k}_symmetry", sym)
        gaps = {a - b for a in data.mu_diag for b in data.mu_diag}
        add(f"R{k}_nonresonance", zeros(n) if k in gaps else rk)
    u = data.unit_index - 1
    unit_res = [[Fraction(0)] for _ in range(n)]
    for i in range(n):
        val = mu[i][u] - (-data.charge_d / 2 if i == u else 0)
        unit_res[i][0] = val
    add("unit_eigenvector", unit_res)
    return {"name": data.name, "pass": all(c["pass"] for c in checks), "checks": checks}


def component(a, k, data):
    """The part of ``a`` raising mu-eigenvalues by exactly ``k``."""
    mu = data.mu_diag
    n = data.n
    return [[a[i][j] if mu[i] - mu[j] == k else Fraction(0) for j in range(n)]
            for i in range(n)]


def r_power_component(data, k, l):
    """R_{k,l}: the grade-k part of R^l."""
    n = data.n
    if l == 0:
        return identity(n) if k == 0 else zeros(n)
    if k < l:
        return zeros(n)
    total = zeros(n)
    for first, rf in data.r_parts.items():
        if first > k:
            break
        rest = r_power_component(data, k - first, l - 1)
        if any(any(row) for row in rest):
            total = _add(total, mat_mul(rf, rest))
    return total


def _poly_mul(a, b, top):
    out = [Fraction(0)] * (top + 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b[:top + 1 - i]):
                out[i + j] += x * y
    return out


def pochhammer_taylor(m, y0, top):
    """Taylor coefficients c_0..c_top at y0 of the scalar factor of P_m.

    For m >= 0 the factor is prod_{j=0..m} (y + j - 1/2); for m = -1 it is
    1; for m < -1 it is prod_{j=1..-m-1} 1/(y - j - 1/2).
    """
    y0 = Fraction(y0)
    half = Fraction(1, 2)
    coeffs = [Fraction(1)] + [Fraction(0)] * top
    if m >= 0:
        for j in range(m + 1):
            coeffs = _poly_mul(coeffs, [y0 + j - half, Fraction(1)], top)
    elif m < -1:
        if (y0 - half).denominator == 1:
            raise HalfIntegerResonance(m, y0)
        for j in range(1, -m):
            a = y0 - j - half
            # 1/(a + h) = sum (-1)^s h^s / a^(s+1)
            coeffs = _poly_mul(coeffs, [Fraction((-1) ** s) / a ** (s + 1)
                                        for s in range(top + 1)], top)
    return coeffs


def pm_component(data, m, z, q):
    """[P_m(mu + z, R)]_q, built as sum_l R_{q,l} diag(c_l(mu + z))."""
    n = data.n
    z = rational(z)
    if m < -1:
        for x in data.mu_diag:
            if ((x + z) - Fraction(1, 2)).denominator == 1:
                raise HalfIntegerResonance(m, x + z)
    top = n
    taylors = [pochhammer_taylor(m, x + z, top) for x in data.mu_diag]
    out = zeros(n)
    for l in range(0, min(q, top) + 1):
        rql = r_power_component(data, q, l)
        if not any(any(row) for row in rql):
            continue
        for i in range(n):
            for j in range(n):
                if rql[i][j]:
                    out[i][j] += rql[i][j] * taylors[j][l]
    return out


def pm_matrix(data, m, z=0):
    """P_m(mu + z, R) as a full matrix (sum of its graded components)."""
    out = zeros(data.n)
    for q in range(0, _spread(data) + 1):
        out = _add(out, pm_component(data, m, z, q))
    return out


def _spread(data):
    return int(max(data.mu_diag) - min(data.mu_diag))


def pm_symmetry_residual(data, m, z, q):
    """eta [P_m(mu+z+1)]_q - (-1)^(m+q+1) [P_m(mu-m-z+q)]_q^T eta."""
    lhs = mat_mul(data.eta, pm_component(data, m, rational(z) + 1, q))
    rhs = mat_mul(transpose(pm_component(data, m, -m - rational(z) + q, q)), data.eta)
    return _sub(lhs, _scale(rhs, (-1) ** (m + q + 1)))
