"""
Virasoro operators from monodromy data
======================================

Each L_m is a quadratic operator in the couplings.  It is built once from
the normally ordered Heisenberg bilinear and once from explicit formulas;
the two must agree entry by entry, and the commutators must close.
"""

from frobvir.monodromy import load_monodromy
from frobvir.virasoro import build_operator, closed_form_operator, check_virasoro_relations

data = load_monodromy("cp1")
print("mu =", data.mu_diag, " R1 =", data.r(1))

L0 = build_operator(data, 0, 3)
print("L0 constant:", L0.const)
for ((a, p), (b, q)), v in sorted(L0.td.items()):
    print(f"  Tt^({a + 1},{p}) d/dT^({b + 1},{q}) : {v}")

print("closed forms agree:",
      all(build_operator(data, m, 8).first_difference(closed_form_operator(data, m, 8)) is None
          for m in (-1, 0, 1, 2)))

# half-integer spectrum: L_{-2} is not defined for CP1
for row in check_virasoro_relations(data, [-1, 0, 1, 2], 8):
    status = "resonant" if row["resonant"] else ("ok" if row["pass"] else "FAIL")
    print(f"  [L_{row['i']}, L_{row['j']}]: {status} (window {row['window']})")
