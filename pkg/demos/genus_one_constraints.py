"""
Genus-zero and genus-one constraints on CP1
===========================================

Build the genus-0 solution t0(T) by fixed-point iteration, assemble the
free energies F0 and F1, and apply L_m to exp(F0/eps^2 + F1).
"""

from frobvir.frobenius import (
    load_model, g_function, canonical_frame, Genus0, Genus1,
)
from frobvir.constraints import evaluate_range

model = load_model("cp1")

# canonical coordinates split at Q = 1
frame = canonical_frame(model, 3)
print("u1, u2 at the basepoint:", [u.constant_term() for u in frame.u])

G = g_function(model, 3)
print("G =", G.to_str())

g0 = Genus0(model, 2, 4)
F0 = g0.free_energy()
print("F0 has", len(F0), "terms through degree 4")
F1 = Genus1(g0, G).F1
print("F1 =", F1.truncate(2).to_str())

for genus, order in ((0, 4), (1, 3)):
    for report in evaluate_range(model, genus, [-1, 0, 1], 3, order):
        print(report)
