"""
Counting curves on P1xP1 and CP3
================================

Rational counts come from associativity of the quantum product; elliptic
counts come from the genus-one Virasoro constraints, which give an
overdetermined linear system in each degree.
"""

from frobvir import gw

# rational curves of bidegree (k, l) on P1xP1 through 2(k + l) - 1 points
n0 = gw.p1p1_rational(8)
print("N0(2,2) =", n0[(2, 2)], "  N0(3,3) =", n0[(3, 3)])

# elliptic curves through 2(k + l) points; every extra row of the system is checked
n1 = gw.p1p1_elliptic(8, n0)
print("N1(2,2) =", n1[(2, 2)], "  N1(3,3) =", n1[(3, 3)])
print("equations checked:", n1.extra["rows_checked"], "for", len(n1), "unknowns")

# the same counts through a second route: WDVV solved directly on the ansatz
wdvv = gw.p1p1_rational_wdvv(6)
print("WDVV route agrees:", all(wdvv[key] == n0[key] for key in wdvv.keys()))

# CP3: degree k curves through l points and 4k - 2l lines
cp3 = gw.cp3_rational(3)
for (k, l) in sorted(cp3.keys()):
    print(f"  degree {k}, {l} points, {4 * k - 2 * l} lines: {cp3[(k, l)]}")

e = gw.cp3_elliptic(3, cp3)
print("elliptic degree-1 counts:", [str(e.extra["elliptic"][(1, l)]) for l in range(3)])
print("elliptic space cubics meeting 12 lines:", e.extra["elliptic"][(3, 0)])
