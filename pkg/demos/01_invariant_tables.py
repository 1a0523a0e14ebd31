# coding: utf-8

# # Invariant tables
#
# The normalized counts n_{0,d} of rational plane curves come from a quadratic
# recursion in exact rationals. Here we build a few, check them against the
# integer counts everyone knows, and look at how fast they shrink.

from fractions import Fraction
from math import factorial

import gmpy2

from gwasym import genus0_table, genus1_table, verify_bounds, verify_wdvv_series, working_precision
from gwasym.invariants import build_tables

# ## Exact values
#
# n_{0,d} is N_d / (3d - 1)!, so multiplying back gives the familiar integers
# 1, 1, 12, 620, 87304, ...

g0 = genus0_table(8)
for d in range(1, 9):
    print(d, g0.values[d], g0.values[d] * factorial(3 * d - 1))

# The genus-one counts vanish below degree 3: lines and conics are rational.

g1 = genus1_table(8, g0)
print([str(g1.values[d]) for d in range(1, 6)])
assert g1.values[3] == Fraction(1, factorial(9))

# ## Consistency checks
#
# The generating function satisfies a third-order ODE; with exact rationals the
# residual is literally zero, coefficient by coefficient.

rep = verify_wdvv_series(genus0_table(40), 40)
print("all zero:", rep.ok, " orders checked:", len(rep.residuals))

# Every n_{0,d} sits between two explicit exponentials. No violations through 200.

print("bound violations:", verify_bounds(genus0_table(200)))

# ## Going further in floating point
#
# Exact rationals get slow past a few hundred. The floating tables keep
# 256-bit mantissas and agree with the exact prefix to the last bits.

g0f, g1f = build_tables(100, 1500, 256)
with working_precision(256):
    for d in (10, 100, 500, 1500):
        root = gmpy2.exp(gmpy2.log(g0f.value(d)) / d)
        print(f"d = {d:5d}   n^(1/d) = {float(root):.8f}")

# The d-th roots creep toward a limit near 0.138; where that limit comes from
# is the subject of the next demo.
