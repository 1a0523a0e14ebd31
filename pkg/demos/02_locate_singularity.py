# coding: utf-8

# # Where the generating function blows up
#
# F0(z) = sum n_{0,d} e^{dz} converges up to some real x0. We find x0 two ways:
# by integrating an ODE flow until its event condition fires, and by solving
# truncated series equations and extrapolating in the truncation order.

from gwasym import working_precision
from gwasym.flow import init_state, integrate_to_event
from gwasym.invariants import build_tables
from gwasym.singularity import analyze, x0_from_series

g0, g1 = build_tables(200, 5000, 256)

# ## The flow
#
# Start far to the left (z = -30), where a handful of terms of the series is
# plenty, and integrate with a high order Taylor method.

ev = integrate_to_event(init_state(-30, g0))
print("event time", float(ev.t1), "after", len(ev.steps), "steps")
print("x0 (flow)  ", ev.state.z)

# ## The series
#
# Each truncation of the series reaches the target value a bit too late, so
# the roots decrease toward x0. Six truncation orders and a fit in powers of
# 1/D pin it down.

x_series, roots = x0_from_series(g0, return_roots=True)
for D, r in roots.items():
    print(f"D = {D:5d}   root = {float(r):.15f}")
with working_precision(256):
    print("x0 (series)", x_series, " difference", float(abs(x_series - ev.state.z)))

# ## Local data
#
# The full analysis inverts the local expansion at the event into a
# half-integer power series and reads off both coefficient families.

rep = analyze(g0, event=ev)
print("c'_1 =", float(rep.cprime[1]), "(negative)")
print("a0_3 =", float(rep.a0[3]), "(positive)")
print("g'_-2 =", float(rep.gprime[0]), "= 1/48")
for name, chk in rep.checks.items():
    print("PASS" if chk["pass"] else "FAIL", name)
