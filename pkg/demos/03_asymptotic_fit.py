# coding: utf-8

# # How good are the expansions?
#
# With x0 and the coefficients in hand, n_{g,d} e^{d x0} should look like a
# sum of half-integer powers of d. We compare against the tables.

import numpy as np

from gwasym import working_precision
from gwasym.asymptotics import AsymptoticModel, leading_ratios, residual_order_fit, root_convergence
from gwasym.invariants import build_tables
from gwasym.singularity import analyze

g0, g1 = build_tables(200, 5000, 256)
rep = analyze(g0)

# ## Leading terms
#
# Genus 0 starts at a0_3 d^{-7/2}, genus 1 at 1/(48 d). The ratios drift to 1,
# the genus-one one noticeably slower (its correction is only d^{-1/2} smaller).

with working_precision(256):
    for d in (500, 1000, 2000, 5000):
        r0 = leading_ratios(g0, rep, [d])[0]
        r1 = leading_ratios(g1, rep, [d])[0]
        print(f"d = {d:5d}   genus 0 {float(r0):.6f}   genus 1 {float(r1):.6f}")

# ## Residual slopes
#
# Dropping terms from the N-th on should leave a residual of size d^{-(N+1/2)}
# (genus 0) or d^{-(N+3/2)} (genus 1). A log-log fit over [2500, 5000] shows it.

window = range(2500, 5001)
for genus, Ns, shift in ((0, (4, 5, 6), 0.5), (1, (0, 1, 2), 1.5)):
    table = g0 if genus == 0 else g1
    for N in Ns:
        slope = residual_order_fit(table, AsymptoticModel.from_report(rep, genus, N), window)
        print(f"genus {genus}  N = {N}  slope {slope:8.4f}  expected {-(N + shift)}")

# ## d-th roots
#
# The crudest statement: both n_{0,d}^{1/d} and n_{1,d}^{1/d} approach e^{-x0}.

diag = root_convergence(g0, g1, rep.x0, window=window)
print({k: float(v) for k, v in diag.final.items()})
print("log-log slope of the genus-0 gap:",
      np.polyfit(np.log(diag.ds), np.log([float(g) for g in diag.gap0]), 1)[0])
