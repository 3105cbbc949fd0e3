"""Ground states of the fourth-order problem along the frequency c (N = 1, sigma = 1).

Computes the K optimiser (value I), then follows t(c) on a short grid and
prints the sandwich bounds and the identity residuals at each point.
"""
import numpy as np

from artifact.branch import optimizer_A, scan_tc, tc_bounds
from artifact.functionals import ProblemParams

params = ProblemParams(1, 1.0)
I = optimizer_A(params).value
print(f"I = {I:.12f}")

curve = scan_tc(np.geomspace(0.1, 10, 5), params, I=I)
print(f"{'c':>8} {'t(c)':>12} {'lower':>12} {'upper':>12} {'residual':>10}")
for c, t, _, res, _ in curve.rows():
    lo, hi = tc_bounds(params, c, I)
    print(f"{c:8.3f} {t:12.6f} {lo:12.6f} {hi:12.6f} {res:10.2e}")
print("flags:", curve.flags)
