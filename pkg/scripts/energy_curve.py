"""Minimal energy at fixed mass, attained and non-attained regimes.

For sigma = 1 the minimum lies strictly below -m and is attained. For
sigma = 3 masses under the threshold m0 give E = -m with a spreading
minimising sequence, which the solver reports as degenerate.
"""
from artifact.branch import POINT_DEGENERATE, scan_Emin
from artifact.functionals import ProblemParams
from artifact.inequality import estimate_M
from artifact.spectral import make_grid

curve = scan_Emin([0.5, 1.0, 2.0], ProblemParams(1, 1.0))
for m, e, lam in zip(curve.grid, curve.values, curve.multipliers):
    print(f"sigma=1  m={m:.2f}  E={e:+.6f}  E+m={e + m:+.2e}  multiplier={lam:.6f}")
print("flags:", curve.flags)

m0 = estimate_M(1, 2.0, 8.0, 0.75, make_grid(1, 64.0, 512), sigma=3.0).m0
print(f"\nsigma=3 threshold m0 ~ {m0:.4f}")
low = scan_Emin([m0 / 3, 2 * m0 / 3], ProblemParams(1, 3.0))
for m, e, f in zip(low.grid, low.values, low.point_flags):
    print(f"sigma=3  m={m:.4f}  E/m={e / m:+.8f}  degenerate={bool(int(f) & POINT_DEGENERATE)}")
