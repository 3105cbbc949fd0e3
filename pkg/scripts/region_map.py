"""Where is the interpolation quotient bounded?

Prints the exact verdict for the sigma-family (s = 2, p = 2 sigma + 2,
kappa = sigma/(sigma + 1)) in dimensions 1-3, then checks a few random
interior points against the numerically integrated profiles.
"""
from fractions import Fraction

import numpy as np

from artifact.inequality import classify_sigma, profile_F, profile_G, sample_region_points

for dim in (1, 2, 3):
    row = []
    for sigma in (Fraction(1, 2), Fraction(1), Fraction(3, 2), Fraction(2), Fraction(3),
                  Fraction(4), Fraction(6)):
        row.append(f"{str(sigma):>4}:{classify_sigma(dim, sigma).classification}")
    print(f"N={dim}  " + "  ".join(row))

rng = np.random.default_rng(7)
print("\nprofile check (s, p, kappa) -> exact / numerical")
for dim, kind in ((1, "F"), (2, "G")):
    for pt in sample_region_points(dim, 4, rng, for_profile=kind):
        curve = (profile_F if kind == "F" else profile_G)(float(pt.s), float(pt.p),
                                                          float(pt.kappa), dim)
        print(f"N={dim} ({float(pt.s):.3f}, {float(pt.p):.3f}, {float(pt.kappa):.3f})"
              f" -> {pt.classification} / {curve.verdict}"
              f"  slopes {curve.slope0:+.3f} {curve.slope_inf:+.3f}")
