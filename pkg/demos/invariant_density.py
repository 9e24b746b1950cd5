"""Invariant density near the neutral fixed point, two ways.

Builds the Ulam stationary vector and a long-orbit histogram, then prints
the power-law fit of mu([0, s)) and a few values of h(x) x^alpha.

    python demos/invariant_density.py [alpha]
"""

import sys

import numpy as np

from mpevt import measure
from mpevt.mpmap import MapParams

alpha = float(sys.argv[1]) if len(sys.argv) > 1 else 0.5
p = MapParams(alpha)

ulam = measure.stationary_density(measure.build_ulam(p, 8192, 1.01))
# 1e8 steps (about 20 s) are needed before the top decade is resolved to 1%
emp = measure.empirical_measure(p, n_samples=10**8, seed=1)

for name, mu in (("ulam", ulam), ("empirical", emp)):
    fit = measure.fit_mass_exponent(mu)
    lo, hi = measure.last_resolved_decade(mu)
    print(f"{name:>9}: slope {fit.slope:.4f} +- {fit.stderr:.4f} (target {1 - alpha:.2f}), "
          f"c = {measure.fit_mass_constant(mu):.4f}, flat over [{lo:.2e}, {hi:.2e}): "
          f"{measure.flatness(mu, lo, hi):.3f}")

print("\n        x    h(x) x^alpha (ulam)")
for x in np.logspace(-6, -1, 6):
    w = x * 0.01
    h = ulam.mass(x, x + w) / w
    print(f"  {x:.1e}    {h * x**alpha:.5f}")
