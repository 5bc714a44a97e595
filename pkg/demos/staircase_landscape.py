"""Monte Carlo landscape of the upward staircase code on two ancilla modes.

Evaluates sigma_GM on a small (G1, G2) grid with common random numbers and
runs the multi-start optimizer.  The landscape is shallow near its minimum,
so distant gain pairs can give nearly equal output noise.

    python3 demos/staircase_landscape.py [lattice] [sigma]
"""
import sys

import numpy as np

from gkpcodes.lattice import by_name
from gkpcodes.optimize import optimize_concat, staircase_objective

name = sys.argv[1] if len(sys.argv) > 1 else "square2"
sigma = float(sys.argv[2]) if len(sys.argv) > 2 else 0.2
lat = by_name(name)

g1s = np.geomspace(1.5, 12.0, 6)
g2s = np.array([1.0, 1.1, 1.25, 1.5, 2.0])
print("G1 \\ G2 " + " ".join(f"{g:8.2f}" for g in g2s))
for g1 in g1s:
    vals = [staircase_objective(lat, sigma, g1, g2, n_samples=16_384, seed=1).sigma_gm
            for g2 in g2s]
    print(f"{g1:7.2f} " + " ".join(f"{v:8.5f}" for v in vals))

res = optimize_concat(lat, sigma, n_samples=16_384, seed=1)
print(f"optimum G1={res.params['G1']:.3f} G2={res.params['G2']:.3f} "
      f"sigma_GM={np.sqrt(res.sigma_gm_sq):.5f} (start spread {res.multi_start_spread:.2e})")
