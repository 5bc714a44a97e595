"""Output noise of single-mode TMS codes over the (r, theta) ancilla family.

Prints the optimized RMS error on a coarse grid, marks the grid minimum and
compares it with the hexagonal lattice.

    python3 demos/sweep_landscape.py [n_r] [n_theta]
"""
import sys

import numpy as np

from gkpcodes.optimize import SweepGrid, optimize_gain, sweep_single_mode

n_r = int(sys.argv[1]) if len(sys.argv) > 1 else 8
n_t = int(sys.argv[2]) if len(sys.argv) > 2 else 8
grid = SweepGrid.uniform(n_r, n_t, 1e-2)
rows = sweep_single_mode(grid)

table = np.array([r["sigma_rms_sq"] for r in rows]).reshape(n_r, n_t)
print("r \\ theta/pi " + " ".join(f"{t / np.pi:8.3f}" for t in grid.theta_values))
for r, line in zip(grid.r_values, table):
    print(f"{r:12.3f} " + " ".join(f"{1e3 * v:8.4f}" for v in line))
print("(entries are sigma_RMS^2 x 1e3 at sigma^2 = 1e-2)")

best = min(rows, key=lambda r: r["sigma_rms_sq"])
hexa = optimize_gain("hexagonal", sigma_sq=1e-2)
sq = optimize_gain("square", sigma_sq=1e-2)
print(f"grid minimum  r={best['r']:.3f} theta={best['theta'] / np.pi:.3f}pi "
      f"-> {best['sigma_rms_sq']:.6e}")
print(f"hexagonal     {hexa.sigma_rms_sq:.6e} at G={hexa.params['G']:.4f}")
print(f"square        {sq.sigma_rms_sq:.6e} at G={sq.params['G']:.4f}")
