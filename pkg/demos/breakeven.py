"""QEC ratio sigma_GM / sigma of single-mode codes and the break-even noise.

    python3 demos/breakeven.py
"""
import numpy as np

from gkpcodes.bounds import breakeven_window
from gkpcodes.optimize import find_breakeven, optimize_gain

print(f"{'sigma':>6} {'sq mmse':>9} {'hex mmse':>9} {'sq linear':>9}")
for s in np.linspace(0.1, 0.65, 12):
    ratios = [np.sqrt(optimize_gain(lat, sigma=s, estimator_kind=k, objective="gm").sigma_gm_sq) / s
              for lat, k in (("square", "mmse"), ("hexagonal", "mmse"), ("square", "linear"))]
    print(f"{s:6.3f} " + " ".join(f"{x:9.4f}" for x in ratios))

lo, hi = breakeven_window()
print(f"information-theoretic window [{lo:.5f}, {hi:.5f}]")
for lat, k, br in (("square", "mmse", (0.59, 0.62)), ("hexagonal", "mmse", (0.59, 0.62)),
                   ("square", "linear", (0.5, 0.6))):
    out = find_breakeven(lat, k, tol=1e-4, bracket=br)
    print(f"{lat:9s} {k:6s} sigma* = {out['sigma_star']:.5f}")
