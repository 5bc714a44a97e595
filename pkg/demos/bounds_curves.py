"""Ratio sigma_LB / sigma against input noise for several M/N.

    python3 demos/bounds_curves.py
"""
import numpy as np

from gkpcodes.bounds import lb_crossing, lb_ratio_curve

ratios = (1, 2, 4, 100)
sig = np.linspace(0.05, 0.9, 18)
print(f"{'sigma':>6} " + " ".join(f"{'M/N=' + str(r):>10}" for r in ratios))
for s in sig:
    print(f"{s:6.3f} " + " ".join(f"{lb_ratio_curve([s], r)[0]:10.4g}" for r in ratios))
for r in ratios:
    print(f"M/N={r:<4d} crosses 1 at sigma = {lb_crossing(r):.6f}")
print(f"1/sqrt(2) = {1 / np.sqrt(2):.6f}; every curve passes sqrt(2/e) there")
