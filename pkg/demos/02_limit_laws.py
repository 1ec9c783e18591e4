"""Tabulate the limiting laws as Fredholm determinants on complex contours.

Each value is checked against an independent real-line quadrature.
"""
import numpy as np
from scipy.special import ndtr

from hlpush.fredholm import (
    distribution_mean,
    distribution_median,
    distribution_table,
    f_goe_real_line,
    f_goe_sq,
    f_gue,
    f_gue_real_line,
    gaussian_via_fredholm,
)

print(f"{'s':>5} {'F_GUE':>14} {'real line':>14} {'F_GOE^2':>14} {'real line':>14} {'Gauss':>10}")
for s in np.arange(-4.0, 2.01, 1.0):
    print(f"{s:5.1f} {f_gue(s):14.10f} {f_gue_real_line(s):14.10f} "
          f"{f_goe_sq(s):14.10f} {f_goe_real_line(s) ** 2:14.10f} "
          f"{gaussian_via_fredholm(s) - ndtr(s):10.1e}")

tab = distribution_table("gue")
print(f"\nGUE median {distribution_median(tab.cdf):.5f}, mean {distribution_mean(tab.cdf):.5f}")
