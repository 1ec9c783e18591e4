"""Contour-integral transition probabilities against the truncated master equation."""
from hlpush.exact_formulas import master_equation_pmf, single_particle_pmf, transition_pmf_contour

b, t = 0.5, 0.3
print("one particle, t = 1:")
for k in (0, 1, 2, 5):
    print(f"  P(0 -> {k}) contour {transition_pmf_contour((0,), (k,), 1.0, b):.12f}"
          f"  compound Poisson {single_particle_pmf(1.0, k, b):.12f}")

init = (0, 1, 3)
me = master_equation_pmf(init, t, 45, b)
print(f"\nthree particles from {init}, t = {t} (master equation leak {me.leak:.1e}):")
for y in [(0, 1, 3), (1, 2, 4), (0, 2, 6), (2, 3, 5)]:
    c = transition_pmf_contour(init, y, t, b)
    print(f"  {y}: contour {c:.10f}  master {me[y]:.10f}  diff {abs(c - me[y]):.1e}")
