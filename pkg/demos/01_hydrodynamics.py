"""Run the particle system from packed initial data and watch the height profile.

Below the speed threshold nu = 1/(1 - b) no particle has arrived yet. Above
it the rescaled height approaches the limit shape.
"""
import numpy as np

from hlpush.observables import classify_regime, limit_shape
from hlpush.particle_system import sample_heights_batch

b, t, reps = 0.5, 400.0, 50
rng = np.random.default_rng(1)

print(f"b = {b}, t = {t}, {reps} replicas per point")
print(f"{'nu':>6} {'N/t (MC)':>10} {'limit':>10}")
for nu in (1.0, 2.0, 2.5, 3.0, 4.0, 6.0):
    n = sample_heights_batch(b, 1.0, int(nu * t), t, reps, rng) / t
    print(f"{nu:6.2f} {n.mean():10.5f} {limit_shape(nu, b):10.5f}")

for rho in (1.0, 0.2):
    c = classify_regime(4.0, b, rho)
    print(f"\nrho = {rho}: regime {c.regime.value}")
    for k, v in c.to_dict().items():
        if v is not None and k != "regime":
            print(f"  {k:12s} {v}")
