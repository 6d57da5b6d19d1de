#!/usr/bin/env python3
"""Compare orbit closures: who swallows whom.

Whichever vector shows a sufficiently large head coordinate first can be
steered onto the other through a triangular Toeplitz solve, so its orbit
closure contains the other one.  The decision is total on vectors with a
large head coordinate and flips under swapping; ties keep the first
argument in front.
"""

import numpy as np

import orbitlab as ol

sched, fams = ol.profiles.mini_schedule()
b = ol.assemble(sched, fams)
rng = np.random.default_rng(7)

x, y = {0: 1.0}, {1: 1.0}
res = ol.compare_orbits(b, x, y, 1)
print(f"x = f_0 vs y = f_1: {res.direction}")
print(f"  lead index {res.j_lead}, steering polynomial {res.poly.coeffs}")
print(f"  final residual {res.final_residual:.4g} "
      f"<= composed {res.composed_bound:.4g}")

res_sw = ol.compare_orbits(b, y, x, 1)
print(f"swapped arguments: {res_sw.direction}")

res_tie = ol.compare_orbits(b, x, dict(x), 1)
print(f"x vs x (tie rule): {res_tie.direction}, "
      f"polynomial {res_tie.poly.coeffs}")

print("\nrandom unit pairs:")
xi = sched.stage(1).xi
for _ in range(5):
    u = rng.standard_normal(xi + 1)
    v = rng.standard_normal(xi + 1)
    u, v = u / np.linalg.norm(u), v / np.linalg.norm(v)
    xu = {j: float(c) for j, c in enumerate(u)}
    yv = {j: float(c) for j, c in enumerate(v)}
    ju = ol.large_coord_index(b, xu, 1)
    jv = ol.large_coord_index(b, yv, 1)
    if ju is None or jv is None:
        continue
    r = ol.compare_orbits(b, xu, yv, 1)
    print(f"  lead indices ({ju.j}, {jv.j}) -> {r.direction}, "
          f"|steer| = {float(r.poly.ell1):.3g}, "
          f"final {r.final_residual:.3g}")
