#!/usr/bin/env python3
"""Walk the index geometry of a schedule: regions, weights, lattice coordinates.

Every index of the truncation belongs to exactly one region: the untouched
seed block, the b-fan (difference intervals and their gaps), or the c-fan
(the lattice of working intervals and their gaps).  Lay-off weights start
huge, end tiny, and fall by a constant ratio per step.
"""

import orbitlab as ol
from orbitlab import geometry as geo

sched, fams = ol.profiles.mini_schedule()
st = sched.stage(1)

print(f"stage 1: xi={st.xi}  b={st.b}  nu={st.nu}  c={st.c}  h={st.h}")
print(f"truncation: [0, {sched.xi_end}]\n")

print("region walk across stage 1:")
for iv in geo.stage_table(sched, 1):
    kind = type(iv.tag).__name__
    extra = ""
    if geo.is_layoff(iv.tag):
        w_lo = ol.layoff_weight(iv.lo, sched)
        w_hi = ol.layoff_weight(iv.hi, sched)
        extra = f"weights {w_lo:.3g} .. {w_hi:.3g}"
    elif isinstance(iv.tag, geo.CWorking):
        extra = f"lattice r={iv.tag.coord.r}"
    print(f"  [{iv.lo:5d}, {iv.hi:5d}]  {kind:12s} {extra}")

print("\nweight ratios are constant inside one gap:")
iv = [iv for iv in geo.stage_table(sched, 1)
      if geo.is_layoff(iv.tag) and iv.hi - iv.lo >= 3][0]
for j in range(iv.lo, iv.lo + 3):
    r = ol.layoff_weight(j, sched) / ol.layoff_weight(j + 1, sched)
    print(f"  w_{j}/w_{j + 1} = {r:.6f}")

print("\nlattice coordinates round-trip:")
coord = geo.LatticeCoord(1, (1, 1), 3)
j = ol.coord_to_index(coord, sched)
print(f"  r={coord.r}, offset {coord.alpha}  ->  index {j}")
print(f"  index {j}  ->  {ol.index_to_coord(j, sched)}")
