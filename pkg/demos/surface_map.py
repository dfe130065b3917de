"""Degree-1 map built from a level cut of the capacity minimizer, and the
per-cut upper bound on the capacity.

    python3 demos/surface_map.py
"""

import numpy as np

from toromod import build_solid_torus, level_cut, solve_capacity, surface_to_degree_one_map
from toromod.surfaces import systole

c = build_solid_torus(12, 2, 6, warp="sin:0.3")
eps = systole(c) / 8
for p in (1.5, 2.0, 3.0):
    rep = solve_capacity(c, p)
    for t in (0.25, 0.75):
        cut = level_cut(c, rep.lift, t)
        sm = surface_to_degree_one_map(c, cut, eps)
        bound = float(np.sum(sm.density * rep.rho0 ** (p - 1) * c.mu_e))
        print(f"p={p:g} t={t:g}: |cut|={cut.edges.size:3d} support={np.count_nonzero(sm.density):3d} "
              f"cap={rep.value:.5f} <= bound={bound:.5f}")
