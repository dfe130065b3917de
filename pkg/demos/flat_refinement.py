"""Capacity, moduli and empirical constants on a refining flat solid torus.

    python3 demos/flat_refinement.py [--p 2]
"""

import argparse
import math
import time

from toromod import build_solid_torus, coarea_check, isoperimetric_check, run_duality, solve_capacity

ap = argparse.ArgumentParser()
ap.add_argument("--p", type=float, default=2.0)
args = ap.parse_args()

print(f"continuum capacity at p=2: pi = {math.pi:.6f}")
print(f"{'k_theta':>7} {'cap':>10} {'mod_paths':>10} {'mod_surf':>10} {'product':>12} "
      f"{'coarea':>7} {'iso':>7} {'secs':>6}")
for k in (8, 16, 32):
    t0 = time.perf_counter()
    c = build_solid_torus(k, 4, 12)
    row = run_duality(c, args.p)
    rep = solve_capacity(c, args.p)
    co = coarea_check(c, rep.lift, rep.rho0).constant
    iso = isoperimetric_check(c, rep.lift).ratio
    print(f"{k:>7} {row.cap:10.6f} {row.mod_paths:10.6f} {row.mod_surf:10.6f} {row.product:12.10f} "
          f"{co:7.4f} {iso:7.4f} {time.perf_counter() - t0:6.1f}")
