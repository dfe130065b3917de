"""Ring closed forms next to the solver output.

    python3 demos/ring_duality.py
"""

from toromod import build_ring, run_duality
from toromod.modulus import conjugate

print(f"{'m':>2} {'L':>4} {'A':>4} {'p':>4} {'cap':>12} {'A L^(1-p)':>12} {'mod_surf':>12} {'product':>12}")
for m in (3, 8):
    for L, A in ((1.0, 1.0), (2.0, 3.0)):
        for p in (1.5, 2.0, 3.0):
            row = run_duality(build_ring(m, L, A), p)
            print(f"{m:>2} {L:>4g} {A:>4g} {p:>4g} {row.cap:12.8f} {A * L ** (1 - p):12.8f} "
                  f"{row.mod_surf:12.8f} {row.product:12.10f}")
print(f"mod_surf closed form is L A^(1-p*), e.g. p=3 -> p*={conjugate(3.0):g}")
