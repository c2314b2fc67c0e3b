"""Scaled Dirichlet energy E(B_r)/r of the sampled unit hedgehog.

The exact value is 12 pi for every r. On a grid the singular core loses a
fixed amount of energy proportional to h, so the relative error at radius r
behaves like c h / r. The script tabulates the error over grid sizes and the
Richardson combination 2 E(h/2) - E(h) on nested grids.

    python3 scripts/hedgehog_core_deficit.py
"""
import math

import numpy as np

from ldg.domain import DomainSpec, TensorField, build_grid
from ldg.energy import monotonicity_scan
from ldg.hedgehog import unit_hedgehog

RADII = [0.2, 0.4, 0.8]
exact = 12 * math.pi
scaled = {}
for n in (33, 49, 65, 97):
    g = build_grid(DomainSpec(), n)
    scan = monotonicity_scan(TensorField(g, unit_hedgehog(g), {}), 0.0, (0, 0, 0), RADII)
    scaled[n] = scan.scaled_energy
    deficit = (exact - scan.scaled_energy) * np.array(RADII) / g.h
    print(f"n={n:3d} h={g.h:.4f} ratio={np.round(scan.scaled_energy / exact, 4)} "
          f"deficit*r/h={np.round(deficit, 2)}")
for a, b in ((33, 65), (49, 97)):
    rich = 2 * scaled[b] - scaled[a]
    print(f"Richardson {a}->{b}: ratio={np.round(rich / exact, 4)}")
