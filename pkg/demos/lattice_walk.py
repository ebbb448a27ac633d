"""The grid picture: particles hop between evenly spaced sites, waiting
dt_i at site i.  At a fixed time the occupancy follows dt_i, i.e. 1/S,
the same state the gridless walk reaches.
"""

import numpy as np

from thermowalk import mc

n = 50
x = (np.arange(n) + 0.5) / n
site_dt = (0.2 + (x - 0.5) ** 2) ** 2
st = mc.init_lattice(x, site_dt, 100_000, seed=7)

for t in (10.0, 100.0, 1000.0):
    out = mc.lattice_run(st, t)
    occ = out.occupancy / out.occupancy.mean()
    target = site_dt / site_dt.mean()
    print(f"t={t:6.0f}  mean jumps {out.jumps.mean():8.0f}  rel L2 vs 1/S "
          f"{np.linalg.norm(occ - target) / np.linalg.norm(target):.4f}")
