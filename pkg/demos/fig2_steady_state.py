"""Walkers with position-dependent step length and waiting time pile up
where they move slowly.  Run the gridless walk on the unit square and
compare its histogram with 1/S.

    python demos/fig2_steady_state.py [particles] [t_final]
"""

import sys
import time

import numpy as np

from thermowalk import DomainSpec, WalkProfile, mc
from thermowalk.analysis import compare_grids, difference, noise_uniformity
from thermowalk.fields import theoretical_steady_state, diffusivity, walk_speed

count = int(float(sys.argv[1])) if len(sys.argv) > 1 else 100_000
t_final = float(sys.argv[2]) if len(sys.argv) > 2 else 300.0

profile = WalkProfile.paper_fig2()
domain = DomainSpec.square(50)

# D is flat, S is not
pts = domain.centers()
D = diffusivity(profile, pts)
S = walk_speed(profile, pts)
print(f"D in [{D.min():.6f}, {D.max():.6f}],  S in [{S.min():.3f}, {S.max():.3f}]")

ens = mc.init_ensemble(domain, count, seed=42)
t0 = time.perf_counter()
out = mc.simulate(ens, profile, t_final)
print(f"{count} walkers to t={t_final:g}: {out.steps.sum():.3g} steps in {time.perf_counter() - t0:.1f}s")

hist = mc.histogram(out, 50)
theory = theoretical_steady_state(profile, domain)
rep = compare_grids(hist, theory)
print("histogram vs 1/S:", rep.to_json())
print("histogram vs uniform:", compare_grids(hist, np.ones((50, 50))).to_json())

u = noise_uniformity(difference(hist, theory))
print("residual RMS per quadrant:")
print(np.round(u.quadrant_rms, 4), " ratio", round(u.ratio, 3))

# a coarse text picture, rows are x
coarse = hist.values.reshape(10, 5, 10, 5).mean(axis=(1, 3))
for row in coarse:
    print(" ".join(f"{v:4.2f}" for v in row))
