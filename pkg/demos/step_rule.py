"""Where the step is evaluated matters.

Taking dx and dt at the departure point gives a walk whose density relaxes
to 1/D; taking them at the midpoint of the step gives 1/S.  For the
heterogeneous profile D is constant, so the two rules disagree completely.
"""

import numpy as np

from thermowalk import DomainSpec, WalkProfile, mc
from thermowalk.fields import theoretical_steady_state

line = DomainSpec.line(25)
profile = WalkProfile.paper_fig2()
theory = theoretical_steady_state(profile, line).values
ens = mc.init_ensemble(line, 100_000, seed=1)

for rule in ("departure", "midpoint"):
    h = mc.histogram(mc.simulate(ens, profile, 100.0, rule=rule), 25).values
    e_s = np.linalg.norm(h - theory) / np.linalg.norm(theory)
    e_u = np.linalg.norm(h - 1) / np.sqrt(h.size)
    print(f"{rule:>9}:  rel L2 vs 1/S {e_s:.3f}   vs uniform {e_u:.3f}")

print("\n x      1/S   ")
for x, v in zip(line.axis_centers(0)[::3], theory[::3]):
    print(f"{x:.2f}  {v:.3f}")
