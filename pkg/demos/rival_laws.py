"""Four flux laws under the same temperature ramp T = 1 + x.

Each is solved to steady state with the finite-volume scheme and the
profile is fitted to a power of T.  Only the random-walk law gives the
T^(-1/2) profile, i.e. a Soret coefficient of 1/(2T).
"""

import numpy as np

from thermowalk import DomainSpec, fvm
from thermowalk.analysis import fit_soret

d = DomainSpec.line(100)
x = d.axis_centers(0)
T = 1 + x
D = np.full(d.shape, 0.005)
S = np.sqrt(T)

laws = {
    "fick": fvm.FluxLaw.fick(d, D),
    "chapman": fvm.FluxLaw.chapman(d, D),
    "vankampen": fvm.FluxLaw.van_kampen(d, D, T),
    "randomwalk": fvm.FluxLaw.random_walk(d, D, S),
}
for name, law in laws.items():
    st = fvm.run_to_steady(fvm.SolverState.start(law))
    u = st.normalized().values
    exp = fit_soret(u, T).exponent
    gap = np.max(np.abs(u - fvm.analytic_steady(law).values))
    print(f"{name:>10}: {st.steps:6d} steps  u ~ T^{exp:+.4f}  |u - closed form| {gap:.1e}")

fit = fit_soret(fvm.run_to_steady(fvm.SolverState.start(laws["randomwalk"])).u.values, T)
print("\nlocal S_T against 1/(2T):")
for i, s_t in zip(fit.index[::12], fit.local[::12]):
    print(f"  T={T[i]:.3f}  S_T={s_t:.5f}  1/(2T)={1 / (2 * T[i]):.5f}")
