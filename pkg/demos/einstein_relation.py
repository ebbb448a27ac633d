"""Mean squared displacement of a homogeneous walk, and the transport
coefficients of a Brownian sphere in water with S = sqrt(T).
"""

import numpy as np

from thermowalk import DomainSpec, PhysicalParams, SpeedModel, WalkProfile, mc
from thermowalk.fields import einstein_diffusivity, soret_coefficient, thermal_diffusivity

dom = DomainSpec.square(10)
e = mc.init_ensemble(dom, 200_000, seed=3, track_displacement=True)
for t in (1.0, 5.0, 20.0):
    out = mc.simulate(e, WalkProfile.constant(0.01, 0.01), t)
    print(f"t={t:5.1f}  <x^2>/(4t) = {mc.variance(e, out, t):.6f}   (dx^2/(4 dt) = 0.0025)")

p = PhysicalParams()
T = np.array([280.0, 300.0, 320.0, 340.0])
kappa = einstein_diffusivity(T, p)
DT = thermal_diffusivity(kappa, SpeedModel(), T)
ST = soret_coefficient(SpeedModel(), T)
print("\n   T      kappa [m2/s]    D_T [m2/(s K)]   S_T [1/K]")
for row in zip(T, kappa, DT, ST):
    print("{:5.0f}  {:.4e}   {:.4e}     {:.4e}".format(*row))
