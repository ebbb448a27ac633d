"""Diffusion in heterogeneous environments: walkers, finite volumes, closed forms."""

from .errors import ConfigError, DomainError, NumericalError, ThermowalkError, UnsupportedCaseError
from .fields import (
    CoefficientSet,
    DomainSpec,
    FieldGrid,
    PhysicalParams,
    SpeedModel,
    ViscosityModel,
    WalkProfile,
    coefficients,
    diffusivity,
    einstein_diffusivity,
    eval_profile,
    soret_coefficient,
    speed_from_temperature,
    theoretical_steady_state,
    thermal_diffusivity,
    walk_speed,
)

__version__ = "0.1.0"
