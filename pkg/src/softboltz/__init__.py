"""softboltz: a desk-scale kinetic laboratory for soft-potential Boltzmann
dynamics in bounded domains with diffuse-reflection walls.

The package builds stationary solutions driven by non-isothermal wall
temperatures, evolves the time-dependent problem around them, and verifies
the quantitative structure of the underlying operators: kernel symmetry and
smallness scalings, wall-cycle measure decay, contraction rates of the
fixed-point solvers, conservation laws, positivity, and stretched-
exponential decay exponents.
"""

__version__ = "0.1.0"

from .geometry import Domain, ExitRecord, ball, exit_time, is_near_grazing, slab, speeded_exit_time
from .velocity import (
    VelocityGrid,
    WallTemperature,
    WeightSpec,
    collision_frequency,
    flux_normalization,
    maxwellian,
    sample_flux_velocity,
    weight,
)

__all__ = [
    "Domain",
    "ExitRecord",
    "VelocityGrid",
    "WallTemperature",
    "WeightSpec",
    "ball",
    "collision_frequency",
    "exit_time",
    "flux_normalization",
    "is_near_grazing",
    "maxwellian",
    "sample_flux_velocity",
    "slab",
    "speeded_exit_time",
    "weight",
]
