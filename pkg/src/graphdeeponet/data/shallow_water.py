"""Random initial water heights for the 2D shallow-water setup on [-2.5, 2.5]^2.

Only the initial condition is provided; the time evolution is not solved here.
"""

import numpy as np

from ..errors import InvalidArgumentError
from ..geometry import DomainSpec, SensorSet

SHALLOW_WATER_DOMAIN = DomainSpec((-2.5, -2.5), (2.5, 2.5), (False, False))
RADIUS_RANGE = (0.3, 0.7)


def shallow_water_height(r: float, positions, invert: bool = False) -> np.ndarray:
    """2.0 where ``r < |x|`` and 1.0 otherwise; ``invert`` swaps the two levels
    (2.0 inside the disc, the usual dam-break picture)."""
    positions = np.asarray(positions, dtype=np.float64)
    outside = r < np.sqrt(np.sum(positions**2, axis=-1))
    high = ~outside if invert else outside
    return np.where(high, 2.0, 1.0)


def sample_shallow_water_ic(seed: int, grid: SensorSet, invert: bool = False) -> np.ndarray:
    if grid.domain.dim != 2:
        raise InvalidArgumentError("shallow-water initial condition needs a 2D grid")
    r = np.random.default_rng(seed).uniform(*RADIUS_RANGE)
    return shallow_water_height(r, grid.positions, invert)
