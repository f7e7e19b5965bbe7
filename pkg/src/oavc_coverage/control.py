"""Move-to-centroid feedback law and the locational cost it descends."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, InvalidInputError
from .quadrature import CellMoments, QuadratureConfig, cell_moments


@dataclass(frozen=True)
class Gains:
    k0: float = 1.0
    k1: float = 0.01
    u_max: Optional[float] = None

    def __post_init__(self):
        if self.k0 < 0 or self.k1 < 0 or not self.k0 + self.k1 > 0:
            raise InvalidInputError(f"gains must be non-negative and not both zero: {self}")
        if self.u_max is not None and not self.u_max > 0:
            raise InvalidInputError(f"u_max must be positive when set, got {self.u_max}")


def control_gain(moments: CellMoments, gains: Gains) -> float:
    """Scalar gain ``k0 + k1 * J / M`` multiplying the centroid error."""
    if not moments.mass > 0:
        raise DomainError(f"cell mass must be positive, got {moments.mass}")
    return gains.k0 + gains.k1 * moments.geometric_second_moment / moments.mass


def saturate(u, u_max):
    if u_max is None:
        return u
    speed = float(np.hypot(u[0], u[1]))
    return u * (u_max / speed) if speed > u_max else u


def control_input(p_i, moments: CellMoments, gains: Gains):
    """Velocity command ``-(k0 + k1 J / M) (p_i - C_i)``, optionally saturated."""
    g = control_gain(moments, gains)
    u = -g * (np.asarray(p_i, dtype=float) - moments.centroid)
    return saturate(u, gains.u_max)


def cost_gradient(p_i, moments: CellMoments):
    """Partial derivative of the locational cost with respect to ``p_i`` (cells held fixed)."""
    if not moments.mass > 0:
        raise DomainError(f"cell mass must be positive, got {moments.mass}")
    return 2.0 * moments.mass * (np.asarray(p_i, dtype=float) - moments.centroid)


def locational_cost(positions, cells, density, t, cfg: QuadratureConfig = QuadratureConfig()):
    """Sum over agents of the density-weighted squared distance integrated over each cell."""
    total = 0.0
    for p, cell in zip(np.asarray(positions, dtype=float), cells):
        total += cell_moments(cell, p, density, t, cfg).weighted_second_moment
    return total
