"""Explore heading draws: a wrapped normal around a zone-dependent mean."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import wrap_angle


@dataclass(frozen=True)
class ExploreParams:
    mu: float = math.pi  # map-frame mean heading; pi points to -x
    sigma_search: float = 3.0
    sigma_out: float = 1.0
    speed_explore: float = 0.5
    speed_carry: float = 0.3

    def __post_init__(self):
        if not (self.sigma_search > 0 and self.sigma_out > 0):
            raise ValueError("sigmas must be positive")


def choose_explore_direction(in_search_zone: bool, rng: np.random.Generator,
                             params: ExploreParams = ExploreParams(), mu: float | None = None) -> float:
    """theta ~ N(mu, sigma^2) wrapped to (-pi, pi]; sigma depends on the zone."""
    sigma = params.sigma_search if in_search_zone else params.sigma_out
    m = params.mu if mu is None else mu
    return wrap_angle(m + sigma * float(rng.standard_normal()))


def p_negative_x(sigma: float, mu: float = math.pi) -> float:
    """P(cos(theta) < 0) for theta ~ N(mu, sigma^2), summed over the wrapped images."""
    from scipy.stats import norm
    total = 0.0
    # cos < 0 on (pi/2, 3pi/2) + 2 pi k
    for k in range(-50, 51):
        lo = math.pi / 2 + 2 * math.pi * k
        total += norm.cdf(lo + math.pi, mu, sigma) - norm.cdf(lo, mu, sigma)
    return total
