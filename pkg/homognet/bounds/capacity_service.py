"""Log covering numbers. Raw counts overflow at realistic R·n, so everything
stays in the log domain."""

import math

from homognet.bounds.capacity_models import CoveringQuery
from homognet.errors import ArgumentError


def ball_covering_log(radius: float, resolution: float, dimension: int) -> float:
    """n·log(1 + 2r/ν), the log of the volumetric bound on a ν-cover of the
    radius-r ball in ℝⁿ."""
    if not radius > 0 or not resolution > 0:
        raise ArgumentError(
            f"radius and resolution must be > 0, got {radius} and {resolution}"
        )
    if dimension < 1:
        raise ArgumentError(f"dimension must be ≥ 1, got {dimension}")
    return dimension * math.log1p(2.0 * radius / resolution)


def class_covering_log(query: CoveringQuery) -> float:
    """R times the log cover of the factor ball at resolution L_φν/γ"""
    return query.width * ball_covering_log(
        query.radius, query.lipschitz_ratio * query.resolution, query.dimension
    )
