"""
Unit tests for the log covering numbers.
"""

import itertools
import math

import numpy as np
import pytest

from homognet.bounds.capacity_models import CoveringQuery
from homognet.bounds.capacity_service import ball_covering_log, class_covering_log
from homognet.errors import ArgumentError


def _greedy_packing(radius: float, resolution: float, dimension: int) -> int:
    """Size of a greedy ν-separated subset of a grid inside the ball."""
    axis = np.arange(-radius, radius + 1e-9, 0.1)
    chosen: list[np.ndarray] = []
    for point in itertools.product(axis, repeat=dimension):
        point = np.array(point)
        if np.linalg.norm(point) > radius:
            continue
        if all(np.linalg.norm(point - other) >= resolution for other in chosen):
            chosen.append(point)
    return len(chosen)


class TestBallCovering:
    """Test cases for ball_covering_log."""

    def test_example(self):
        """Test r = 1, ν = 2, n = 3: 3 log 2."""
        assert ball_covering_log(1.0, 2.0, 3) == pytest.approx(3 * math.log(2))

    def test_large_resolution_vanishes(self):
        """Test that ν → ∞ drives the log cover to 0."""
        assert ball_covering_log(1.0, 1e12, 4) == pytest.approx(0.0, abs=1e-10)

    def test_linear_in_dimension(self):
        """Test that doubling n doubles the log cover."""
        assert ball_covering_log(2.0, 0.3, 8) == pytest.approx(
            2 * ball_covering_log(2.0, 0.3, 4)
        )

    def test_decreasing_in_resolution(self):
        """Test that a finer resolution needs a larger cover."""
        values = [ball_covering_log(1.0, nu, 3) for nu in (0.01, 0.1, 1.0, 10.0)]
        assert all(b < a for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("dimension", [1, 2, 3])
    @pytest.mark.parametrize("resolution", [0.5, 1.0])
    def test_dominates_packing(self, dimension, resolution):
        """Test that the volumetric bound exceeds a greedy packing count."""
        count = _greedy_packing(1.0, resolution, dimension)
        assert math.log(count) <= ball_covering_log(1.0, resolution, dimension)

    def test_rejects_bad_arguments(self):
        """Test that non-positive radius, resolution or dimension is rejected."""
        with pytest.raises(ArgumentError):
            ball_covering_log(0.0, 1.0, 1)
        with pytest.raises(ArgumentError):
            ball_covering_log(1.0, 0.0, 1)
        with pytest.raises(ArgumentError):
            ball_covering_log(1.0, 1.0, 0)


class TestClassCovering:
    """Test cases for class_covering_log."""

    def test_single_factor_is_ball_cover(self):
        """Test that R = 1 and L_φ/γ = 1 reduce to the ball cover."""
        query = CoveringQuery(
            radius=1.0, resolution=0.2, dimension=5, width=1, lipschitz_ratio=1.0
        )
        assert class_covering_log(query) == pytest.approx(
            ball_covering_log(1.0, 0.2, 5)
        )

    def test_example(self):
        """Test R = 2, r = 1, ν = 2, ratio 1: 2n log 2."""
        query = CoveringQuery(
            radius=1.0, resolution=2.0, dimension=3, width=2, lipschitz_ratio=1.0
        )
        assert class_covering_log(query) == pytest.approx(6 * math.log(2))

    def test_ratio_rescales_resolution(self):
        """Test that the Lipschitz ratio multiplies the resolution."""
        query = CoveringQuery(
            radius=1.0, resolution=0.5, dimension=2, width=3, lipschitz_ratio=0.1
        )
        assert class_covering_log(query) == pytest.approx(
            3 * ball_covering_log(1.0, 0.05, 2)
        )

    def test_query_validation(self):
        """Test that width < 1 is rejected by the query model."""
        with pytest.raises(ValueError):
            CoveringQuery(
                radius=1.0, resolution=1.0, dimension=1, width=0, lipschitz_ratio=1.0
            )
