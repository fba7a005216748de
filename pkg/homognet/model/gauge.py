"""Gauges γ_𝒰 of atomic sets for the structured sensing left factor."""

from abc import ABC, abstractmethod

import numpy as np

from homognet.model.model_models import GaugeKind, GaugeSpec
from homognet.utils.import_utils import get_impl


class Gauge(ABC):
    """
    Minkowski functional of an atomic set 𝒰 ⊂ ℝⁿ. Implementations must be
    positively homogeneous with γ(0) = 0.
    """

    def __init__(self, spec: GaugeSpec):
        self.spec = spec

    @abstractmethod
    def values(self, u: np.ndarray) -> np.ndarray:
        """γ along the last axis of u"""

    @abstractmethod
    def gradient(self, u: np.ndarray) -> np.ndarray:
        """A subgradient of γ for each row of u"""

    @abstractmethod
    def k2(self, n: int) -> float:
        """K₂ = sup of γ over the Euclidean unit ball of ℝⁿ"""

    @abstractmethod
    def linear_oracle(self, g: np.ndarray) -> np.ndarray:
        """A maximizer of ⟨g, u⟩ over γ(u) ≤ 1"""


class L2Gauge(Gauge):
    def values(self, u: np.ndarray) -> np.ndarray:
        return np.linalg.norm(u, axis=-1)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(u, axis=-1, keepdims=True)
        return np.divide(u, norm, out=np.zeros_like(u), where=norm > 0)

    def k2(self, n: int) -> float:
        return 1.0

    def linear_oracle(self, g: np.ndarray) -> np.ndarray:
        norm = np.linalg.norm(g)
        return g / norm if norm > 0 else np.zeros_like(g)


class SparseL2Gauge(Gauge):
    """Gauge of the ℓ₂ unit ball intersected with the s·ℓ₁ unit ball:
    γ(u) = max(‖u‖₂, ‖u‖₁/s)."""

    bisection_steps = 100

    @property
    def sparsity(self) -> float:
        return self.spec.sparsity

    def values(self, u: np.ndarray) -> np.ndarray:
        return np.maximum(
            np.linalg.norm(u, axis=-1), np.abs(u).sum(axis=-1) / self.sparsity
        )

    def gradient(self, u: np.ndarray) -> np.ndarray:
        l2 = np.linalg.norm(u, axis=-1, keepdims=True)
        l1 = np.abs(u).sum(axis=-1, keepdims=True) / self.sparsity
        euclidean = np.divide(u, l2, out=np.zeros_like(u), where=l2 > 0)
        return np.where(l2 >= l1, euclidean, np.sign(u) / self.sparsity)

    def k2(self, n: int) -> float:
        return max(1.0, np.sqrt(n) / self.sparsity)

    def linear_oracle(self, g: np.ndarray) -> np.ndarray:
        if not np.any(g):
            return np.zeros_like(g)
        if self.sparsity <= 1.0:
            # The s·ℓ₁ ball sits inside the ℓ₂ ball; its best vertex wins
            result = np.zeros_like(g)
            index = int(np.argmax(np.abs(g)))
            result[index] = self.sparsity * np.sign(g[index])
            return result
        direction = g / np.linalg.norm(g)
        if np.abs(direction).sum() <= self.sparsity:
            return direction
        # Soft threshold until the ℓ₁ constraint becomes tight
        low, high = 0.0, float(np.max(np.abs(g)))
        for _ in range(self.bisection_steps):
            level = 0.5 * (low + high)
            shrunk = np.sign(g) * np.maximum(np.abs(g) - level, 0.0)
            if np.abs(shrunk).sum() > self.sparsity * np.linalg.norm(shrunk):
                low = level
            else:
                high = level
        shrunk = np.sign(g) * np.maximum(np.abs(g) - high, 0.0)
        norm = np.linalg.norm(shrunk)
        if norm == 0.0:
            # More than s² tied maxima: spread the ℓ₁ budget over the ties
            ties = np.abs(g) == np.max(np.abs(g))
            return np.sign(g) * ties * (self.sparsity / ties.sum())
        return shrunk / norm


_BUILT_IN: dict[GaugeKind, type[Gauge]] = {
    GaugeKind.L2: L2Gauge,
    GaugeKind.SPARSE_L2: SparseL2Gauge,
}


def resolve_gauge(spec: GaugeSpec) -> Gauge:
    if spec.impl:
        return get_impl(Gauge, spec.impl)(spec)
    return _BUILT_IN[spec.kind](spec)


def gauge_value(spec: GaugeSpec, u: np.ndarray) -> float:
    return float(resolve_gauge(spec).values(np.asarray(u, dtype=np.float64)))


def gauge_K2(spec: GaugeSpec, n: int) -> float:
    return float(resolve_gauge(spec).k2(n))
