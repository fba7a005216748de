from dataclasses import dataclass

import numpy as np

from homognet.model.linear_family_service import LinearFamilyService
from homognet.model.model_models import FamilyKind


@dataclass
class ReluFamilyService(LinearFamilyService):
    """Two-layer ReLU network: φ(u, v)(x) = [⟨v, x⟩]₊ u. The subgradient of
    [·]₊ at 0 is taken as 0."""

    kind = FamilyKind.TWO_LAYER_RELU

    def activations(self, v: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return np.maximum(inputs @ v.T, 0.0)

    def activation_slopes(self, v: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return (inputs @ v.T > 0).astype(np.float64)
