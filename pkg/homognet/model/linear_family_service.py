from dataclasses import dataclass

import numpy as np

from homognet.model.family_service import Blocks, FamilyService
from homognet.model.matrix_sensing_family_service import (
    balance_pair,
    balanced_teacher,
)
from homognet.model.model_models import FamilyDims, FamilyKind, FamilyTag
from homognet.utils.linalg_utils import spectral_norm


@dataclass
class LinearFamilyService(FamilyService):
    """Two-layer linear network: φ(u, v)(x) = ⟨v, x⟩u, θ = ½(‖u‖² + ‖v‖²)."""

    kind = FamilyKind.TWO_LAYER_LINEAR

    def block_shapes(self, dims: FamilyDims) -> list[tuple[int, ...]]:
        return [(dims.m,), (dims.n,)]

    def input_shape(self, dims: FamilyDims) -> tuple[int, ...]:
        return (dims.n,)

    def output_dim(self, dims: FamilyDims) -> int:
        return dims.m

    def activations(self, v: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        """Hidden unit values, shape (N, r)"""
        return inputs @ v.T

    def activation_slopes(self, v: np.ndarray, inputs: np.ndarray) -> np.ndarray:
        return np.ones((len(inputs), len(v)))

    def factor_outputs(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        u, v = blocks
        hidden = self.activations(v, inputs)
        return hidden.T[:, :, None] * u[:, None, :]

    def theta(self, tag: FamilyTag, blocks: Blocks) -> np.ndarray:
        u, v = blocks
        return 0.5 * ((u**2).sum(axis=1) + (v**2).sum(axis=1))

    def theta_gradient(self, tag: FamilyTag, blocks: Blocks) -> Blocks:
        return [blocks[0].copy(), blocks[1].copy()]

    def loss_gradient(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray, weights: np.ndarray
    ) -> Blocks:
        u, v = blocks
        count = len(inputs)
        hidden = self.activations(v, inputs)
        back = (weights @ u.T) * self.activation_slopes(v, inputs)
        return [hidden.T @ weights / count, back.T @ inputs / count]

    def balance(self, blocks: Blocks) -> Blocks:
        return balance_pair(*blocks)

    def lipschitz_upper_bound(self, blocks: Blocks) -> float:
        u, v = blocks
        return spectral_norm(u.T) * spectral_norm(v.T)

    def teacher_block_shapes(
        self, dims: FamilyDims, rank: int
    ) -> list[tuple[int, ...]]:
        return [(dims.m, rank), (dims.n, rank)]

    def make_teacher_blocks(
        self, rng: np.random.Generator, tag: FamilyTag, dims: FamilyDims, rank: int
    ) -> Blocks:
        return balanced_teacher(rng, dims.m, dims.n, rank, np.sqrt(dims.n))

    def teacher_outputs(
        self, tag: FamilyTag, teacher_blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        left, right = teacher_blocks
        return self.activations(right.T, inputs) @ left.T

    def teacher_lipschitz(self, teacher_blocks: Blocks) -> float:
        left, right = teacher_blocks
        return spectral_norm(left) * spectral_norm(right)
