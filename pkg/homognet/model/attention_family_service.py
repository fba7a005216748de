from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from homognet.errors import InfeasibleRegularizerError
from homognet.model.family_service import Blocks, FamilyService
from homognet.model.model_models import (
    Z_NORM_SLACK,
    FamilyDims,
    FamilyKind,
    FamilyTag,
)
from homognet.utils.linalg_utils import spectral_norm


def attention_weights(
    temperature: float, z: np.ndarray, inputs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Softmax weights σ_t(Xᵀz) and pooled tokens Xσ_t(Xᵀz).

    z has shape (r, n) and inputs (N, n, T); returns weights (N, r, T) and
    pooled tokens (N, r, n).
    """
    scores = temperature * np.einsum("int,jn->ijt", inputs, z)
    weights = softmax(scores, axis=-1)
    pooled = np.einsum("int,ijt->ijn", inputs, weights)
    return weights, pooled


def softmax_backward(
    temperature: float,
    inputs: np.ndarray,
    weights: np.ndarray,
    pooled_grad: np.ndarray,
) -> np.ndarray:
    """Pull a gradient on the pooled tokens back to z, summed over samples.

    Uses the softmax Jacobian t·(diag(σ) − σσᵀ). pooled_grad has shape
    (N, r, n); the result has shape (r, n).
    """
    weight_grad = np.einsum("int,ijn->ijt", inputs, pooled_grad)
    centered = weight_grad - (weights * weight_grad).sum(axis=-1, keepdims=True)
    score_grad = weights * centered
    return temperature * np.einsum("int,ijt->jn", inputs, score_grad)


@dataclass
class AttentionFamilyService(FamilyService):
    """Single-layer multi-head attention with the reparameterized head
    φ(V, z)(X) = V X σ_t(Xᵀz) and θ(V, z) = ‖V‖_F + 𝟙(‖z‖₂ ≤ 1)."""

    kind = FamilyKind.MULTI_HEAD_ATTENTION
    degree = 1
    homogeneous_blocks = (0,)

    def block_shapes(self, dims: FamilyDims) -> list[tuple[int, ...]]:
        return [(dims.m, dims.n), (dims.n,)]

    def input_shape(self, dims: FamilyDims) -> tuple[int, ...]:
        return (dims.n, dims.T)

    def output_dim(self, dims: FamilyDims) -> int:
        return dims.m

    def factor_outputs(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        v, z = blocks
        _, pooled = attention_weights(tag.temperature, z, inputs)
        return np.einsum("jmn,ijn->jim", v, pooled)

    def theta(self, tag: FamilyTag, blocks: Blocks) -> np.ndarray:
        v, z = blocks
        z_norm = np.linalg.norm(z, axis=1)
        if np.any(z_norm > 1.0 + Z_NORM_SLACK):
            raise InfeasibleRegularizerError(
                f"attention factor has ‖z‖₂ = {z_norm.max()} > 1"
            )
        return np.linalg.norm(v, axis=(1, 2))

    def theta_gradient(self, tag: FamilyTag, blocks: Blocks) -> Blocks:
        v, z = blocks
        v_norm = np.linalg.norm(v, axis=(1, 2), keepdims=True)
        grad_v = np.divide(v, v_norm, out=np.zeros_like(v), where=v_norm > 0)
        return [grad_v, np.zeros_like(z)]

    def loss_gradient(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray, weights: np.ndarray
    ) -> Blocks:
        v, z = blocks
        count = len(inputs)
        softmax_weights, pooled = attention_weights(tag.temperature, z, inputs)
        grad_v = np.einsum("im,ijn->jmn", weights, pooled) / count
        pooled_grad = np.einsum("jmn,im->ijn", v, weights)
        grad_z = softmax_backward(
            tag.temperature, inputs, softmax_weights, pooled_grad
        )
        return [grad_v, grad_z / count]

    def project(self, blocks: Blocks) -> Blocks:
        v, z = blocks
        z_norm = np.linalg.norm(z, axis=1, keepdims=True)
        return [v, z / np.maximum(z_norm, 1.0)]

    @property
    def is_projected(self) -> bool:
        return True

    def lipschitz_upper_bound(self, blocks: Blocks) -> float:
        v, _ = blocks
        return float(sum(spectral_norm(head) for head in v))

    def teacher_block_shapes(
        self, dims: FamilyDims, rank: int
    ) -> list[tuple[int, ...]]:
        return [(dims.m, dims.n), (dims.T,)]

    def make_teacher_blocks(
        self, rng: np.random.Generator, tag: FamilyTag, dims: FamilyDims, rank: int
    ) -> Blocks:
        mixing = rng.standard_normal((dims.m, dims.n))
        mixing *= np.sqrt(self.input_dim(dims)) / np.linalg.norm(mixing)
        pooling = rng.standard_normal(dims.T)
        return [mixing, pooling / np.linalg.norm(pooling)]

    def teacher_outputs(
        self, tag: FamilyTag, teacher_blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        mixing, pooling = teacher_blocks
        return np.einsum("mn,int,t->im", mixing, inputs, pooling)

    def teacher_lipschitz(self, teacher_blocks: Blocks) -> float:
        return spectral_norm(teacher_blocks[0])
