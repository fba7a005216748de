from dataclasses import dataclass

import numpy as np

from homognet.model.family_service import Blocks, FamilyService
from homognet.model.model_models import FamilyDims, FamilyKind, FamilyTag
from homognet.utils.linalg_utils import spectral_norm


def _safe_divide(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    return np.divide(
        numerator,
        denominator,
        out=np.zeros(np.broadcast(numerator, denominator).shape),
        where=denominator > 0,
    )


def balance_pair(u: np.ndarray, v: np.ndarray) -> Blocks:
    """Scale u_j and v_j to equal norms, keeping u_j v_jᵀ fixed"""
    u_norm = np.linalg.norm(u, axis=1, keepdims=True)
    v_norm = np.linalg.norm(v, axis=1, keepdims=True)
    both = (u_norm > 0) & (v_norm > 0)
    ratio = np.sqrt(np.divide(v_norm, u_norm, out=np.ones_like(u_norm), where=both))
    return [u * ratio, v / ratio]


def balanced_teacher(
    rng: np.random.Generator, rows: int, cols: int, rank: int, target: float
) -> Blocks:
    left = rng.standard_normal((rows, rank))
    right = rng.standard_normal((cols, rank))
    size = np.linalg.norm(left @ right.T)
    if size > 0:
        factor = np.sqrt(target / size)
        left, right = left * factor, right * factor
    return [left, right]


@dataclass
class MatrixSensingFamilyService(FamilyService):
    """y = ⟨M, X⟩ with M = Σ_j u_j v_jᵀ and θ(u, v) = ‖u‖‖v‖."""

    kind = FamilyKind.MATRIX_SENSING

    def block_shapes(self, dims: FamilyDims) -> list[tuple[int, ...]]:
        return [(dims.m,), (dims.n,)]

    def input_shape(self, dims: FamilyDims) -> tuple[int, ...]:
        return (dims.m, dims.n)

    def output_dim(self, dims: FamilyDims) -> int:
        return 1

    def factor_outputs(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        u, v = blocks
        return np.einsum("jm,imn,jn->ji", u, inputs, v)[..., None]

    def theta(self, tag: FamilyTag, blocks: Blocks) -> np.ndarray:
        u, v = blocks
        return np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)

    def theta_gradient(self, tag: FamilyTag, blocks: Blocks) -> Blocks:
        u, v = blocks
        u_norm = np.linalg.norm(u, axis=1, keepdims=True)
        v_norm = np.linalg.norm(v, axis=1, keepdims=True)
        return [_safe_divide(u * v_norm, u_norm), _safe_divide(v * u_norm, v_norm)]

    def loss_gradient(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray, weights: np.ndarray
    ) -> Blocks:
        u, v = blocks
        aggregate = np.einsum("i,imn->mn", weights[:, 0], inputs) / len(inputs)
        return [v @ aggregate.T, u @ aggregate]

    def balance(self, blocks: Blocks) -> Blocks:
        return balance_pair(*blocks)

    def lipschitz_upper_bound(self, blocks: Blocks) -> float:
        u, v = blocks
        return spectral_norm(u.T @ v)

    def teacher_block_shapes(
        self, dims: FamilyDims, rank: int
    ) -> list[tuple[int, ...]]:
        return [(dims.m, rank), (dims.n, rank)]

    def make_teacher_blocks(
        self, rng: np.random.Generator, tag: FamilyTag, dims: FamilyDims, rank: int
    ) -> Blocks:
        return balanced_teacher(
            rng, dims.m, dims.n, rank, np.sqrt(self.input_dim(dims))
        )

    def teacher_outputs(
        self, tag: FamilyTag, teacher_blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        left, right = teacher_blocks
        return np.einsum("imn,mn->i", inputs, left @ right.T)[:, None]

    def teacher_lipschitz(self, teacher_blocks: Blocks) -> float:
        left, right = teacher_blocks
        return spectral_norm(left @ right.T)
