from dataclasses import dataclass

import numpy as np

from homognet.model.family_service import Blocks
from homognet.model.gauge import resolve_gauge
from homognet.model.matrix_sensing_family_service import (
    MatrixSensingFamilyService,
    balanced_teacher,
)
from homognet.model.model_models import FamilyDims, FamilyKind, FamilyTag


@dataclass
class StructuredSensingFamilyService(MatrixSensingFamilyService):
    """Matrix sensing with θ(u, v) = γ_𝒰(u)‖v‖ for the gauge named by the tag."""

    kind = FamilyKind.STRUCTURED_MATRIX_SENSING

    def theta(self, tag: FamilyTag, blocks: Blocks) -> np.ndarray:
        u, v = blocks
        return resolve_gauge(tag.gauge).values(u) * np.linalg.norm(v, axis=1)

    def theta_gradient(self, tag: FamilyTag, blocks: Blocks) -> Blocks:
        u, v = blocks
        gauge = resolve_gauge(tag.gauge)
        gamma = gauge.values(u)[:, None]
        v_norm = np.linalg.norm(v, axis=1, keepdims=True)
        grad_v = np.divide(
            v * gamma, v_norm, out=np.zeros_like(v), where=v_norm > 0
        )
        return [gauge.gradient(u) * v_norm, grad_v]

    def make_teacher_blocks(
        self, rng: np.random.Generator, tag: FamilyTag, dims: FamilyDims, rank: int
    ) -> Blocks:
        left, right = balanced_teacher(
            rng, dims.m, dims.n, rank, np.sqrt(self.input_dim(dims))
        )
        # Sparse left factors with about s² nonzeros per column
        support = int(min(dims.m, max(1, np.ceil(tag.gauge.sparsity**2))))
        for column in range(rank):
            hidden = rng.permutation(dims.m)[support:]
            left[hidden, column] = 0.0
        size = np.linalg.norm(left @ right.T)
        if size > 0:
            factor = np.sqrt(np.sqrt(self.input_dim(dims)) / size)
            left, right = left * factor, right * factor
        return [left, right]
