from abc import ABC, abstractmethod
from math import prod
from typing import ClassVar

import numpy as np

from homognet.model.model_models import FamilyDims, FamilyKind, FamilyTag


Blocks = list[np.ndarray]


class FamilyService(ABC):
    """
    Factor map φ and regularizer θ of one parallel positively homogeneous family.

    Methods work on stacked blocks: one array per parameter block, with the factor
    index as leading axis (shape (r, *block shape)). Inputs are stacked the same
    way with the sample index leading.
    """

    kind: ClassVar[FamilyKind]
    degree: ClassVar[int] = 2
    homogeneous_blocks: ClassVar[tuple[int, ...]] = (0, 1)

    @abstractmethod
    def block_shapes(self, dims: FamilyDims) -> list[tuple[int, ...]]:
        """Shape of each block of a single factor"""

    @abstractmethod
    def input_shape(self, dims: FamilyDims) -> tuple[int, ...]:
        """Shape of a single input"""

    @abstractmethod
    def output_dim(self, dims: FamilyDims) -> int:
        """n_Y"""

    def input_dim(self, dims: FamilyDims) -> int:
        """n_X, the number of input entries"""
        return prod(self.input_shape(dims))

    def parameter_dim(self, dims: FamilyDims) -> int:
        """dim(𝒲), the number of parameters in one factor"""
        return sum(prod(shape) for shape in self.block_shapes(dims))

    @abstractmethod
    def factor_outputs(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        """φ(W_j)(X_i) for every factor and sample, shape (r, N, n_Y)"""

    @abstractmethod
    def theta(self, tag: FamilyTag, blocks: Blocks) -> np.ndarray:
        """θ(W_j) for every factor, shape (r,)"""

    @abstractmethod
    def theta_gradient(self, tag: FamilyTag, blocks: Blocks) -> Blocks:
        """(Sub)gradient of Σ_j θ(W_j), subgradient 0 at non-smooth points"""

    @abstractmethod
    def loss_gradient(
        self, tag: FamilyTag, blocks: Blocks, inputs: np.ndarray, weights: np.ndarray
    ) -> Blocks:
        """Gradient of (1/N) Σ_i ⟨weights_i, Σ_j φ(W_j)(X_i)⟩ with respect to the
        blocks; weights has shape (N, n_Y)"""

    @abstractmethod
    def lipschitz_upper_bound(self, blocks: Blocks) -> float:
        """Upper bound on the Lipschitz constant of the network map"""

    def project(self, blocks: Blocks) -> Blocks:
        """Map blocks back onto the feasible set of θ"""
        return blocks

    @property
    def is_projected(self) -> bool:
        """Whether project is ever more than the identity"""
        return False

    def scale(self, blocks: Blocks, factors: np.ndarray) -> Blocks:
        """Scale the homogeneous sub-block of factor j by factors[j] ≥ 0, which
        multiplies its output and θ by factors[j] ** degree."""
        result = list(blocks)
        for index in self.homogeneous_blocks:
            block = blocks[index]
            result[index] = block * factors.reshape((-1,) + (1,) * (block.ndim - 1))
        return result

    def rescale(self, tag: FamilyTag, blocks: Blocks, target: float) -> Blocks:
        """Rescale every factor so that its θ equals target. Factors with θ = 0
        cannot be rescaled and are left as they are."""
        theta = self.theta(tag, blocks)
        factors = np.ones_like(theta)
        positive = theta > 0
        factors[positive] = (target / theta[positive]) ** (1.0 / self.degree)
        return self.scale(blocks, factors)

    def balance(self, blocks: Blocks) -> Blocks:
        """Equalize the sub-block norms of every factor without changing its
        output. The identity unless a family overrides it."""
        return blocks

    def sample_blocks(
        self, rng: np.random.Generator, dims: FamilyDims, width: int
    ) -> Blocks:
        return self.project(
            [rng.standard_normal((width,) + shape) for shape in self.block_shapes(dims)]
        )

    def sample_inputs(
        self, rng: np.random.Generator, dims: FamilyDims, size: int
    ) -> np.ndarray:
        """Gaussian inputs with entry variance 1/n_X, so E‖X‖² = 1"""
        scale = 1.0 / np.sqrt(self.input_dim(dims))
        return scale * rng.standard_normal((size,) + self.input_shape(dims))

    def sample_noise(
        self, rng: np.random.Generator, dims: FamilyDims, size: int, sigma: float
    ) -> np.ndarray:
        """Noise with covariance (σ²/n_Y) I; scalar outputs get variance σ²"""
        output_dim = self.output_dim(dims)
        return (sigma / np.sqrt(output_dim)) * rng.standard_normal((size, output_dim))

    @abstractmethod
    def teacher_block_shapes(
        self, dims: FamilyDims, rank: int
    ) -> list[tuple[int, ...]]:
        """Shapes of the teacher blocks for true width rank"""

    @abstractmethod
    def make_teacher_blocks(
        self, rng: np.random.Generator, tag: FamilyTag, dims: FamilyDims, rank: int
    ) -> Blocks:
        """Draw teacher blocks"""

    @abstractmethod
    def teacher_outputs(
        self, tag: FamilyTag, teacher_blocks: Blocks, inputs: np.ndarray
    ) -> np.ndarray:
        """Noiseless teacher map applied to stacked inputs, shape (N, n_Y)"""

    @abstractmethod
    def teacher_lipschitz(self, teacher_blocks: Blocks) -> float:
        """Lipschitz bound of the teacher computed like lipschitz_upper_bound"""
