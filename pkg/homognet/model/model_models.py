import math
from enum import Enum

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

from homognet.errors import DimensionError, InfeasibleRegularizerError, NumericError
from homognet.utils.array_utils import Array


# Slack allowed on the attention constraint ‖z‖₂ ≤ 1
Z_NORM_SLACK = 1e-9


class FamilyKind(Enum):
    MATRIX_SENSING = "matrix-sensing"
    STRUCTURED_MATRIX_SENSING = "structured-matrix-sensing"
    TWO_LAYER_LINEAR = "two-layer-linear"
    TWO_LAYER_RELU = "two-layer-relu"
    MULTI_HEAD_ATTENTION = "multi-head-attention"


class GaugeKind(Enum):
    L2 = "l2"
    SPARSE_L2 = "sparse-l2"


class GaugeSpec(BaseModel):
    """Atomic set descriptor for the structured sensing regularizer."""

    model_config = ConfigDict(frozen=True)

    kind: GaugeKind = GaugeKind.SPARSE_L2
    sparsity: float = Field(
        default=1.0,
        gt=0,
        description="s in γ(u) = max(‖u‖₂, ‖u‖₁/s) for the sparse-l2 gauge",
    )
    impl: str | None = Field(
        default=None,
        description=(
            "Fully qualified name of a Gauge subclass. When set it replaces the "
            "built in gauge selected by kind."
        ),
    )


class FamilyTag(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: FamilyKind
    temperature: float = Field(
        default=1.0,
        gt=0,
        description="Softmax temperature t (attention only)",
    )
    gauge: GaugeSpec = Field(
        default_factory=GaugeSpec,
        description="Left factor gauge (structured sensing only)",
    )

    @field_validator("temperature")
    @classmethod
    def _finite_temperature(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("temperature must be finite")
        return value


class FamilyDims(BaseModel):
    """Per-family sizes. Sensing inputs are m×n matrices; network inputs are
    n-vectors with m outputs; attention inputs are n×T token matrices."""

    model_config = ConfigDict(frozen=True)

    m: int = Field(ge=1)
    n: int = Field(ge=1)
    T: int = Field(default=1, ge=1)


class FactorParams(BaseModel):
    """Parameters W_j of one parallel unit."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: FamilyKind
    blocks: list[Array]

    @model_validator(mode="after")
    def _check_blocks(self):
        for block in self.blocks:
            if not np.all(np.isfinite(block)):
                raise NumericError("factor block has non-finite entries")
        if self.family == FamilyKind.MULTI_HEAD_ATTENTION:
            z_norm = float(np.linalg.norm(self.blocks[-1]))
            if z_norm > 1.0 + Z_NORM_SLACK:
                raise InfeasibleRegularizerError(
                    f"attention factor has ‖z‖₂ = {z_norm} > 1"
                )
        return self


class ParallelModel(BaseModel):
    """Sum of r factor maps with regularization weight λ."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: FamilyTag
    dims: FamilyDims
    factors: list[FactorParams] = Field(default_factory=list)
    lam: float = Field(gt=0, description="Regularization weight λ")

    @computed_field
    @property
    def width(self) -> int:
        return len(self.factors)

    @model_validator(mode="before")
    @classmethod
    def _drop_width(cls, data):
        # width is derived; tolerate it in serialized input
        if isinstance(data, dict) and "width" in data:
            data = {key: value for key, value in data.items() if key != "width"}
        return data

    @model_validator(mode="after")
    def _check_factors(self):
        from homognet.dependency import get_family_service

        shapes = get_family_service(self.family.kind).block_shapes(self.dims)
        for index, factor in enumerate(self.factors):
            if factor.family != self.family.kind:
                raise DimensionError(
                    f"factor {index} is {factor.family.value}, "
                    f"model is {self.family.kind.value}"
                )
            actual = [block.shape for block in factor.blocks]
            if actual != shapes:
                raise DimensionError(
                    f"factor {index} has block shapes {actual}, expected {shapes}"
                )
        return self


class TeacherSpec(BaseModel):
    """Ground truth network generating the data.

    blocks holds (U*, V*) with the true factors as columns for the sensing and
    two-layer families, and (A*, b*) for attention.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: FamilyTag
    dims: FamilyDims
    rank: int = Field(ge=0, description="True width r*")
    blocks: list[Array]
    noise: float = Field(default=0.0, ge=0, description="Noise scale σ")

    @model_validator(mode="after")
    def _check_blocks(self):
        from homognet.dependency import get_family_service

        service = get_family_service(self.family.kind)
        expected = service.teacher_block_shapes(self.dims, self.rank)
        actual = [block.shape for block in self.blocks]
        if actual != expected:
            raise DimensionError(
                f"teacher blocks have shapes {actual}, expected {expected}"
            )
        if self.family.kind == FamilyKind.MULTI_HEAD_ATTENTION:
            b_norm = float(np.linalg.norm(self.blocks[1]))
            if abs(b_norm - 1.0) > 1e-9:
                raise ValueError(f"attention teacher needs ‖b*‖₂ = 1, got {b_norm}")
        return self


class DatasetMeta(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    sigma_x: float = Field(default=1.0, ge=0, description="σ_X")
    sigma_noise: float = Field(default=0.0, ge=0, description="σ_{Y|X}")
    teacher: TeacherSpec | None = None
    seed: int | None = None


class Dataset(BaseModel):
    """N input/target pairs. inputs has shape (N, *input shape) and targets
    (N, n_Y); scalar sensing targets use n_Y = 1."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    family: FamilyTag
    dims: FamilyDims
    inputs: Array
    targets: Array
    meta: DatasetMeta = Field(default_factory=DatasetMeta)

    @model_validator(mode="after")
    def _check_shapes(self):
        from homognet.dependency import get_family_service

        service = get_family_service(self.family.kind)
        if len(self.inputs) < 1 or len(self.inputs) != len(self.targets):
            raise DimensionError(
                f"need N ≥ 1 matching inputs and targets, got "
                f"{len(self.inputs)} and {len(self.targets)}"
            )
        input_shape = service.input_shape(self.dims)
        if self.inputs.shape[1:] != input_shape:
            raise DimensionError(
                f"inputs have shape {self.inputs.shape[1:]}, expected {input_shape}"
            )
        output_dim = service.output_dim(self.dims)
        if self.targets.shape[1:] != (output_dim,):
            raise DimensionError(
                f"targets have shape {self.targets.shape[1:]}, "
                f"expected ({output_dim},)"
            )
        return self

    @property
    def size(self) -> int:
        return len(self.inputs)


class TraceRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int
    objective: float
    gradient_norm: float
    max_residual: float


class WidthEvent(BaseModel):
    model_config = ConfigDict(frozen=True)

    iteration: int
    width: int = Field(description="Width after the new factor was appended")
    polar_value: float = Field(description="Polar value that triggered growth")


class TrainTrace(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterates: list[TraceRecord] = Field(default_factory=list)
    width_events: list[WidthEvent] = Field(default_factory=list)
    converged: bool = False
    iteration_cap_hit: bool = Field(
        default=False, description="Some descent phase stopped at max_iterations"
    )
    max_width_reached: bool = Field(
        default=False, description="Growth was requested at R_max"
    )

    @property
    def last_iteration(self) -> int:
        return self.iterates[-1].iteration if self.iterates else -1
