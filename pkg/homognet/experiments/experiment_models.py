from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from homognet.model.model_models import FamilyDims, FamilyTag
from homognet.polar.polar_models import PolarOptions
from homognet.trainer.trainer_models import TrainOptions
from homognet.utils.array_utils import Array


MIN_HELDOUT = 100_000
MAX_HELDOUT = 1_000_000

LIPSCHITZ_HEADER = (
    "width",
    "lipschitz_bound",
    "teacher_bound",
    "ratio",
    "flagged",
    "error",
)
RATE_HEADER = (
    "N",
    "mean_gap",
    "gap_stderr",
    "bound_total",
    "repetitions",
    "flagged",
)


def _ascending(values: list[int]) -> list[int]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError("grid must be strictly ascending")
    return values


class ExperimentConfig(BaseModel):
    """Everything a training, bound or sweep run needs, with a teacher drawn
    from (family, dims, rank, noise, seed)."""

    model_config = ConfigDict(frozen=True)

    family: FamilyTag
    dims: FamilyDims
    rank: int = Field(default=1, ge=0, description="True width r*")
    noise: float = Field(default=0.0, ge=0, description="Noise scale σ")
    N: int = Field(default=120, ge=2, description="Training sample count")
    heldout: int | None = Field(
        default=None,
        ge=1,
        description="Held-out sample count M; max(10N, 1e5) capped at 1e6 if unset",
    )
    lam: float = Field(default=1e-3, gt=0, description="λ")
    delta: float = Field(default=0.05, gt=0, le=1, description="Confidence δ")
    seed: int = 0
    widths: list[int] = Field(
        default_factory=lambda: [1, 2, 4, 8],
        description="Width grid of the Lipschitz sweep",
    )
    n_grid: list[int] = Field(
        default_factory=lambda: [250, 500, 1000, 2000, 4000],
        description="Sample sizes of the rate sweep",
    )
    repetitions: int = Field(
        default=5,
        ge=1,
        description="Training repetitions per rate cell and held-out draws per gap",
    )
    threads: int = Field(default=1, ge=1, description="Worker cap for sweep cells")
    train: TrainOptions = Field(default_factory=TrainOptions)
    polar: PolarOptions = Field(default_factory=PolarOptions)

    @field_validator("widths", "n_grid")
    @classmethod
    def _check_grid(cls, values: list[int]) -> list[int]:
        if not values or min(values) < 1:
            raise ValueError("grid entries must be ≥ 1")
        return _ascending(values)

    @model_validator(mode="after")
    def _check_heldout(self):
        if self.heldout is not None and self.heldout < self.N:
            raise ValueError(f"held-out size {self.heldout} is below N = {self.N}")
        return self

    def heldout_size(self, N: int | None = None) -> int:
        N = self.N if N is None else N
        if self.heldout is not None:
            return max(self.heldout, N)
        return min(max(10 * N, MIN_HELDOUT), MAX_HELDOUT)


class GapEstimate(BaseModel):
    """Held-out estimate of the generalization gap |NC_μ − NC_μN|. The
    regularizer is common to both terms and cancels."""

    model_config = ConfigDict(frozen=True)

    gap: float = Field(ge=0, description="Mean over held-out draws")
    standard_error: float = Field(ge=0)
    training_loss: float
    heldout_loss: float = Field(description="Mean held-out loss over the draws")
    heldout_size: int
    repetitions: int
    bound_total: float | None = Field(
        default=None, description="Matching bound report total when computed"
    )


class ConvexOracleResult(BaseModel):
    """Solution of min (1/2N)Σ(y_i − ⟨M, X_i⟩)² + λ‖M‖_*."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    value: float
    matrix: Array
    nuclear_norm: float
    iterations: int
    residual: float = Field(description="Final prox-gradient fixed-point residual")
    converged: bool


class SandwichReport(BaseModel):
    """C(f*) ≤ NC(model) ≤ C(f*) + λΩ(f*)(polar − 1)₊ + slack"""

    model_config = ConfigDict(frozen=True)

    lam: float
    convex_value: float
    objective: float
    polar_value: float
    omega: float = Field(description="‖M̂‖_* of the convex solution")
    upper_bound: float
    slack: float
    lower_holds: bool
    upper_holds: bool
    oracle_converged: bool
    passed: bool


class LipschitzRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    width: int
    lipschitz_bound: float | None = None
    teacher_bound: float
    ratio: float | None = None
    flagged: bool = False
    error: str | None = None

    def cells(self) -> tuple:
        return tuple(getattr(self, name) for name in LIPSCHITZ_HEADER)


class RateRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    N: int
    mean_gap: float | None = None
    gap_stderr: float | None = None
    bound_total: float | None = None
    repetitions: int = Field(description="Cells that completed")
    flagged: bool = False

    def cells(self) -> tuple:
        return tuple(getattr(self, name) for name in RATE_HEADER)
