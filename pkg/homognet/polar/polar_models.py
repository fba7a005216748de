from enum import Enum

from pydantic import BaseModel, ConfigDict, Field

from homognet.model.model_models import FactorParams


class PolarMethod(Enum):
    EXACT = "exact"
    SEARCH = "search"
    UPPER_BOUND = "upper-bound"


class Verdict(Enum):
    CERTIFIED_GLOBAL = "certified-global"
    HEURISTIC_STATIONARY_GLOBAL = "heuristic-stationary-global"
    NOT_OPTIMAL = "not-optimal"
    INDETERMINATE = "indeterminate"


class PolarOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(
        default=1e-3, gt=0, description="τ: polar ≤ 1 + τ counts as optimal"
    )
    restarts: int = Field(default=32, ge=1, description="Ascent starts per search")
    ascent_iterations: int = Field(default=500, ge=1)
    power_tolerance: float = Field(default=1e-10, gt=0)
    power_max_iterations: int = Field(default=10_000, ge=1)
    dense_limit: int = Field(
        default=512,
        ge=0,
        description="Aggregates with min side up to this size use a dense SVD",
    )
    seed: int = Field(default=0, description="Seed for power iteration and restarts")


class PolarCertificate(BaseModel):
    """Estimate of the polar of the scaled negative loss gradient and the
    optimality verdict it supports."""

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0)
    method: PolarMethod
    witness: FactorParams | None = Field(
        default=None,
        description="Factor with θ ≤ 1 attaining (or best found for) the supremum",
    )
    verdict: Verdict
    tolerance: float
    search_value: float | None = Field(
        default=None,
        description="Best lower bound found by search, for upper-bound certificates",
    )
    converged: bool = Field(
        default=True, description="False when power iteration hit its cap"
    )
