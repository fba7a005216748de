from pydantic import BaseModel, ConfigDict, Field


class CoveringQuery(BaseModel):
    """Covering of a width-R class whose factors live in a θ-ball."""

    model_config = ConfigDict(frozen=True)

    radius: float = Field(gt=0, description="r_θ, radius of the factor ball")
    resolution: float = Field(gt=0, description="ν")
    dimension: int = Field(ge=1, description="n, parameters per factor")
    width: int = Field(ge=1, description="R")
    lipschitz_ratio: float = Field(gt=0, description="L_φ/γ")
