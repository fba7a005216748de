from pydantic import BaseModel, ConfigDict, Field, model_validator


class TrainOptions(BaseModel):
    """Gradient descent with Armijo backtracking, and the width-growing loop
    around it."""

    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(
        default=20_000, ge=1, description="Iteration cap for one descent phase"
    )
    gradient_tolerance: float = Field(
        default=1e-6,
        gt=0,
        description=(
            "Stop when the projected gradient norm ‖W − P(W − ∇NC(W))‖ falls to this "
            "value"
        ),
    )
    initial_step: float = Field(default=1.0, gt=0)
    step_growth: float = Field(
        default=2.0,
        ge=1,
        description="Each line search starts at the last accepted step times this",
    )
    max_step: float = Field(default=1e4, gt=0)
    backtracking: float = Field(default=0.5, gt=0, lt=1)
    sufficient_decrease: float = Field(default=1e-4, gt=0, lt=1)
    max_halvings: int = Field(
        default=60,
        ge=1,
        description="Backtracking steps before descent is declared stalled",
    )
    max_width: int = Field(default=8, ge=1, description="R_max")
    polar_tolerance: float = Field(
        default=1e-3, gt=0, description="τ: growth stops once the polar is ≤ 1 + τ"
    )
    growth_scale: float = Field(
        default=1e-4, gt=0, description="θ of a newly appended factor"
    )
    init_scale: float = Field(
        default=1e-3, gt=0, description="θ of the initial factor in meta training"
    )
    trace_every: int = Field(
        default=1, ge=1, description="Record every k-th iterate plus the last"
    )

    @model_validator(mode="after")
    def _check_steps(self):
        if self.initial_step > self.max_step:
            raise ValueError("initial_step must not exceed max_step")
        return self
