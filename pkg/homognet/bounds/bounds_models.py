import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from homognet.model.model_models import FamilyKind


UNIVERSAL_CONSTANTS_NOTE = "up to universal constants"


class HypothesisBounds(BaseModel):
    """Norm bounds on the hypothesis class, taken over the trained model and the
    teacher. For attention b_u bounds ‖V_j‖_F and b_v bounds ‖z_j‖₂."""

    model_config = ConfigDict(frozen=True)

    b_u: float = Field(ge=0, description="B_u (B_V for attention)")
    b_v: float = Field(ge=0, description="B_v (1 for attention)")
    c_multiplier: float = Field(gt=0, description="C in γ = C·Ω_up")
    width: int = Field(ge=1, description="R")


class ConstantsLedger(BaseModel):
    """Every constant entering the statistical-error bound for one family."""

    model_config = ConfigDict(frozen=True)

    family: FamilyKind
    gamma: float = Field(ge=0, description="γ")
    sigma_x: float = Field(ge=0, description="σ_X")
    sigma_y_given_x: float = Field(ge=0, description="σ_{Y|X}")
    g_lipschitz: float = Field(ge=0, description="‖g‖_Lip of the teacher map")
    loss_smoothness: float = Field(default=1.0, ge=0, description="L")
    alpha: float = Field(default=0.0, ge=0, description="α")
    omega_upper: float = Field(ge=0, description="Ω_up ≥ Ω(f*_μ)")
    phi_lipschitz: float = Field(ge=0, description="L_φ")
    theta_radius: float = Field(ge=0, description="r_θ")
    output_bound: float = Field(ge=0, description="B_Φ")
    loss_bound: float = Field(ge=0, description="B_ℓ")
    network_lipschitz: float = Field(ge=0, description="L̃_Φ")
    factor_lipschitz: float = Field(ge=0, description="L̃_φ")
    eps0: float = Field(ge=0, description="ε₀")
    eps1: float = Field(ge=0, description="ε₁")
    eps2: float = Field(ge=0, description="ε₂")
    g_radius: float = Field(ge=0, description="g")
    delta_c: float = Field(ge=0, description="δ_𝒞")
    delta_c_vacuous: bool = Field(description="δ_𝒞 ≥ 1")
    tail_bound: float = Field(ge=0, description="B(𝒞)")
    width: int = Field(ge=1, description="R")
    parameter_dim: int = Field(ge=1, description="dim(𝒲)")
    input_dim: int = Field(ge=1, description="n_X")
    output_dim: int = Field(ge=1, description="n_Y")
    tokens: int = Field(default=1, ge=1, description="T, attention only")
    b_u: float = Field(ge=0, description="B_u (B_V for attention)")
    b_v: float = Field(ge=0, description="B_v")
    c_multiplier: float = Field(ge=1, description="C")
    teacher_frobenius: float = Field(
        ge=0, description="Frobenius size of the teacher entering B_ℓ and B(𝒞)"
    )
    teacher_spectral: float = Field(ge=0, description="Spectral norm of the teacher")
    log_covering: float = Field(
        ge=0, description="log class covering number at ν = 1/ε₂"
    )

    @model_validator(mode="after")
    def _check_entries(self):
        for name, value in self:
            if isinstance(value, float) and not math.isfinite(value):
                raise ValueError(f"ledger entry {name} is not finite")
        if self.eps1 < self.eps0:
            raise ValueError("ε₁ must be ≥ ε₀")
        return self


class BoundReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: FamilyKind
    N: int
    delta: float
    lam: float
    polar_value: float
    ledger: ConstantsLedger
    optimization_error: float = Field(
        description="(λ/n_Y)·Ω_up·(polar − 1); negative below certification"
    )
    statistical_error: float = Field(gt=0)
    alpha_adjustment: float | None = Field(
        default=None,
        description="(α/2n_Y)·‖f_teacher − Φ‖²_μN, subtracted when requested",
    )
    total: float = Field(
        description="max(optimization_error, 0) + statistical_error − adjustment"
    )
    note: str = UNIVERSAL_CONSTANTS_NOTE


class NuclearVariationalResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float = Field(description="Σ_j ‖u_j‖‖v_j‖, +∞ when infeasible")
    gap: float = Field(ge=0, description="‖M − UVᵀ‖_F / ‖M‖_F")
    iterations: int = Field(ge=0)
    converged: bool
