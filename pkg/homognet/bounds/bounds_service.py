"""Generalization bound for stationary points of the regularized objective.

The bound splits into an optimization term (λ/n_Y)·Ω_up·(polar − 1) and a
statistical term ε₁·√((R·dim(𝒲)·log(γε₂r_θ/L_φ)·log N + log(1/δ))/N). The
constants follow the per-family estimates with the universal constants hidden
by ≲ set to 1, so reported numbers are order-of-magnitude bounds.
"""

import logging
import math

import numpy as np
from scipy import special

from homognet.bounds.bounds_models import (
    BoundReport,
    ConstantsLedger,
    HypothesisBounds,
)
from homognet.bounds.capacity_models import CoveringQuery
from homognet.bounds.capacity_service import class_covering_log
from homognet.dependency import get_family_service
from homognet.errors import ArgumentError, ConstraintError, OutOfRegimeError
from homognet.model.gauge import gauge_value
from homognet.model.model_models import (
    Dataset,
    FamilyDims,
    FamilyKind,
    FamilyTag,
    ParallelModel,
    TeacherSpec,
)
from homognet.model.model_service import (
    check_compatible,
    predict_all,
    require_stationary,
)
from homognet.model.zoo_service import (
    lipschitz_upper_bound,
    teacher_lipschitz,
    teacher_outputs,
)
from homognet.polar.polar_models import PolarCertificate


_logger = logging.getLogger(__name__)

DEFAULT_BERNSTEIN_C = 1.0 / 8.0

_SENSING = (FamilyKind.MATRIX_SENSING, FamilyKind.STRUCTURED_MATRIX_SENSING)


def _teacher_matrix(teacher: TeacherSpec) -> np.ndarray:
    """M* = U*V*ᵀ for the factored families, A* for attention"""
    if teacher.family.kind == FamilyKind.MULTI_HEAD_ATTENTION:
        return teacher.blocks[0]
    left, right = teacher.blocks
    return left @ right.T


def _spectral(matrix: np.ndarray) -> float:
    return float(np.linalg.norm(matrix, ord=2)) if matrix.size else 0.0


def omega_upper(teacher: TeacherSpec) -> float:
    """Upper bound on Ω(f*_μ) given by the teacher's own parameters."""
    match teacher.family.kind:
        case FamilyKind.MATRIX_SENSING:
            matrix = _teacher_matrix(teacher)
            return float(np.linalg.norm(matrix, ord="nuc")) if matrix.size else 0.0
        case FamilyKind.STRUCTURED_MATRIX_SENSING:
            left, right = teacher.blocks
            return float(
                sum(
                    gauge_value(teacher.family.gauge, left[:, j])
                    * np.linalg.norm(right[:, j])
                    for j in range(teacher.rank)
                )
            )
        case FamilyKind.TWO_LAYER_LINEAR | FamilyKind.TWO_LAYER_RELU:
            left, right = teacher.blocks
            return 0.5 * float(np.sum(left**2) + np.sum(right**2))
        case FamilyKind.MULTI_HEAD_ATTENTION:
            return float(np.linalg.norm(teacher.blocks[0]))


def _teacher_frobenius(teacher: TeacherSpec) -> float:
    if teacher.family.kind == FamilyKind.TWO_LAYER_RELU:
        left, right = teacher.blocks
        return float(np.linalg.norm(left) * np.linalg.norm(right))
    return float(np.linalg.norm(_teacher_matrix(teacher)))


def epsilon_bounds(
    gamma: float,
    sigma_x: float,
    g_lipschitz: float,
    sigma_y_given_x: float,
    loss_smoothness: float = 1.0,
) -> tuple[float, float]:
    """(ε₀, ε₁) = 16γ²σ_X²·{min, max}{1, (L/4)[1 + (‖g‖²/γ²)(1 + σ²_{Y|X}/σ²_X)]}"""
    if not gamma > 0 or not sigma_x > 0:
        raise ConstraintError(f"need γ > 0 and σ_X > 0, got {gamma} and {sigma_x}")
    inner = (loss_smoothness / 4.0) * (
        1.0
        + (g_lipschitz**2 / gamma**2) * (1.0 + sigma_y_given_x**2 / sigma_x**2)
    )
    scale = 16.0 * gamma**2 * sigma_x**2
    return scale * min(1.0, inner), scale * max(1.0, inner)


def epsilon_two(
    network_lipschitz: float,
    output_bound: float,
    loss_bound: float,
    factor_lipschitz: float,
    omega: float,
    loss_smoothness: float = 1.0,
) -> float:
    """ε₂ = 4L̃_ΦB_Φ·max{1, 2L + 2B_ℓ/B_Φ, 8ΩB_ℓL̃_φ/(L̃_ΦB_Φ), 8LΩ}"""
    product = network_lipschitz * output_bound
    if not product > 0:
        raise ConstraintError("ε₂ needs L̃_Φ·B_Φ > 0")
    return (
        4.0
        * product
        * max(
            1.0,
            2.0 * loss_smoothness + 2.0 * loss_bound / output_bound,
            8.0 * omega * loss_bound * factor_lipschitz / product,
            8.0 * loss_smoothness * omega,
        )
    )


def default_g_radius(kind: FamilyKind, N: int, width: int, delta: float) -> float:
    """Truncation radius used in the proofs: 1 + √(log √(N·R¹⁰⁰) + log(1/δ)) for
    sensing and 1 + √(log(NR) + log(1/δ)) otherwise."""
    _check_confidence(N, delta)
    if kind in _SENSING:
        inner = 0.5 * math.log(N) + 50.0 * math.log(width) + math.log(1.0 / delta)
    else:
        inner = math.log(N * width) + math.log(1.0 / delta)
    return 1.0 + math.sqrt(inner)


def projection_tail(g: float, norm: float) -> float:
    """g·e^{−g²/2}·norm, the Gaussian ball projection bound for g ≥ 1"""
    if g < 1:
        raise OutOfRegimeError(f"projection tail bound needs g ≥ 1, got {g}")
    if norm < 0:
        raise ArgumentError(f"norm must be ≥ 0, got {norm}")
    return g * math.exp(-0.5 * g * g) * norm


def projection_tail_exact(g: float, norm: float) -> float:
    """(g·e^{−g²/2} − √(π/2)(g² − 1)·erfc(g/√2))·norm, the exact one-dimensional
    Gaussian tail the closed form bounds."""
    if g < 1:
        raise OutOfRegimeError(f"projection tail needs g ≥ 1, got {g}")
    if norm < 0:
        raise ArgumentError(f"norm must be ≥ 0, got {norm}")
    exact = g * math.exp(-0.5 * g * g) - math.sqrt(math.pi / 2.0) * (
        g * g - 1.0
    ) * special.erfc(g / math.sqrt(2.0))
    return max(float(exact), 0.0) * norm


def relu_projection_tail(
    g: float, gamma: float, teacher_frobenius: float, width: int
) -> float:
    """4Rg·e^{−g²/2}·γ(‖U*‖_F‖V*‖_F + γ)"""
    return 4.0 * width * gamma * projection_tail(g, teacher_frobenius + gamma)


def softmax_projection_tail(
    g: float, gamma: float, teacher_spectral: float, width: int, tokens: int
) -> float:
    """4R√(log T/T⁵)·g·e^{−g²}·γ(‖A*‖₂ + γ)"""
    if g < 1:
        raise OutOfRegimeError(f"projection tail needs g ≥ 1, got {g}")
    token_factor = math.sqrt(math.log(tokens) / tokens**5)
    return (
        4.0
        * width
        * token_factor
        * g
        * math.exp(-g * g)
        * gamma
        * (teacher_spectral + gamma)
    )


def b_of_C(tag: FamilyTag, g: float, ledger: ConstantsLedger) -> float:
    """Tail term B(𝒞) of the family at radius g"""
    if g < 1:
        raise OutOfRegimeError(f"B(𝒞) needs g ≥ 1, got {g}")
    gamma, width = ledger.gamma, ledger.width
    match tag.kind:
        case FamilyKind.MATRIX_SENSING | FamilyKind.STRUCTURED_MATRIX_SENSING:
            size = ledger.teacher_frobenius + width * ledger.b_u * ledger.b_v
            return 4.0 * projection_tail(g, size**2)
        case FamilyKind.TWO_LAYER_LINEAR:
            return projection_tail(
                g, (1.0 + gamma) * (ledger.teacher_spectral + gamma)
            )
        case FamilyKind.TWO_LAYER_RELU:
            return relu_projection_tail(g, gamma, ledger.teacher_frobenius, width)
        case FamilyKind.MULTI_HEAD_ATTENTION:
            return softmax_projection_tail(
                g, gamma, ledger.teacher_spectral, width, ledger.tokens
            )


def delta_C(N: int, input_dim: int, g: float, c: float = DEFAULT_BERNSTEIN_C) -> float:
    """2N·exp(−c·n_X·(g − 1)²), the probability that some input leaves the
    radius-g region."""
    if not c > 0:
        raise ArgumentError(f"Bernstein constant must be > 0, got {c}")
    if g < 1:
        raise OutOfRegimeError(f"δ_𝒞 needs g ≥ 1, got {g}")
    return 2.0 * N * math.exp(-c * input_dim * (g - 1.0) ** 2)


def hypothesis_bounds(model: ParallelModel, teacher: TeacherSpec) -> HypothesisBounds:
    """Factor norm bounds covering both the trained model and the teacher, and
    C = max(1, Lip(model)/Ω_up)."""
    if teacher.family.kind != model.family.kind:
        raise ArgumentError("teacher and model families differ")
    if model.family.kind == FamilyKind.MULTI_HEAD_ATTENTION:
        norms = [np.linalg.norm(factor.blocks[0]) for factor in model.factors]
        b_u = max([float(np.linalg.norm(teacher.blocks[0])), *norms])
        b_v = 1.0
    else:
        left, right = teacher.blocks
        left_norms = [np.linalg.norm(f.blocks[0]) for f in model.factors]
        right_norms = [np.linalg.norm(f.blocks[1]) for f in model.factors]
        b_u = max([*np.linalg.norm(left, axis=0), *left_norms], default=0.0)
        b_v = max([*np.linalg.norm(right, axis=0), *right_norms], default=0.0)
    omega = omega_upper(teacher)
    multiplier = 1.0
    if model.width >= 1 and omega > 0:
        multiplier = max(1.0, lipschitz_upper_bound(model) / omega)
    return HypothesisBounds(
        b_u=float(b_u),
        b_v=float(b_v),
        c_multiplier=multiplier,
        width=max(model.width, 1),
    )


def _family_constants(
    kind: FamilyKind,
    dims: FamilyDims,
    g: float,
    gamma: float,
    hypothesis: HypothesisBounds,
    teacher_frobenius: float,
    teacher_spectral: float,
) -> dict[str, float]:
    width, b_u, b_v = hypothesis.width, hypothesis.b_u, hypothesis.b_v
    diagonal = math.sqrt(b_u**2 + b_v**2)
    match kind:
        case FamilyKind.MATRIX_SENSING | FamilyKind.STRUCTURED_MATRIX_SENSING:
            return dict(
                theta_radius=1.0 / math.sqrt(2.0),
                output_bound=g * b_u * b_v * width,
                loss_bound=g * (teacher_frobenius + b_u * b_v * width),
                network_lipschitz=g * diagonal * width,
                factor_lipschitz=g * diagonal,
            )
        case FamilyKind.TWO_LAYER_LINEAR:
            return dict(
                theta_radius=1.0 / math.sqrt(2.0),
                output_bound=g * gamma,
                loss_bound=g * (teacher_spectral + gamma),
                network_lipschitz=g * diagonal * width,
                factor_lipschitz=g * diagonal,
            )
        case FamilyKind.TWO_LAYER_RELU:
            return dict(
                theta_radius=1.0 / math.sqrt(2.0),
                output_bound=g * gamma,
                loss_bound=2.0 * g * gamma,
                network_lipschitz=g * diagonal * width,
                factor_lipschitz=g * diagonal,
            )
        case FamilyKind.MULTI_HEAD_ATTENTION:
            root_t = math.sqrt(dims.T)
            spread = math.sqrt(b_u**2 + 1.0)
            return dict(
                theta_radius=math.sqrt(2.0),
                output_bound=g * width * b_u / root_t,
                loss_bound=g * (width * b_u + teacher_frobenius) / root_t,
                network_lipschitz=g * width * spread / root_t,
                factor_lipschitz=g * spread / root_t,
            )


def master_constants(
    tag: FamilyTag,
    dims: FamilyDims,
    teacher: TeacherSpec,
    hypothesis: HypothesisBounds,
    g_radius: float,
    N: int,
    sigma_x: float = 1.0,
    alpha: float = 0.0,
    bernstein_c: float = DEFAULT_BERNSTEIN_C,
) -> ConstantsLedger:
    """Fill every ledger entry for the family."""
    if teacher.family.kind != tag.kind or teacher.dims != dims:
        raise ArgumentError("teacher does not match the family tag and dims")
    if hypothesis.c_multiplier < 1:
        raise ConstraintError(
            f"γ ≥ Ω_up·L_φ violated: C = {hypothesis.c_multiplier} < 1"
        )
    if g_radius < 1:
        raise OutOfRegimeError(f"g-radius must be ≥ 1, got {g_radius}")
    service = get_family_service(tag.kind)
    phi_lipschitz = 1.0
    omega = omega_upper(teacher)
    gamma = hypothesis.c_multiplier * omega
    if not gamma > 0:
        raise ConstraintError("γ = C·Ω_up must be > 0; the teacher is zero")
    g_lipschitz = teacher_lipschitz(teacher)
    eps0, eps1 = epsilon_bounds(gamma, sigma_x, g_lipschitz, teacher.noise)
    teacher_frobenius = _teacher_frobenius(teacher)
    teacher_spectral = _spectral(_teacher_matrix(teacher))
    family = _family_constants(
        tag.kind,
        dims,
        g_radius,
        gamma,
        hypothesis,
        teacher_frobenius,
        teacher_spectral,
    )
    eps2 = epsilon_two(
        family["network_lipschitz"],
        family["output_bound"],
        family["loss_bound"],
        family["factor_lipschitz"],
        omega,
    )
    input_dim = service.input_dim(dims)
    parameter_dim = service.parameter_dim(dims)
    delta_c = delta_C(N, input_dim, g_radius, bernstein_c)
    if delta_c >= 1:
        _logger.warning(
            f"δ_𝒞 = {delta_c:.3g} ≥ 1 at g = {g_radius:.3g}; the tail event is vacuous"
        )
    log_covering = class_covering_log(
        CoveringQuery(
            radius=family["theta_radius"],
            resolution=1.0 / eps2,
            dimension=parameter_dim,
            width=hypothesis.width,
            lipschitz_ratio=phi_lipschitz / gamma,
        )
    )
    draft = ConstantsLedger(
        family=tag.kind,
        gamma=gamma,
        sigma_x=sigma_x,
        sigma_y_given_x=teacher.noise,
        g_lipschitz=g_lipschitz,
        alpha=alpha,
        omega_upper=omega,
        phi_lipschitz=phi_lipschitz,
        eps0=eps0,
        eps1=eps1,
        eps2=eps2,
        g_radius=g_radius,
        delta_c=delta_c,
        delta_c_vacuous=delta_c >= 1,
        tail_bound=0.0,
        width=hypothesis.width,
        parameter_dim=parameter_dim,
        input_dim=input_dim,
        output_dim=service.output_dim(dims),
        tokens=dims.T,
        b_u=hypothesis.b_u,
        b_v=hypothesis.b_v,
        c_multiplier=hypothesis.c_multiplier,
        teacher_frobenius=teacher_frobenius,
        teacher_spectral=teacher_spectral,
        log_covering=log_covering,
        **family,
    )
    tail = b_of_C(tag, g_radius, draft)
    return draft.model_copy(update={"tail_bound": tail})


def _check_confidence(N: int, delta: float) -> None:
    if N < 2:
        raise ArgumentError(f"N must be ≥ 2, got {N}")
    if not 0 < delta <= 1:
        raise ArgumentError(f"δ must lie in (0, 1], got {delta}")


def statistical_error_value(
    eps1: float,
    width: int,
    parameter_dim: int,
    log_argument: float,
    N: int,
    delta: float,
) -> float:
    """ε₁·√((R·dim·log(γε₂r_θ/L_φ)·log N + log(1/δ))/N)"""
    _check_confidence(N, delta)
    if not log_argument > 1:
        raise ConstraintError(
            f"γε₂r_θ/L_φ = {log_argument} must be > 1 for a positive capacity term"
        )
    capacity = width * parameter_dim * math.log(log_argument) * math.log(N)
    return eps1 * math.sqrt((capacity + math.log(1.0 / delta)) / N)


def statistical_error(ledger: ConstantsLedger, N: int, delta: float) -> float:
    log_argument = (
        ledger.gamma * ledger.eps2 * ledger.theta_radius / ledger.phi_lipschitz
    )
    return statistical_error_value(
        ledger.eps1, ledger.width, ledger.parameter_dim, log_argument, N, delta
    )


def bound_report(
    tag: FamilyTag,
    dataset: Dataset,
    model: ParallelModel,
    cert: PolarCertificate,
    delta: float,
    g_radius: float | None = None,
    include_alpha: bool = False,
    alpha: float = 0.0,
    bernstein_c: float = DEFAULT_BERNSTEIN_C,
) -> BoundReport:
    """Optimization plus statistical error of a trained, stationary model."""
    teacher = dataset.meta.teacher
    if teacher is None:
        raise ArgumentError("bound_report needs a dataset generated from a teacher")
    if tag.kind != model.family.kind:
        raise ArgumentError("family tag does not match the model")
    check_compatible(dataset, model)
    require_stationary(dataset, model)
    hypothesis = hypothesis_bounds(model, teacher)
    N = dataset.size
    if g_radius is None:
        g_radius = default_g_radius(tag.kind, N, hypothesis.width, delta)
    ledger = master_constants(
        tag,
        model.dims,
        teacher,
        hypothesis,
        g_radius,
        N,
        sigma_x=dataset.meta.sigma_x,
        alpha=alpha,
        bernstein_c=bernstein_c,
    )
    output_dim = ledger.output_dim
    optimization = (model.lam / output_dim) * ledger.omega_upper * (cert.value - 1.0)
    statistical = statistical_error(ledger, N, delta)
    adjustment = None
    total = max(optimization, 0.0) + statistical
    if include_alpha:
        gap = teacher_outputs(teacher, dataset.inputs) - predict_all(
            model, dataset.inputs
        )
        adjustment = alpha / (2.0 * output_dim) * float(np.mean(np.sum(gap**2, axis=1)))
        statistical *= 1.0 + alpha
        total = max(optimization, 0.0) + statistical - adjustment
    _logger.info(
        f"Bound for {tag.kind.value} at N={N}: optimization {optimization:.4g}, "
        f"statistical {statistical:.4g}"
    )
    return BoundReport(
        family=tag.kind,
        N=N,
        delta=delta,
        lam=model.lam,
        polar_value=cert.value,
        ledger=ledger,
        optimization_error=optimization,
        statistical_error=statistical,
        alpha_adjustment=adjustment,
        total=total,
    )
