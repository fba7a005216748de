"""Family-agnostic evaluation of the regularized empirical objective

    NC(W) = (1/2N) Σ_i ‖Y_i − Σ_j φ(W_j)(X_i)‖² + λ Σ_j θ(W_j)

and its gradient. The trainer works on stacked blocks through evaluate and
blocks_gradient; the public functions take models and datasets.
"""

from dataclasses import dataclass

import numpy as np

from homognet.dependency import get_family_service
from homognet.errors import ArgumentError, DimensionError, NumericError
from homognet.model.family_service import Blocks, FamilyService
from homognet.model.model_models import (
    Dataset,
    FactorParams,
    FamilyKind,
    FamilyTag,
    ParallelModel,
)


# Largest ρ_j accepted where a model must be trainer-stationary
STATIONARY_RESIDUAL = 1e-3


@dataclass(frozen=True)
class Evaluation:
    objective: float
    loss: float
    outputs: np.ndarray
    """φ(W_j)(X_i), shape (r, N, n_Y)"""
    residuals: np.ndarray
    """Y_i − Ŷ_i, shape (N, n_Y)"""
    theta: np.ndarray


def stack_blocks(model: ParallelModel) -> Blocks:
    """One array per block with the factor index leading."""
    service = get_family_service(model.family.kind)
    shapes = service.block_shapes(model.dims)
    if not model.factors:
        return [np.zeros((0,) + shape) for shape in shapes]
    return [
        np.stack([factor.blocks[index] for factor in model.factors])
        for index in range(len(shapes))
    ]


def unstack_blocks(kind: FamilyKind, blocks: Blocks) -> list[FactorParams]:
    width = len(blocks[0])
    return [
        FactorParams(family=kind, blocks=[block[j] for block in blocks])
        for j in range(width)
    ]


def with_blocks(model: ParallelModel, blocks: Blocks) -> ParallelModel:
    return ParallelModel(
        family=model.family,
        dims=model.dims,
        lam=model.lam,
        factors=unstack_blocks(model.family.kind, blocks),
    )


def check_compatible(dataset: Dataset, model: ParallelModel) -> None:
    if dataset.family.kind != model.family.kind or dataset.dims != model.dims:
        raise DimensionError(
            f"dataset ({dataset.family.kind.value}, {dataset.dims}) does not match "
            f"model ({model.family.kind.value}, {model.dims})"
        )


def evaluate(
    service: FamilyService,
    tag: FamilyTag,
    blocks: Blocks,
    dataset: Dataset,
    lam: float,
) -> Evaluation:
    outputs = service.factor_outputs(tag, blocks, dataset.inputs)
    residuals = dataset.targets - outputs.sum(axis=0)
    finite = np.all(np.isfinite(residuals), axis=1)
    if not np.all(finite):
        index = int(np.argmin(finite))
        raise NumericError(
            f"non-finite prediction for sample {index}", sample_index=index
        )
    theta = service.theta(tag, blocks)
    loss = 0.5 * float(np.sum(residuals**2)) / dataset.size
    objective = loss + lam * float(theta.sum())
    if not np.isfinite(objective):
        raise NumericError("non-finite objective")
    return Evaluation(objective, loss, outputs, residuals, theta)


def blocks_gradient(
    service: FamilyService,
    tag: FamilyTag,
    blocks: Blocks,
    dataset: Dataset,
    lam: float,
    evaluation: Evaluation,
) -> Blocks:
    loss_grad = service.loss_gradient(
        tag, blocks, dataset.inputs, -evaluation.residuals
    )
    theta_grad = service.theta_gradient(tag, blocks)
    result = [g + lam * t for g, t in zip(loss_grad, theta_grad)]
    for block in result:
        if not np.all(np.isfinite(block)):
            raise NumericError("non-finite gradient")
    return result


def residual_correlations(evaluation: Evaluation, lam: float) -> np.ndarray:
    """⟨−(1/λ)∇_Ŷℓ, φ(W_j)⟩_{μN} = (1/Nλ) Σ_i ⟨r_i, φ(W_j)(X_i)⟩ per factor"""
    count = evaluation.residuals.shape[0]
    return np.einsum("in,jin->j", evaluation.residuals, evaluation.outputs) / (
        count * lam
    )


def evaluation_residuals(evaluation: Evaluation, lam: float) -> np.ndarray:
    return np.abs(residual_correlations(evaluation, lam) - evaluation.theta)


def _evaluate_model(dataset: Dataset, model: ParallelModel) -> Evaluation:
    check_compatible(dataset, model)
    service = get_family_service(model.family.kind)
    return evaluate(service, model.family, stack_blocks(model), dataset, model.lam)


def predict(model: ParallelModel, input: np.ndarray) -> np.ndarray:
    """Σ_j φ(W_j)(input); the zero output for width 0."""
    service = get_family_service(model.family.kind)
    input = np.asarray(input, dtype=np.float64)
    expected = service.input_shape(model.dims)
    if input.shape != expected:
        raise DimensionError(f"input has shape {input.shape}, expected {expected}")
    outputs = service.factor_outputs(model.family, stack_blocks(model), input[None])
    return outputs.sum(axis=0)[0]


def predict_all(model: ParallelModel, inputs: np.ndarray) -> np.ndarray:
    """Predictions for stacked inputs, shape (N, n_Y)"""
    service = get_family_service(model.family.kind)
    expected = service.input_shape(model.dims)
    if inputs.shape[1:] != expected:
        raise DimensionError(
            f"inputs have shape {inputs.shape[1:]}, expected {expected}"
        )
    outputs = service.factor_outputs(model.family, stack_blocks(model), inputs)
    return outputs.sum(axis=0)


def objective(dataset: Dataset, model: ParallelModel) -> float:
    return _evaluate_model(dataset, model).objective


def loss(dataset: Dataset, model: ParallelModel) -> float:
    """The data term (1/2N) Σ_i ‖Y_i − Ŷ_i‖² alone"""
    return _evaluate_model(dataset, model).loss


def gradient(dataset: Dataset, model: ParallelModel) -> list[list[np.ndarray]]:
    """Gradient of the objective, one list of blocks per factor."""
    evaluation = _evaluate_model(dataset, model)
    service = get_family_service(model.family.kind)
    blocks = blocks_gradient(
        service, model.family, stack_blocks(model), dataset, model.lam, evaluation
    )
    return [[block[j] for block in blocks] for j in range(model.width)]


def stationarity_residuals(dataset: Dataset, model: ParallelModel) -> list[float]:
    """ρ_j = |⟨−(1/λ)∇_Ŷℓ, φ(W_j)⟩_{μN} − θ(W_j)|, zero at first-order points."""
    if model.width < 1:
        raise DimensionError("stationarity residuals need width ≥ 1")
    evaluation = _evaluate_model(dataset, model)
    return evaluation_residuals(evaluation, model.lam).tolist()


def require_stationary(
    dataset: Dataset, model: ParallelModel, limit: float = STATIONARY_RESIDUAL
) -> float:
    """Largest residual, raising ArgumentError when it exceeds ``limit``."""
    if model.width < 1:
        raise ArgumentError("a stationary model needs width ≥ 1")
    worst = max(stationarity_residuals(dataset, model))
    if worst > limit:
        raise ArgumentError(
            f"model is not stationary: max residual {worst:.3g} > {limit}"
        )
    return worst


def theta_total(model: ParallelModel) -> float:
    service = get_family_service(model.family.kind)
    return float(service.theta(model.family, stack_blocks(model)).sum())
