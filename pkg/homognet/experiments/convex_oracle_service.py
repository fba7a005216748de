"""Global solution of the nuclear-norm program that lower-bounds every factored
matrix sensing objective, by proximal gradient with singular value
thresholding."""

import logging

import numpy as np

from homognet.errors import ArgumentError
from homognet.experiments.experiment_models import ConvexOracleResult
from homognet.model.model_models import Dataset, FamilyKind
from homognet.utils.linalg_utils import top_singular_pair


_logger = logging.getLogger(__name__)

CONVERGED_RESIDUAL = 1e-6


def singular_value_threshold(
    matrix: np.ndarray, threshold: float
) -> tuple[np.ndarray, float]:
    """prox of threshold·‖·‖_* and the nuclear norm of the result"""
    left, values, right_t = np.linalg.svd(matrix, full_matrices=False)
    shrunk = np.maximum(values - threshold, 0.0)
    return (left * shrunk) @ right_t, float(shrunk.sum())


def convex_oracle_sensing(
    dataset: Dataset,
    lam: float,
    iterations: int = 100_000,
    tolerance: float = 1e-8,
) -> ConvexOracleResult:
    """Minimize (1/2N)Σ(y_i − ⟨M, X_i⟩)² + λ‖M‖_* with step 1/L̂, where L̂ is the
    power-iteration estimate of ‖A‖₂²/N for the measurement operator A.
    Stops when L̂‖M_{k+1} − M_k‖_F ≤ tolerance."""
    if dataset.family.kind != FamilyKind.MATRIX_SENSING:
        raise ArgumentError("the convex oracle exists for matrix sensing only")
    if not lam > 0:
        raise ArgumentError(f"λ must be > 0, got {lam}")
    count = dataset.size
    shape = dataset.inputs.shape[1:]
    design = dataset.inputs.reshape(count, -1)
    targets = dataset.targets[:, 0]
    smoothness = top_singular_pair(design).value ** 2 / count
    if smoothness == 0.0:
        # All measurements vanish
        smoothness = 1.0
    step = 1.0 / smoothness

    current = np.zeros(design.shape[1])
    nuclear = 0.0
    residual = np.inf
    iteration = 0
    for iteration in range(1, iterations + 1):
        grad = design.T @ (design @ current - targets) / count
        moved, nuclear = singular_value_threshold(
            (current - step * grad).reshape(shape), step * lam
        )
        moved = moved.ravel()
        residual = smoothness * float(np.linalg.norm(moved - current))
        current = moved
        if residual <= tolerance:
            break

    fit = 0.5 * float(np.sum((targets - design @ current) ** 2)) / count
    converged = residual <= CONVERGED_RESIDUAL
    if not converged:
        _logger.warning(
            f"Convex oracle stopped after {iteration} iterations with residual "
            f"{residual:.3g}"
        )
    return ConvexOracleResult(
        value=fit + lam * nuclear,
        matrix=current.reshape(shape),
        nuclear_norm=nuclear,
        iterations=iteration,
        residual=residual,
        converged=converged,
    )
