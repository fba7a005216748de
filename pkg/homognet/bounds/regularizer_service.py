"""Induced regularizer of the matrix sensing family,

    Ω(M) = inf { Σ_j ‖u_j‖‖v_j‖ : UVᵀ = M, R columns },

computed by ridge alternating least squares on the penalized program

    F_μ(U, V) = ½‖M − UVᵀ‖²/μ + ½(‖U‖² + ‖V‖²)

with μ decreased geometrically. At a minimizer of F_μ the product is the
singular value soft-threshold of M at μ and Σ_j ‖u_j‖‖v_j‖ equals its nuclear
norm, so the value tends to ‖M‖_* as μ → 0. Large μ stages settle the
factorization quickly; the small μ stages then only move singular values.
"""

import logging

import numpy as np
from scipy import linalg

from homognet.bounds.bounds_models import NuclearVariationalResult
from homognet.errors import ArgumentError
from homognet.model.matrix_sensing_family_service import balance_pair


_logger = logging.getLogger(__name__)

FEASIBILITY_TOLERANCE = 1e-6
# μ schedule relative to ‖M‖_F
START_MU = 0.25
FINAL_MU = 1e-10
MU_DECAY = 0.25
STAGE_TOLERANCE = 1e-13
# Re-seed size relative to √‖M‖_F, lets thresholded directions re-enter
RESEED = 1e-8


def _ridge_solve(matrix: np.ndarray, factor: np.ndarray, ridge: float) -> np.ndarray:
    """argmin_X ½‖matrix − X factorᵀ‖² + (ridge/2)‖X‖²"""
    gram = factor.T @ factor + ridge * np.eye(factor.shape[1])
    return linalg.solve(gram, factor.T @ matrix.T, assume_a="pos").T


def _balance_columns(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    left, right = balance_pair(u.T, v.T)
    return left.T, right.T


def _penalized(matrix: np.ndarray, u: np.ndarray, v: np.ndarray, mu: float) -> float:
    fit = float(np.sum((matrix - u @ v.T) ** 2))
    return 0.5 * fit / mu + 0.5 * float(np.sum(u**2) + np.sum(v**2))


def factor_theta_sum(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.linalg.norm(u, axis=0) @ np.linalg.norm(v, axis=0))


def mu_schedule(scale: float) -> list[float]:
    """START_MU·scale shrunk by MU_DECAY down to FINAL_MU·scale"""
    stages = int(np.ceil(np.log(FINAL_MU / START_MU) / np.log(MU_DECAY)))
    return [scale * START_MU * MU_DECAY**k for k in range(stages + 1)]


def nuclear_variational(
    matrix: np.ndarray,
    width: int,
    iterations: int = 2000,
    seed: int = 0,
) -> NuclearVariationalResult:
    """Σ_j ‖u_j‖‖v_j‖ at the width-R factorization reached by μ-continuation
    ridge ALS. ``iterations`` caps the sweeps of each μ stage.

    Equals the nuclear norm when R ≥ rank(M). When R < rank(M) no width-R
    factorization reproduces M, the relative gap stays above
    FEASIBILITY_TOLERANCE and the value is +∞.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ArgumentError(f"expected a matrix, got shape {matrix.shape}")
    if width < 1:
        raise ArgumentError(f"width must be ≥ 1, got {width}")
    if iterations < 1:
        raise ArgumentError(f"iterations must be ≥ 1, got {iterations}")
    scale = float(np.linalg.norm(matrix))
    if scale == 0.0:
        return NuclearVariationalResult(
            value=0.0, gap=0.0, iterations=0, converged=True
        )

    rng = np.random.default_rng(seed)
    rows, cols = matrix.shape
    u = np.sqrt(scale) * rng.standard_normal((rows, width))
    v = np.sqrt(scale) * rng.standard_normal((cols, width))
    reseed = RESEED * np.sqrt(scale)
    sweeps = 0
    for mu in mu_schedule(scale):
        u = u + reseed * rng.standard_normal(u.shape)
        v = v + reseed * rng.standard_normal(v.shape)
        value = _penalized(matrix, u, v, mu)
        for _ in range(iterations):
            u = _ridge_solve(matrix, v, mu)
            v = _ridge_solve(matrix.T, u, mu)
            u, v = _balance_columns(u, v)
            sweeps += 1
            previous, value = value, _penalized(matrix, u, v, mu)
            if abs(previous - value) <= STAGE_TOLERANCE * value:
                break
        _logger.debug(f"μ = {mu:.3g}: F = {value:.12g} after {sweeps} sweeps")

    gap = float(np.linalg.norm(matrix - u @ v.T)) / scale
    converged = gap <= FEASIBILITY_TOLERANCE
    value = factor_theta_sum(u, v)
    if not converged:
        _logger.warning(
            f"Width {width} factorization misses the matrix by {gap:.3g} (relative); "
            "the restricted program is infeasible"
        )
        value = np.inf
    return NuclearVariationalResult(
        value=value, gap=gap, iterations=sweeps, converged=converged
    )
