from dataclasses import dataclass

import numpy as np
from scipy import linalg


# Matrices whose smaller side is at most this size are decomposed densely.
DENSE_LIMIT = 512


@dataclass(frozen=True)
class SingularPair:
    """Leading singular triple of a matrix"""

    value: float
    left: np.ndarray
    right: np.ndarray
    iterations: int
    converged: bool


def _unit(size: int) -> np.ndarray:
    result = np.zeros(size)
    result[0] = 1.0
    return result


def _dense_pair(matrix: np.ndarray) -> SingularPair:
    left, values, right_t = linalg.svd(matrix, full_matrices=False)
    return SingularPair(float(values[0]), left[:, 0], right_t[0], 0, True)


def top_singular_pair(
    matrix: np.ndarray,
    tolerance: float = 1e-10,
    max_iterations: int = 10_000,
    seed: int = 0,
    dense_limit: int = DENSE_LIMIT,
) -> SingularPair:
    """Top singular pair of ``matrix``.

    Small matrices go through a dense SVD, which stays exact when the leading
    singular values are clustered. Larger ones use power iteration on AᵀA,
    stopping once the Rayleigh quotient σ changes by at most tolerance·σ
    between sweeps. The start vector is drawn from a generator seeded with
    ``seed``. A zero matrix returns value 0 with the first standard basis
    vectors as witness.
    """
    rows, cols = matrix.shape
    if rows == 0 or cols == 0 or not np.any(matrix):
        return SingularPair(0.0, _unit(rows), _unit(cols), 0, True)
    if min(rows, cols) <= dense_limit:
        return _dense_pair(matrix)

    rng = np.random.default_rng(seed)
    right = rng.standard_normal(cols)
    right /= np.linalg.norm(right)
    left = _unit(rows)
    sigma = 0.0
    for iteration in range(1, max_iterations + 1):
        left = matrix @ right
        left_norm = np.linalg.norm(left)
        if left_norm == 0.0:
            # Start landed in the null space
            right = rng.standard_normal(cols)
            right /= np.linalg.norm(right)
            continue
        left /= left_norm
        back = matrix.T @ left
        previous, sigma = sigma, float(np.linalg.norm(back))
        right = back / sigma
        if abs(sigma - previous) <= tolerance * sigma:
            return SingularPair(sigma, left, right, iteration, True)
    return SingularPair(sigma, left, right, max_iterations, False)


def spectral_norm(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, ord=2))
