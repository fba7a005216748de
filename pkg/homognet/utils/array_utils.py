from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _to_array(value: Any) -> np.ndarray:
    return np.array(value, dtype=np.float64)


def _to_list(value: np.ndarray) -> list:
    return value.tolist()


# float64 array field: validated from nested lists, dumped back to nested lists.
# Models using it need ``arbitrary_types_allowed``.
Array = Annotated[
    np.ndarray,
    BeforeValidator(_to_array),
    PlainSerializer(_to_list, return_type=list),
]


def frobenius(blocks: list[np.ndarray]) -> float:
    """Euclidean norm of a list of blocks taken as one flat vector."""
    return float(np.sqrt(sum(float(np.vdot(b, b)) for b in blocks)))
