import numpy as np

from homognet.dependency import get_family_service
from homognet.errors import ArgumentError
from homognet.model.model_models import (
    Dataset,
    DatasetMeta,
    FamilyTag,
    TeacherSpec,
)
from homognet.model.zoo_service import teacher_outputs


def sample_pairs(
    rng: np.random.Generator, teacher: TeacherSpec, size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian inputs with E‖X‖² = 1 and targets from the teacher plus noise."""
    service = get_family_service(teacher.family.kind)
    inputs = service.sample_inputs(rng, teacher.dims, size)
    targets = teacher_outputs(teacher, inputs) + service.sample_noise(
        rng, teacher.dims, size, teacher.noise
    )
    return inputs, targets


def generate(tag: FamilyTag, teacher: TeacherSpec, N: int, seed: int) -> Dataset:
    if tag.kind != teacher.family.kind:
        raise ArgumentError(
            f"teacher is {teacher.family.kind.value}, tag is {tag.kind.value}"
        )
    if N < 1:
        raise ArgumentError(f"N must be ≥ 1, got {N}")
    inputs, targets = sample_pairs(np.random.default_rng(seed), teacher, N)
    return Dataset(
        family=tag,
        dims=teacher.dims,
        inputs=inputs,
        targets=targets,
        meta=DatasetMeta(
            sigma_x=1.0, sigma_noise=teacher.noise, teacher=teacher, seed=seed
        ),
    )
