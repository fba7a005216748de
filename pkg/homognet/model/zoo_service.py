import numpy as np

from homognet.dependency import get_family_service
from homognet.errors import ArgumentError
from homognet.model.model_models import (
    FamilyDims,
    FamilyTag,
    ParallelModel,
    TeacherSpec,
)
from homognet.model.model_service import stack_blocks, with_blocks


def make_model(
    tag: FamilyTag,
    dims: FamilyDims,
    width: int,
    init_scale: float,
    seed: int,
    lam: float,
) -> ParallelModel:
    """Gaussian factors rescaled so that every θ(W_j) equals init_scale."""
    if width < 0:
        raise ArgumentError(f"width must be ≥ 0, got {width}")
    if not init_scale > 0:
        raise ArgumentError(f"init_scale must be > 0, got {init_scale}")
    service = get_family_service(tag.kind)
    rng = np.random.default_rng(seed)
    blocks = service.sample_blocks(rng, dims, width)
    blocks = service.rescale(tag, service.balance(blocks), init_scale)
    return with_blocks(ParallelModel(family=tag, dims=dims, lam=lam), blocks)


def lipschitz_upper_bound(model: ParallelModel) -> float:
    if model.width < 1:
        raise ArgumentError("lipschitz_upper_bound needs width ≥ 1")
    service = get_family_service(model.family.kind)
    return service.lipschitz_upper_bound(stack_blocks(model))


def make_teacher(
    tag: FamilyTag,
    dims: FamilyDims,
    rank: int,
    noise: float,
    seed: int,
) -> TeacherSpec:
    if rank < 0:
        raise ArgumentError(f"rank must be ≥ 0, got {rank}")
    service = get_family_service(tag.kind)
    rng = np.random.default_rng(seed)
    blocks = service.make_teacher_blocks(rng, tag, dims, rank)
    return TeacherSpec(family=tag, dims=dims, rank=rank, blocks=blocks, noise=noise)


def teacher_outputs(teacher: TeacherSpec, inputs: np.ndarray) -> np.ndarray:
    service = get_family_service(teacher.family.kind)
    return service.teacher_outputs(teacher.family, teacher.blocks, inputs)


def teacher_lipschitz(teacher: TeacherSpec) -> float:
    service = get_family_service(teacher.family.kind)
    return service.teacher_lipschitz(teacher.blocks)
