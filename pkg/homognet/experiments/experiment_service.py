"""Held-out gap estimation, the sandwich check against the convex oracle and the
width and sample-size sweeps."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from homognet.bounds.bounds_service import bound_report
from homognet.errors import ArgumentError, HomogNetError
from homognet.experiments.convex_oracle_service import convex_oracle_sensing
from homognet.experiments.data_service import generate, sample_pairs
from homognet.experiments.experiment_models import (
    ExperimentConfig,
    GapEstimate,
    LipschitzRow,
    RateRow,
    SandwichReport,
)
from homognet.model.model_models import (
    Dataset,
    FamilyKind,
    ParallelModel,
    TeacherSpec,
)
from homognet.model.model_service import (
    check_compatible,
    loss,
    objective,
    predict_all,
    require_stationary,
)
from homognet.model.zoo_service import (
    lipschitz_upper_bound,
    make_model,
    make_teacher,
    teacher_lipschitz,
)
from homognet.polar.polar_service import polar_exact_sensing
from homognet.trainer.trainer_service import descend, meta_train
from homognet.utils.run_utils import derive_rng, derive_seed


_logger = logging.getLogger(__name__)

HELDOUT_CHUNK = 10_000
SANDWICH_SLACK = 1e-4


def config_teacher(config: ExperimentConfig) -> TeacherSpec:
    """Teacher drawn from the run config"""
    return make_teacher(
        config.family, config.dims, config.rank, config.noise, config.seed
    )


def _heldout_loss(
    model: ParallelModel, teacher: TeacherSpec, size: int, rng: np.random.Generator
) -> float:
    total = 0.0
    for start in range(0, size, HELDOUT_CHUNK):
        inputs, targets = sample_pairs(rng, teacher, min(HELDOUT_CHUNK, size - start))
        total += float(np.sum((targets - predict_all(model, inputs)) ** 2))
    return 0.5 * total / size


def monte_carlo_gap(
    config: ExperimentConfig,
    model: ParallelModel,
    dataset: Dataset,
    heldout: Dataset | None = None,
) -> GapEstimate:
    """|NC_μ − NC_μN| with NC_μ estimated on fresh teacher draws, repeated
    config.repetitions times. An explicit held-out set is used once as given."""
    check_compatible(dataset, model)
    training = loss(dataset, model)
    if heldout is not None:
        value = loss(heldout, model)
        return GapEstimate(
            gap=abs(value - training),
            standard_error=0.0,
            training_loss=training,
            heldout_loss=value,
            heldout_size=heldout.size,
            repetitions=1,
        )
    teacher = dataset.meta.teacher
    if teacher is None:
        raise ArgumentError("fresh held-out draws need a dataset with a teacher")
    size = config.heldout_size(dataset.size)
    values = np.array(
        [
            _heldout_loss(model, teacher, size, derive_rng(config.seed, 0, rep))
            for rep in range(config.repetitions)
        ]
    )
    gaps = np.abs(values - training)
    stderr = 0.0
    if len(gaps) > 1:
        stderr = float(np.std(gaps, ddof=1) / math.sqrt(len(gaps)))
    return GapEstimate(
        gap=float(gaps.mean()),
        standard_error=stderr,
        training_loss=training,
        heldout_loss=float(values.mean()),
        heldout_size=size,
        repetitions=config.repetitions,
    )


def sandwich_check(
    dataset: Dataset, model: ParallelModel, lam: float
) -> SandwichReport:
    """Check C(f*) ≤ NC(model) ≤ C(f*) + λΩ(f*)(polar − 1)₊ within a slack of
    1e−4·(1 + |NC|) at a stationary matrix sensing model."""
    if model.family.kind != FamilyKind.MATRIX_SENSING:
        raise ArgumentError("sandwich_check applies to matrix sensing only")
    if model.width < 1:
        raise ArgumentError("sandwich_check needs a model of width ≥ 1")
    if not math.isclose(lam, model.lam, rel_tol=1e-12):
        raise ArgumentError(f"λ = {lam} differs from the model's λ = {model.lam}")
    require_stationary(dataset, model)
    oracle = convex_oracle_sensing(dataset, lam)
    cert = polar_exact_sensing(dataset, model, lam)
    value = objective(dataset, model)
    slack = SANDWICH_SLACK * (1.0 + abs(value))
    upper = oracle.value + lam * oracle.nuclear_norm * max(cert.value - 1.0, 0.0)
    lower_holds = oracle.value <= value + slack
    upper_holds = value <= upper + slack
    passed = lower_holds and upper_holds
    if not passed:
        _logger.warning(
            f"Sandwich failed: convex {oracle.value:.10g}, objective {value:.10g}, "
            f"upper {upper:.10g}"
        )
    return SandwichReport(
        lam=lam,
        convex_value=oracle.value,
        objective=value,
        polar_value=cert.value,
        omega=oracle.nuclear_norm,
        upper_bound=upper,
        slack=slack,
        lower_holds=lower_holds,
        upper_holds=upper_holds,
        oracle_converged=oracle.converged,
        passed=passed,
    )


def _run_cells(config: ExperimentConfig, cell: Callable, keys: list) -> list:
    """Map cell over keys on the sweep thread pool, keeping key order."""
    with ThreadPoolExecutor(max_workers=config.threads) as executor:
        return list(executor.map(cell, keys))


def lipschitz_sweep(
    config: ExperimentConfig, teacher: TeacherSpec
) -> list[LipschitzRow]:
    """Train a fixed-width model for every width in the grid on one dataset and
    record its Lipschitz upper bound next to the teacher's."""
    dataset = generate(config.family, teacher, config.N, config.seed)
    teacher_bound = teacher_lipschitz(teacher)

    def cell(index: int) -> LipschitzRow:
        width = config.widths[index]
        try:
            model = make_model(
                config.family,
                config.dims,
                width,
                config.train.init_scale,
                derive_seed(config.seed, 1, index),
                config.lam,
            )
            model, _ = descend(dataset, model, config.train)
            bound = lipschitz_upper_bound(model)
        except HomogNetError as e:
            _logger.warning(f"Lipschitz cell at width {width} failed: {e}")
            return LipschitzRow(
                width=width, teacher_bound=teacher_bound, flagged=True, error=str(e)
            )
        _logger.info(f"Lipschitz cell width={width}: {bound:.6g}")
        ratio = bound / teacher_bound if teacher_bound > 0 else None
        return LipschitzRow(
            width=width,
            lipschitz_bound=bound,
            teacher_bound=teacher_bound,
            ratio=ratio,
        )

    return _run_cells(config, cell, list(range(len(config.widths))))


def rate_sweep(config: ExperimentConfig, teacher: TeacherSpec) -> list[RateRow]:
    """For every N in the grid and every repetition: fresh data, meta training,
    the held-out gap and the bound total."""
    if len(config.n_grid) < 4:
        raise ArgumentError("the rate sweep needs at least 4 sample sizes")

    def cell(key: tuple[int, int]) -> GapEstimate | None:
        index, rep = key
        N = config.n_grid[index]
        cell_seed = derive_seed(config.seed, 2, index, rep)
        try:
            dataset = generate(config.family, teacher, N, cell_seed)
            model, cert, _ = meta_train(
                dataset,
                config.family,
                config.dims,
                config.lam,
                config.train,
                config.polar,
                seed=cell_seed,
            )
            cell_config = config.model_copy(update={"seed": cell_seed})
            estimate = monte_carlo_gap(cell_config, model, dataset)
            report = bound_report(config.family, dataset, model, cert, config.delta)
        except HomogNetError as e:
            _logger.warning(f"Rate cell N={N} rep={rep} failed: {e}")
            return None
        _logger.info(f"Rate cell N={N} rep={rep}: gap {estimate.gap:.4g}")
        return estimate.model_copy(update={"bound_total": report.total})

    keys = [
        (index, rep)
        for index in range(len(config.n_grid))
        for rep in range(config.repetitions)
    ]
    results = _run_cells(config, cell, keys)

    rows = []
    for index, N in enumerate(config.n_grid):
        estimates = [
            result
            for (i, _), result in zip(keys, results)
            if i == index and result is not None
        ]
        flagged = len(estimates) < config.repetitions
        if not estimates:
            rows.append(RateRow(N=N, repetitions=0, flagged=True))
            continue
        gaps = np.array([estimate.gap for estimate in estimates])
        stderr = 0.0
        if len(gaps) > 1:
            stderr = float(np.std(gaps, ddof=1) / math.sqrt(len(gaps)))
        rows.append(
            RateRow(
                N=N,
                mean_gap=float(gaps.mean()),
                gap_stderr=stderr,
                bound_total=float(np.mean([e.bound_total for e in estimates])),
                repetitions=len(estimates),
                flagged=flagged,
            )
        )
    return rows
