"""Descent to first-order stationary points and the width-growing loop that
alternates descent with polar certification."""

import logging

import numpy as np

from homognet.dependency import get_family_service
from homognet.errors import (
    ArgumentError,
    InfeasibleRegularizerError,
    NumericError,
    StalledDescentError,
)
from homognet.model.family_service import Blocks, FamilyService
from homognet.model.model_models import (
    Dataset,
    FactorParams,
    FamilyDims,
    FamilyTag,
    ParallelModel,
    TraceRecord,
    TrainTrace,
    WidthEvent,
)
from homognet.model.model_service import (
    Evaluation,
    blocks_gradient,
    check_compatible,
    evaluate,
    evaluation_residuals,
    stack_blocks,
    with_blocks,
)
from homognet.model.zoo_service import make_model
from homognet.polar.polar_models import PolarCertificate, PolarOptions
from homognet.polar.polar_service import compute_polar
from homognet.trainer.trainer_models import TrainOptions
from homognet.utils.array_utils import frobenius


_logger = logging.getLogger(__name__)

# Witnesses may exceed θ = 1 by this much from rounding
_WITNESS_SLACK = 1e-9


def _difference(left: Blocks, right: Blocks) -> Blocks:
    return [a - b for a, b in zip(left, right)]


def stationarity_measure(
    service: FamilyService, blocks: Blocks, grad: Blocks
) -> float:
    """‖W − P(W − ∇NC(W))‖, the gradient norm when P is the identity."""
    if not service.is_projected:
        return frobenius(grad)
    moved = service.project(_difference(blocks, grad))
    return frobenius(_difference(blocks, moved))


def _record(iteration: int, evaluation: Evaluation, measure: float, lam: float):
    return TraceRecord(
        iteration=iteration,
        objective=evaluation.objective,
        gradient_norm=measure,
        max_residual=float(evaluation_residuals(evaluation, lam).max()),
    )


def descend(
    dataset: Dataset,
    model: ParallelModel,
    opts: TrainOptions | None = None,
    start_iteration: int = 0,
) -> tuple[ParallelModel, TrainTrace]:
    """Projected gradient descent on NC with Armijo backtracking.

    Every accepted step satisfies NC(W⁺) ≤ NC(W) − c‖W⁺ − W‖²/t up to a
    rounding slack of 4ε·max(1, |NC(W)|), so the objective along the trace never
    increases beyond rounding. A model that is already stationary is returned as
    it is.
    """
    opts = opts or TrainOptions()
    if model.width < 1:
        raise ArgumentError("descend needs width ≥ 1")
    check_compatible(dataset, model)
    service = get_family_service(model.family.kind)
    tag, lam = model.family, model.lam

    blocks = service.project(stack_blocks(model))
    evaluation = evaluate(service, tag, blocks, dataset, lam)
    grad = blocks_gradient(service, tag, blocks, dataset, lam, evaluation)
    records: list[TraceRecord] = []
    step = opts.initial_step / opts.step_growth
    converged = cap_hit = False

    for k in range(opts.max_iterations + 1):
        measure = stationarity_measure(service, blocks, grad)
        converged = measure <= opts.gradient_tolerance
        last = converged or k == opts.max_iterations
        if k % opts.trace_every == 0 or last:
            records.append(_record(start_iteration + k, evaluation, measure, lam))
        if converged:
            break
        if k == opts.max_iterations:
            cap_hit = True
            _logger.warning(
                f"Descent hit the iteration cap {opts.max_iterations} with projected "
                f"gradient norm {measure:.3g}"
            )
            break

        current = evaluation.objective
        slack = 4.0 * np.finfo(float).eps * max(1.0, abs(current))
        trial = min(step * opts.step_growth, opts.max_step)
        accepted = None
        for _ in range(opts.max_halvings + 1):
            candidate = service.project(
                [block - trial * g for block, g in zip(blocks, grad)]
            )
            moved = frobenius(_difference(candidate, blocks)) ** 2
            try:
                with np.errstate(over="ignore", invalid="ignore"):
                    candidate_eval = evaluate(service, tag, candidate, dataset, lam)
            except (NumericError, InfeasibleRegularizerError):
                candidate_eval = None
            if candidate_eval is not None:
                value = candidate_eval.objective
                armijo = current - opts.sufficient_decrease * moved / trial + slack
                if value <= armijo:
                    accepted = candidate, candidate_eval
                    break
            trial *= opts.backtracking
        if accepted is None:
            trace = TrainTrace(iterates=records, iteration_cap_hit=False)
            raise StalledDescentError(
                f"no decrease after {opts.max_halvings} halvings at iteration "
                f"{start_iteration + k}",
                trace=trace,
            )
        step = trial
        blocks, evaluation = accepted
        grad = blocks_gradient(service, tag, blocks, dataset, lam, evaluation)

    trace = TrainTrace(
        iterates=records, converged=converged, iteration_cap_hit=cap_hit
    )
    if converged and len(records) == 1:
        return model, trace
    return with_blocks(model, blocks), trace


def grow_width(
    model: ParallelModel, witness: FactorParams, scale: float
) -> ParallelModel:
    """Append the witness rescaled to θ = scale."""
    if witness.family != model.family.kind:
        raise ArgumentError(
            f"witness is {witness.family.value}, model is {model.family.kind.value}"
        )
    if not (np.isfinite(scale) and scale >= 0):
        raise ArgumentError(f"scale must be finite and ≥ 0, got {scale}")
    service = get_family_service(model.family.kind)
    shapes = service.block_shapes(model.dims)
    if [block.shape for block in witness.blocks] != shapes:
        raise ArgumentError(f"witness blocks do not have shapes {shapes}")
    new = [block[None].copy() for block in witness.blocks]
    theta = float(service.theta(model.family, new)[0])
    if theta > 1.0 + _WITNESS_SLACK:
        raise ArgumentError(f"witness has θ = {theta} > 1")
    if scale == 0:
        new = service.scale(new, np.zeros(1))
    elif theta > 0:
        new = service.rescale(model.family, new, scale)
    blocks = [
        np.concatenate([old, added])
        for old, added in zip(stack_blocks(model), new)
    ]
    return with_blocks(model, blocks)


def meta_train(
    dataset: Dataset,
    tag: FamilyTag,
    dims: FamilyDims,
    lam: float,
    opts: TrainOptions | None = None,
    polar_options: PolarOptions | None = None,
    seed: int = 0,
) -> tuple[ParallelModel, PolarCertificate, TrainTrace]:
    """Alternate descent and polar evaluation, appending the polar witness
    while the polar exceeds 1 + τ and the width is below R_max."""
    opts = opts or TrainOptions()
    if not lam > 0:
        raise ArgumentError(f"λ must be > 0, got {lam}")
    polar_options = (polar_options or PolarOptions()).model_copy(
        update={"tolerance": opts.polar_tolerance}
    )
    model = make_model(tag, dims, 1, opts.init_scale, seed, lam)
    check_compatible(dataset, model)

    iterates: list[TraceRecord] = []
    events: list[WidthEvent] = []
    cap_hit = max_width_reached = False
    while True:
        start = iterates[-1].iteration + 1 if iterates else 0
        model, phase = descend(dataset, model, opts, start_iteration=start)
        iterates.extend(phase.iterates)
        cap_hit = cap_hit or phase.iteration_cap_hit
        cert = compute_polar(dataset, model, polar_options)
        growth_value = (
            cert.search_value if cert.search_value is not None else cert.value
        )
        if growth_value <= 1.0 + opts.polar_tolerance or cert.witness is None:
            break
        if model.width >= opts.max_width:
            max_width_reached = True
            _logger.warning(
                f"Polar {growth_value:.6g} > 1 at the maximum width {opts.max_width}"
            )
            break
        model = grow_width(model, cert.witness, opts.growth_scale)
        events.append(
            WidthEvent(
                iteration=iterates[-1].iteration,
                width=model.width,
                polar_value=growth_value,
            )
        )
        _logger.info(f"Grew to width {model.width} at polar {growth_value:.6g}")

    trace = TrainTrace(
        iterates=iterates,
        width_events=events,
        converged=phase.converged and not max_width_reached,
        iteration_cap_hit=cap_hit,
        max_width_reached=max_width_reached,
    )
    return model, cert, trace
