"""
Unit tests for polar evaluation and the optimality verdicts it supports.
"""

import numpy as np
import pytest

from homognet.errors import ArgumentError, DimensionError
from homognet.experiments.data_service import generate
from homognet.model.gauge import gauge_value
from homognet.model.model_models import (
    Dataset,
    FamilyDims,
    FamilyKind,
    FamilyTag,
    GaugeKind,
    GaugeSpec,
    ParallelModel,
)
from homognet.model.model_service import predict_all
from homognet.model.zoo_service import make_model, make_teacher
from homognet.polar.polar_models import (
    PolarCertificate,
    PolarMethod,
    PolarOptions,
    Verdict,
)
from homognet.polar.polar_service import (
    certify,
    compute_polar,
    polar_exact_sensing,
    polar_search_attention,
    polar_search_relu,
    polar_structured,
    polar_upper_bound,
    residuals,
)
from homognet.trainer.trainer_models import TrainOptions
from homognet.trainer.trainer_service import descend
from homognet.utils.linalg_utils import top_singular_pair


SENSING = FamilyTag(kind=FamilyKind.MATRIX_SENSING)
LINEAR = FamilyTag(kind=FamilyKind.TWO_LAYER_LINEAR)
RELU = FamilyTag(kind=FamilyKind.TWO_LAYER_RELU)
ATTENTION = FamilyTag(kind=FamilyKind.MULTI_HEAD_ATTENTION)


def _empty(tag: FamilyTag, dims: FamilyDims, lam: float = 1.0) -> ParallelModel:
    return ParallelModel(family=tag, dims=dims, lam=lam)


def _self_fit(tag: FamilyTag, dims: FamilyDims, seed: int):
    """A model together with data it fits exactly."""
    model = make_model(tag, dims, 2, 1.0, seed, 0.1)
    teacher = make_teacher(tag, dims, 1, 0.0, seed)
    inputs = generate(tag, teacher, 20, seed).inputs
    dataset = Dataset(
        family=tag, dims=dims, inputs=inputs, targets=predict_all(model, inputs)
    )
    return dataset, model


def _random_problem(tag: FamilyTag, dims: FamilyDims, seed: int, width: int = 2):
    teacher = make_teacher(tag, dims, 2, 0.2, seed)
    dataset = generate(tag, teacher, 30, seed)
    model = make_model(tag, dims, width, 0.5, seed + 50, 0.05)
    return dataset, model


def _relu_polar_on_circle(dataset: Dataset, model: ParallelModel) -> float:
    """ReLU polar for two-dimensional inputs by walking the arcs of the unit
    circle on which the set of active samples is fixed. On each arc the value
    is ‖A v‖ for a fixed A, maximized at an end point or at ±(top right
    singular vector of A)."""
    residual = residuals(dataset, model)
    inputs = dataset.inputs

    def value(angle: float) -> float:
        v = np.array([np.cos(angle), np.sin(angle)])
        return float(np.linalg.norm(residual.T @ np.maximum(inputs @ v, 0.0)))

    normals = np.arctan2(inputs[:, 1], inputs[:, 0])
    crossings = np.concatenate([normals + np.pi / 2, normals - np.pi / 2])
    breaks = np.sort(np.mod(crossings, 2 * np.pi))
    ends = np.append(breaks[1:], breaks[0] + 2 * np.pi)
    best = 0.0
    for start, end in zip(breaks, ends):
        middle = 0.5 * (start + end)
        active = inputs @ np.array([np.cos(middle), np.sin(middle)]) > 0
        candidates = [start, end]
        if active.any():
            _, _, right_t = np.linalg.svd(residual[active].T @ inputs[active])
            top = np.arctan2(right_t[0, 1], right_t[0, 0])
            for angle in (top, top + np.pi):
                if np.mod(angle - start, 2 * np.pi) <= end - start:
                    candidates.append(angle)
        best = max(best, *(value(angle) for angle in candidates))
    return best / (dataset.size * model.lam)


class TestResiduals:
    def test_width_zero_residuals_are_targets(self):
        """Test that the empty network leaves the targets as residuals."""
        dataset, _ = _random_problem(RELU, FamilyDims(m=2, n=3), 0)
        empty = _empty(RELU, dataset.dims)
        np.testing.assert_array_equal(residuals(dataset, empty), dataset.targets)

    def test_mismatched_model(self):
        """Test that residuals check the model against the data."""
        dataset, _ = _random_problem(RELU, FamilyDims(m=2, n=3), 0)
        with pytest.raises(DimensionError):
            residuals(dataset, _empty(RELU, FamilyDims(m=2, n=4)))


def _clustered(top_gap: float, seed: int = 0) -> np.ndarray:
    """8×6 matrix with singular values (1 + top_gap, 1, 0.5, 0, ...)."""
    rng = np.random.default_rng(seed)
    left, _ = np.linalg.qr(rng.standard_normal((8, 3)))
    right, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    return (left * [1.0 + top_gap, 1.0, 0.5]) @ right.T


class TestTopSingularPair:
    """Test cases for the leading singular triple."""

    def test_clustered_top_values(self):
        """Test that a 2e-6 gap between the two largest singular values is
        resolved exactly and reported as converged."""
        pair = top_singular_pair(_clustered(2e-6))
        assert pair.converged
        assert pair.value == pytest.approx(1.0 + 2e-6, rel=1e-12)
        attained = pair.left @ _clustered(2e-6) @ pair.right
        assert attained == pytest.approx(pair.value, rel=1e-12)

    def test_power_iteration_on_clustered_values(self):
        """Test that power iteration stops on the Rayleigh quotient inside the
        cluster instead of running to its cap."""
        pair = top_singular_pair(_clustered(2e-6), dense_limit=0)
        assert pair.converged
        assert pair.iterations < 10_000
        assert pair.value == pytest.approx(1.0 + 2e-6, rel=1e-5)
        assert np.linalg.norm(pair.left) == pytest.approx(1.0)
        assert np.linalg.norm(pair.right) == pytest.approx(1.0)

    def test_equal_top_values(self):
        """Test a repeated leading singular value on both paths."""
        for dense_limit in (512, 0):
            pair = top_singular_pair(_clustered(0.0), dense_limit=dense_limit)
            assert pair.converged
            assert pair.value == pytest.approx(1.0, rel=1e-9)

    def test_zero_matrix(self):
        """Test value 0 with unit witnesses."""
        pair = top_singular_pair(np.zeros((3, 2)))
        assert pair.value == 0.0
        np.testing.assert_array_equal(pair.left, [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(pair.right, [1.0, 0.0])

    def test_clustered_polar_is_certified(self):
        """Test the exact verdict when the residual aggregate has clustered
        top singular values exactly at λ."""
        aggregate = _clustered(0.0)
        dims = FamilyDims(m=8, n=6)
        basis = np.eye(48).reshape(48, 8, 6)
        dataset = Dataset(
            family=SENSING,
            dims=dims,
            inputs=basis,
            targets=48.0 * aggregate.reshape(48, 1),
        )
        cert = polar_exact_sensing(dataset, _empty(SENSING, dims))
        assert cert.value == pytest.approx(1.0, rel=1e-9)
        assert cert.converged
        assert cert.verdict == Verdict.CERTIFIED_GLOBAL


class TestExactPolar:
    """Test cases for the spectral-norm polar of sensing and linear networks."""

    def test_single_measurement_example(self):
        """Test N = 1, y = 1, X = e₁e₁ᵀ, λ = 1 at the zero network."""
        dims = FamilyDims(m=2, n=2)
        dataset = Dataset(
            family=SENSING,
            dims=dims,
            inputs=np.array([[[1.0, 0.0], [0.0, 0.0]]]),
            targets=np.array([[1.0]]),
        )
        cert = polar_exact_sensing(dataset, _empty(SENSING, dims))
        assert cert.value == pytest.approx(1.0, rel=1e-12)
        assert cert.method == PolarMethod.EXACT
        assert cert.verdict == Verdict.CERTIFIED_GLOBAL

    @pytest.mark.parametrize("dense_limit", [512, 0])
    def test_matches_dense_svd(self, dense_limit):
        """Test both the dense path and power iteration against
        numpy.linalg.norm on 30 random aggregates up to 50×50."""
        options = PolarOptions(dense_limit=dense_limit)
        rng = np.random.default_rng(0)
        for trial in range(30):
            m, n = rng.integers(1, 51, size=2)
            dims = FamilyDims(m=int(m), n=int(n))
            inputs = rng.standard_normal((3, m, n))
            targets = rng.standard_normal((3, 1))
            dataset = Dataset(
                family=SENSING, dims=dims, inputs=inputs, targets=targets
            )
            lam = float(rng.uniform(0.1, 2.0))
            cert = polar_exact_sensing(
                dataset, _empty(SENSING, dims, lam), options=options
            )
            aggregate = np.einsum("i,imn->mn", targets[:, 0], inputs) / 3
            expected = np.linalg.norm(aggregate, ord=2) / lam
            assert cert.value == pytest.approx(expected, rel=1e-6), f"trial {trial}"
            assert cert.converged

    def test_linear_network_aggregate(self):
        """Test the linear network polar ‖(1/N) Σ r_i x_iᵀ‖₂/λ."""
        dataset, model = _random_problem(LINEAR, FamilyDims(m=3, n=5), 1)
        residual = residuals(dataset, model)
        aggregate = residual.T @ dataset.inputs / dataset.size
        expected = np.linalg.norm(aggregate, ord=2) / model.lam
        cert = polar_exact_sensing(dataset, model)
        assert cert.value == pytest.approx(expected, rel=1e-9)

    def test_witness_attains_value(self):
        """Test that the witness has θ = 1 and attains the polar."""
        dataset, model = _random_problem(SENSING, FamilyDims(m=4, n=3), 2)
        cert = polar_exact_sensing(dataset, model)
        u, v = cert.witness.blocks
        assert np.linalg.norm(u) * np.linalg.norm(v) == pytest.approx(1.0)
        residual = residuals(dataset, model)[:, 0]
        attained = np.einsum("i,m,imn,n->", residual, u, dataset.inputs, v)
        attained /= dataset.size * model.lam
        assert attained == pytest.approx(cert.value, rel=1e-8)

    def test_zero_residual(self):
        """Test that exactly fitted data has polar 0."""
        dataset, model = _self_fit(SENSING, FamilyDims(m=3, n=3), 3)
        cert = polar_exact_sensing(dataset, model)
        assert cert.value == 0.0
        assert cert.verdict == Verdict.CERTIFIED_GLOBAL

    def test_scales_with_targets(self):
        """Test that scaling the targets scales the polar of the zero network."""
        dataset, _ = _random_problem(SENSING, FamilyDims(m=3, n=4), 4)
        scaled = dataset.model_copy(update={"targets": 3.0 * dataset.targets})
        empty = _empty(SENSING, dataset.dims, 0.5)
        base = polar_exact_sensing(dataset, empty).value
        assert polar_exact_sensing(scaled, empty).value == pytest.approx(
            3.0 * base, rel=1e-9
        )

    def test_lambda_override(self):
        """Test that an explicit λ replaces the model's."""
        dataset, model = _random_problem(SENSING, FamilyDims(m=3, n=4), 5)
        base = polar_exact_sensing(dataset, model).value
        halved = polar_exact_sensing(dataset, model, lam=2 * model.lam).value
        assert halved == pytest.approx(base / 2, rel=1e-9)

    def test_stationary_rank_one_model_is_certified(self):
        """Test that a descended width-1 model on rank-1 noiseless data gets a
        certified global verdict with polar close to 1."""
        dims = FamilyDims(m=5, n=5)
        teacher = make_teacher(SENSING, dims, 1, 0.0, 0)
        dataset = generate(SENSING, teacher, 80, 0)
        model = make_model(SENSING, dims, 1, 1e-3, 1, 1e-3)
        trained, _ = descend(dataset, model, TrainOptions(gradient_tolerance=1e-8))
        cert = polar_exact_sensing(dataset, trained)
        assert cert.value == pytest.approx(1.0, abs=1e-3)
        assert cert.verdict == Verdict.CERTIFIED_GLOBAL

    def test_rejects_other_families(self):
        """Test that the exact polar is limited to sensing and linear networks."""
        dataset, model = _random_problem(RELU, FamilyDims(m=2, n=3), 6)
        with pytest.raises(ArgumentError):
            polar_exact_sensing(dataset, model)


class TestStructuredPolar:
    """Test cases for the gauge-aware sensing polar."""

    def test_euclidean_gauge_matches_exact(self):
        """Test that K₂ = 1 reduces to the plain spectral polar."""
        tag = FamilyTag(
            kind=FamilyKind.STRUCTURED_MATRIX_SENSING,
            gauge=GaugeSpec(kind=GaugeKind.L2),
        )
        dataset, model = _random_problem(tag, FamilyDims(m=4, n=3), 7)
        cert = polar_structured(dataset, model)
        residual = residuals(dataset, model)[:, 0]
        aggregate = np.einsum("i,imn->mn", residual, dataset.inputs) / dataset.size
        expected = np.linalg.norm(aggregate, ord=2) / model.lam
        assert cert.method == PolarMethod.UPPER_BOUND
        assert cert.value == pytest.approx(expected, rel=1e-9)
        assert cert.search_value == pytest.approx(expected, rel=1e-8)

    @pytest.mark.parametrize("seed", range(10))
    def test_search_below_bound_with_feasible_witness(self, seed):
        """Test search ≤ upper bound and γ(u) ≤ 1, ‖v‖ = 1 for the witness."""
        tag = FamilyTag(
            kind=FamilyKind.STRUCTURED_MATRIX_SENSING, gauge=GaugeSpec(sparsity=1.5)
        )
        dataset, model = _random_problem(tag, FamilyDims(m=8, n=3), seed)
        cert = polar_structured(dataset, model)
        assert 0.0 < cert.search_value <= cert.value
        u, v = cert.witness.blocks
        assert gauge_value(tag.gauge, u) <= 1.0 + 1e-9
        assert np.linalg.norm(v) == pytest.approx(1.0)


class TestSearchPolar:
    """Test cases for the ReLU and attention searches."""

    def test_relu_single_sample(self):
        """Test r = e₁, x = e₁, λ = 1: search and upper bound both equal 1."""
        dims = FamilyDims(m=2, n=2)
        dataset = Dataset(
            family=RELU,
            dims=dims,
            inputs=np.array([[1.0, 0.0]]),
            targets=np.array([[1.0, 0.0]]),
        )
        empty = _empty(RELU, dims)
        cert = polar_search_relu(dataset, empty)
        assert cert.value == pytest.approx(1.0, abs=1e-6)
        assert cert.method == PolarMethod.SEARCH
        assert polar_upper_bound(dataset, empty) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(20))
    def test_relu_search_below_upper_bound(self, seed):
        """Test search ≤ upper bound on seeded instances."""
        dataset, model = _random_problem(RELU, FamilyDims(m=3, n=4), seed)
        cert = polar_search_relu(dataset, model, restarts=8)
        assert cert.value <= polar_upper_bound(dataset, model) * (1 + 1e-12)
        u, v = cert.witness.blocks
        assert np.linalg.norm(u) == pytest.approx(1.0)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_relu_search_below_enumerated_polar(self, seed):
        """Test search ≤ enumerated polar ≤ upper bound with two inputs."""
        dataset, model = _random_problem(RELU, FamilyDims(m=3, n=2), seed)
        enumerated = _relu_polar_on_circle(dataset, model)
        search = polar_search_relu(dataset, model, restarts=8).value
        assert search <= enumerated * (1 + 1e-9) + 1e-12
        assert enumerated <= polar_upper_bound(dataset, model) * (1 + 1e-12)

    def test_relu_restarts_validated(self):
        """Test that restarts < 1 is rejected."""
        dataset, model = _random_problem(RELU, FamilyDims(m=3, n=4), 0)
        with pytest.raises(ArgumentError, match="restarts"):
            polar_search_relu(dataset, model, restarts=0)

    @pytest.mark.parametrize("seed", range(5))
    def test_attention_search_below_upper_bound(self, seed):
        """Test search ≤ upper bound and a feasible witness for attention."""
        dims = FamilyDims(m=2, n=3, T=4)
        dataset, model = _random_problem(ATTENTION, dims, seed)
        cert = polar_search_attention(dataset, model, restarts=4)
        assert cert.value <= polar_upper_bound(dataset, model) * (1 + 1e-12)
        v, z = cert.witness.blocks
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.linalg.norm(z) <= 1.0 + 1e-9

    def test_attention_small_temperature_is_average_pooling(self):
        """Test that t → 0 gives the polar of uniform token averaging."""
        tag = FamilyTag(kind=FamilyKind.MULTI_HEAD_ATTENTION, temperature=1e-8)
        dims = FamilyDims(m=2, n=3, T=4)
        dataset, _ = _random_problem(tag, dims, 8)
        empty = _empty(tag, dims, 0.2)
        cert = polar_search_attention(dataset, empty, restarts=2)
        pooled = dataset.inputs.mean(axis=2)
        expected = np.linalg.norm(dataset.targets.T @ pooled) / (dataset.size * 0.2)
        assert cert.value == pytest.approx(expected, rel=1e-6)

    def test_attention_zero_residual(self):
        """Test that exactly fitted attention data has polar 0."""
        dataset, model = _self_fit(ATTENTION, FamilyDims(m=2, n=3, T=3), 9)
        cert = polar_search_attention(dataset, model, restarts=2)
        assert cert.value == pytest.approx(0.0, abs=1e-12)

    def test_upper_bound_rejects_sensing(self):
        """Test that the sample-wise bound is not offered for matrix sensing."""
        dataset, model = _random_problem(SENSING, FamilyDims(m=2, n=2), 0)
        with pytest.raises(ArgumentError):
            polar_upper_bound(dataset, model)


class TestCertify:
    """Test cases for the verdict rules."""

    def _cert(self, value, method, search_value=None, converged=True):
        return PolarCertificate(
            value=value,
            method=method,
            verdict=Verdict.INDETERMINATE,
            tolerance=1e-3,
            search_value=search_value,
            converged=converged,
        )

    def test_exact(self):
        """Test exact values below and above 1 + τ."""
        assert certify(self._cert(0.99, PolarMethod.EXACT)) == Verdict.CERTIFIED_GLOBAL
        assert certify(self._cert(1.0005, PolarMethod.EXACT)) == (
            Verdict.CERTIFIED_GLOBAL
        )
        assert certify(self._cert(1.5, PolarMethod.EXACT)) == Verdict.NOT_OPTIMAL

    def test_search(self):
        """Test that a search value never certifies global optimality."""
        assert certify(self._cert(0.99, PolarMethod.SEARCH)) == (
            Verdict.HEURISTIC_STATIONARY_GLOBAL
        )
        assert certify(self._cert(1.5, PolarMethod.SEARCH)) == Verdict.NOT_OPTIMAL

    def test_upper_bound(self):
        """Test the upper-bound rules with and without a search value."""
        bound = PolarMethod.UPPER_BOUND
        assert certify(self._cert(0.5, bound)) == Verdict.HEURISTIC_STATIONARY_GLOBAL
        assert certify(self._cert(2.0, bound, 1.5)) == Verdict.NOT_OPTIMAL
        assert certify(self._cert(2.0, bound, 0.9)) == Verdict.INDETERMINATE
        assert certify(self._cert(2.0, bound)) == Verdict.INDETERMINATE

    def test_unconverged(self):
        """Test that an unconverged estimate is indeterminate."""
        cert = self._cert(0.5, PolarMethod.EXACT, converged=False)
        assert certify(cert) == Verdict.INDETERMINATE

    def test_tolerance_override(self):
        """Test an explicit tolerance."""
        cert = self._cert(1.05, PolarMethod.EXACT)
        assert certify(cert) == Verdict.NOT_OPTIMAL
        assert certify(cert, tolerance=0.1) == Verdict.CERTIFIED_GLOBAL


class TestComputePolar:
    @pytest.mark.parametrize(
        "kind, method",
        [
            (FamilyKind.MATRIX_SENSING, PolarMethod.EXACT),
            (FamilyKind.TWO_LAYER_LINEAR, PolarMethod.EXACT),
            (FamilyKind.STRUCTURED_MATRIX_SENSING, PolarMethod.UPPER_BOUND),
            (FamilyKind.TWO_LAYER_RELU, PolarMethod.SEARCH),
            (FamilyKind.MULTI_HEAD_ATTENTION, PolarMethod.SEARCH),
        ],
    )
    def test_dispatch(self, kind, method):
        """Test that each family gets its strongest method."""
        tag = FamilyTag(kind=kind)
        dataset, model = _random_problem(tag, FamilyDims(m=2, n=3, T=2), 0)
        cert = compute_polar(dataset, model, PolarOptions(restarts=2))
        assert cert.method == method
        assert cert.tolerance == 1e-3
