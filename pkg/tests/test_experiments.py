"""
Unit tests for data generation, the convex oracle, held-out gaps, the sandwich
check and the sweeps.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from homognet.errors import ArgumentError
from homognet.experiments.convex_oracle_service import (
    convex_oracle_sensing,
    singular_value_threshold,
)
from homognet.experiments.data_service import generate
from homognet.experiments.experiment_models import ExperimentConfig
from homognet.experiments.experiment_service import (
    config_teacher,
    lipschitz_sweep,
    monte_carlo_gap,
    rate_sweep,
    sandwich_check,
)
from homognet.model.model_models import FamilyDims, FamilyKind, FamilyTag
from homognet.model.model_service import objective
from homognet.model.zoo_service import make_model, make_teacher, teacher_outputs
from homognet.trainer.trainer_models import TrainOptions
from homognet.trainer.trainer_service import descend, meta_train


SENSING = FamilyTag(kind=FamilyKind.MATRIX_SENSING)
RELU = FamilyTag(kind=FamilyKind.TWO_LAYER_RELU)
SQUARE = FamilyDims(m=4, n=4)


def _config(**overrides) -> ExperimentConfig:
    values = dict(family=SENSING, dims=SQUARE, rank=1, noise=0.1, N=50, lam=1e-2)
    values.update(overrides)
    return ExperimentConfig(**values)


class TestGenerate:
    """Test cases for generate."""

    def test_noiseless_targets_match_teacher(self):
        """Test that σ = 0 gives y = f*(x) exactly."""
        teacher = make_teacher(RELU, FamilyDims(m=2, n=3), 2, 0.0, seed=1)
        dataset = generate(RELU, teacher, 30, seed=2)
        np.testing.assert_array_equal(
            dataset.targets, teacher_outputs(teacher, dataset.inputs)
        )
        assert dataset.meta.teacher is teacher
        assert dataset.meta.seed == 2

    def test_unit_second_moment(self):
        """Test E‖X‖² ≈ 1 on a large sample."""
        teacher = make_teacher(SENSING, SQUARE, 1, 0.0, seed=0)
        dataset = generate(SENSING, teacher, 10_000, seed=0)
        second_moment = np.mean(np.sum(dataset.inputs**2, axis=(1, 2)))
        assert second_moment == pytest.approx(1.0, abs=0.05)

    def test_deterministic(self):
        """Test that the seed fixes the draw."""
        teacher = make_teacher(SENSING, SQUARE, 1, 0.5, seed=0)
        first = generate(SENSING, teacher, 20, seed=7)
        second = generate(SENSING, teacher, 20, seed=7)
        np.testing.assert_array_equal(first.inputs, second.inputs)
        np.testing.assert_array_equal(first.targets, second.targets)

    def test_family_mismatch(self):
        """Test that a teacher from another family is rejected."""
        teacher = make_teacher(SENSING, SQUARE, 1, 0.0, seed=0)
        with pytest.raises(ArgumentError, match="teacher"):
            generate(RELU, teacher, 10, seed=0)


class TestExperimentConfig:
    """Test cases for ExperimentConfig."""

    def test_defaults(self):
        """Test that only the family and dims are required."""
        config = ExperimentConfig(family=SENSING, dims=SQUARE)
        assert config.N == 120
        assert config.threads == 1
        assert config.widths == [1, 2, 4, 8]

    def test_heldout_size(self):
        """Test max(10N, 1e5) capped at 1e6 and explicit sizes."""
        assert _config(N=50).heldout_size() == 100_000
        assert _config(N=50_000).heldout_size() == 500_000
        assert _config(N=200_000).heldout_size() == 1_000_000
        assert _config(N=50, heldout=300).heldout_size() == 300
        assert _config(N=50, heldout=300).heldout_size(N=400) == 400

    def test_rejects_small_heldout(self):
        """Test that M < N is rejected."""
        with pytest.raises(ValidationError, match="held-out"):
            _config(N=50, heldout=10)

    @pytest.mark.parametrize("grid", [[], [0, 1], [4, 2], [3, 3]])
    def test_rejects_bad_grids(self, grid):
        """Test that width grids must be positive and strictly ascending."""
        with pytest.raises(ValidationError):
            _config(widths=grid)

    def test_rejects_bad_delta(self):
        """Test that δ must lie in (0, 1]."""
        with pytest.raises(ValidationError):
            _config(delta=1.5)


class TestConvexOracle:
    """Test cases for convex_oracle_sensing."""

    def setup_method(self):
        teacher = make_teacher(SENSING, SQUARE, 1, 0.1, seed=0)
        self.dataset = generate(SENSING, teacher, 60, seed=0)

    def test_threshold(self):
        """Test singular value thresholding on a diagonal matrix."""
        shrunk, nuclear = singular_value_threshold(np.diag([3.0, 1.0, 0.5]), 1.0)
        np.testing.assert_allclose(shrunk, np.diag([2.0, 0.0, 0.0]), atol=1e-12)
        assert nuclear == pytest.approx(2.0)

    def test_huge_lambda_gives_zero(self):
        """Test that λ above ‖∇‖₂ at zero leaves M = 0."""
        result = convex_oracle_sensing(self.dataset, 1e6)
        assert result.nuclear_norm == 0.0
        np.testing.assert_array_equal(result.matrix, 0.0)
        expected = 0.5 * np.mean(self.dataset.targets[:, 0] ** 2)
        assert result.value == pytest.approx(expected)
        assert result.converged

    def test_lower_bounds_factored_objective(self):
        """Test that the convex value never exceeds a factored objective."""
        result = convex_oracle_sensing(self.dataset, 1e-2)
        assert result.converged
        for seed in range(5):
            model = make_model(SENSING, SQUARE, 3, 0.5, seed=seed, lam=1e-2)
            trained, _ = descend(self.dataset, model, TrainOptions(max_iterations=50))
            assert result.value <= objective(self.dataset, trained) + 1e-6

    def test_rejects_other_families(self):
        """Test that non-sensing datasets and λ ≤ 0 are rejected."""
        teacher = make_teacher(RELU, FamilyDims(m=2, n=2), 1, 0.0, seed=0)
        with pytest.raises(ArgumentError, match="matrix sensing"):
            convex_oracle_sensing(generate(RELU, teacher, 10, seed=0), 0.1)
        with pytest.raises(ArgumentError, match="λ"):
            convex_oracle_sensing(self.dataset, 0.0)


class TestMonteCarloGap:
    """Test cases for monte_carlo_gap."""

    def setup_method(self):
        self.config = _config(heldout=200, repetitions=3)
        self.dataset = generate(SENSING, config_teacher(self.config), 50, seed=0)
        self.model = make_model(SENSING, SQUARE, 2, 0.5, seed=1, lam=1e-2)

    def test_training_set_as_heldout_gives_zero(self):
        """Test that reusing the training set gives a zero gap."""
        estimate = monte_carlo_gap(self.config, self.model, self.dataset, self.dataset)
        assert estimate.gap == 0.0
        assert estimate.repetitions == 1
        assert estimate.heldout_size == 50

    def test_fresh_draws(self):
        """Test the repeated held-out estimate."""
        estimate = monte_carlo_gap(self.config, self.model, self.dataset)
        assert estimate.repetitions == 3
        assert estimate.heldout_size == 200
        assert estimate.gap >= 0
        assert estimate.standard_error >= 0
        again = monte_carlo_gap(self.config, self.model, self.dataset)
        assert again == estimate

    def test_fresh_draws_need_teacher(self):
        """Test that a dataset without a teacher cannot be redrawn."""
        bare = self.dataset.model_copy(
            update={"meta": self.dataset.meta.model_copy(update={"teacher": None})}
        )
        with pytest.raises(ArgumentError, match="teacher"):
            monte_carlo_gap(self.config, self.model, bare)


class TestSandwichCheck:
    """Test cases for sandwich_check."""

    def setup_method(self):
        teacher = make_teacher(SENSING, SQUARE, 1, 0.1, seed=0)
        self.dataset = generate(SENSING, teacher, 80, seed=0)

    def test_rejects_other_families(self):
        """Test that a ReLU model is rejected."""
        model = make_model(RELU, SQUARE, 1, 1.0, seed=0, lam=1e-2)
        with pytest.raises(ArgumentError, match="matrix sensing"):
            sandwich_check(self.dataset, model, 1e-2)

    def test_rejects_width_zero(self):
        """Test that the empty network is rejected."""
        model = make_model(SENSING, SQUARE, 0, 1.0, seed=0, lam=1e-2)
        with pytest.raises(ArgumentError, match="width"):
            sandwich_check(self.dataset, model, 1e-2)

    def test_rejects_lambda_mismatch(self):
        """Test that λ must equal the model's λ."""
        model = make_model(SENSING, SQUARE, 1, 1.0, seed=0, lam=1e-2)
        with pytest.raises(ArgumentError, match="differs"):
            sandwich_check(self.dataset, model, 2e-2)

    def test_rejects_non_stationary_model(self):
        """Test that a random start is not accepted."""
        model = make_model(SENSING, SQUARE, 2, 1.0, seed=0, lam=1e-3)
        with pytest.raises(ArgumentError, match="stationary"):
            sandwich_check(self.dataset, model, 1e-3)

    @pytest.mark.slow
    @pytest.mark.parametrize("lam", [1e-3, 1e-2])
    @pytest.mark.parametrize("seed", range(5))
    def test_meta_trained_model_passes(self, seed, lam):
        """Test that certified rank-2 models are squeezed onto the convex
        value."""
        dims = FamilyDims(m=6, n=6)
        teacher = make_teacher(SENSING, dims, 2, 0.1, seed=seed)
        dataset = generate(SENSING, teacher, 120, seed=seed)
        options = TrainOptions(gradient_tolerance=1e-8)
        model, _, _ = meta_train(dataset, SENSING, dims, lam, options, seed=seed)
        report = sandwich_check(dataset, model, lam)
        assert report.passed
        assert report.lower_holds
        assert report.upper_holds
        assert report.oracle_converged
        assert report.objective == pytest.approx(report.convex_value, rel=1e-3)

    @pytest.mark.slow
    def test_spurious_stationary_point_passes(self):
        """Test the upper side at a width-1 stationary point of a rank-2 task."""
        teacher = make_teacher(SENSING, SQUARE, 2, 0.0, seed=3)
        dataset = generate(SENSING, teacher, 80, seed=3)
        model = make_model(SENSING, SQUARE, 1, 0.5, seed=4, lam=1e-2)
        trained, trace = descend(
            dataset, model, TrainOptions(gradient_tolerance=1e-8)
        )
        assert trace.converged
        report = sandwich_check(dataset, trained, 1e-2)
        assert report.lower_holds
        assert report.upper_holds
        assert report.polar_value > 1.0


class TestSweeps:
    """Test cases for the Lipschitz and rate sweeps."""

    def test_lipschitz_sweep_rows(self):
        """Test one row per width with the teacher ratio."""
        config = _config(widths=[1, 2, 3], train=TrainOptions(max_iterations=100))
        rows = lipschitz_sweep(config, config_teacher(config))
        assert [row.width for row in rows] == [1, 2, 3]
        for row in rows:
            assert not row.flagged
            assert row.ratio == pytest.approx(row.lipschitz_bound / row.teacher_bound)

    def test_lipschitz_sweep_ignores_thread_count(self):
        """Test that parallel cells reproduce the sequential rows."""
        options = TrainOptions(max_iterations=100)
        single = _config(widths=[1, 2, 3], train=options)
        pooled = _config(widths=[1, 2, 3], train=options, threads=3)
        assert lipschitz_sweep(single, config_teacher(single)) == lipschitz_sweep(
            pooled, config_teacher(pooled)
        )

    def test_rate_sweep_needs_four_sizes(self):
        """Test that fewer than 4 sample sizes are rejected."""
        config = _config(n_grid=[10, 20, 40])
        with pytest.raises(ArgumentError, match="4"):
            rate_sweep(config, config_teacher(config))

    @pytest.mark.slow
    def test_rate_sweep_rows(self):
        """Test one row per sample size with the requested repetitions."""
        config = _config(
            n_grid=[40, 80, 160, 320],
            repetitions=2,
            heldout=1000,
            lam=5e-2,
            threads=2,
            train=TrainOptions(max_width=4),
        )
        rows = rate_sweep(config, config_teacher(config))
        assert [row.N for row in rows] == [40, 80, 160, 320]
        for row in rows:
            if row.flagged:
                continue
            assert row.repetitions == 2
            assert row.mean_gap >= 0
            assert row.bound_total is not None

    @pytest.mark.slow
    @pytest.mark.parametrize("tag", [SENSING, RELU], ids=["sensing", "relu"])
    def test_lipschitz_bound_tracks_teacher(self, tag):
        """Test that the Lipschitz bound stays within 3× the teacher's as the
        width grows well past r* = 4."""
        config = _config(
            family=tag,
            dims=FamilyDims(m=6, n=6),
            rank=4,
            N=200,
            widths=[1, 2, 4, 8, 16, 32],
            train=TrainOptions(init_scale=0.1),
        )
        rows = lipschitz_sweep(config, config_teacher(config))
        assert [row.width for row in rows] == [1, 2, 4, 8, 16, 32]
        for row in rows:
            assert not row.flagged
            assert 0 < row.ratio <= 3.0, f"width {row.width}"

    @pytest.mark.slow
    def test_rate_sweep_slope(self):
        """Test a log-log slope of the held-out gap near −1/2 and a bound total
        above the gap at every N."""
        config = _config(
            dims=FamilyDims(m=2, n=2),
            rank=1,
            noise=1.0,
            lam=0.1,
            heldout=20_000,
            repetitions=40,
            threads=4,
        )
        rows = rate_sweep(config, config_teacher(config))
        assert [row.N for row in rows] == [250, 500, 1000, 2000, 4000]
        for row in rows:
            assert not row.flagged
            assert row.bound_total >= row.mean_gap, f"N = {row.N}"
        slope = np.polyfit(
            np.log([row.N for row in rows]), np.log([row.mean_gap for row in rows]), 1
        )[0]
        assert -0.7 <= slope <= -0.3
