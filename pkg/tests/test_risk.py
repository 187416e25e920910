"""Unit tests for repda.risk."""

import math

import numpy as np
import pytest

from repda.domains import (
    DiscreteDomainSpec,
    DomainDataset,
    DomainId,
    GaussianDomainSpec,
    MultiSourceBundle,
    shared_beta,
)
from repda.errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    SingularSystemError,
    ValidationError,
)
from repda.hypotheses import FiniteHypothesisClass, LinearHypothesis, LossFunction
from repda.risk import (
    MixtureWeights,
    NormalMoments,
    combined_risk,
    empirical_risk_sources,
    empirical_risk_target,
    excess_risk_sandwich,
    expected_risk,
    finite_class_erm,
    lagrange_objective,
    objective_gradient,
    optimal_parameters,
    sample_coefficients,
    simplex_grid,
    solve_weighted_least_squares,
    weighted_objective,
)


def _bundle(rng, sizes=(12, 30, 25), dim=3, beta=None, noise=0.1):
    beta = np.arange(1.0, dim + 1) if beta is None else beta
    ids = (DomainId.target(), DomainId.source(1), DomainId.source(2))
    datasets = []
    for n, domain_id, shift in zip(sizes, ids, (0.0, 0.3, -0.3)):
        inputs = rng.normal(shift, 1.0, size=(n, dim))
        labels = inputs @ beta + 0.5 + noise * rng.normal(size=n)
        datasets.append(DomainDataset(inputs, labels, domain_id))
    return MultiSourceBundle(tuple(datasets[1:]), datasets[0])


class TestMixtureWeights:
    """Test the (tau, w) pair."""

    def test_tau_must_be_below_one(self):
        """Test that tau = 1 is rejected."""
        with pytest.raises(ValidationError):
            MixtureWeights(1.0, (1.0,))

    def test_w_on_simplex(self):
        """Test that w must sum to 1."""
        with pytest.raises(ValidationError):
            MixtureWeights(0.2, (0.5, 0.6))

    def test_negative_w(self):
        """Test that negative weights are rejected."""
        with pytest.raises(ValidationError):
            MixtureWeights(0.2, (1.5, -0.5))

    def test_source_count_checked(self):
        """Test that the number of weights must match the number of sources."""
        with pytest.raises(DimensionMismatchError):
            MixtureWeights.uniform(2).check_sources(3)

    def test_variance_factor(self):
        """Test tau^2/N_T + sum (1-tau)^2 w_k^2 / N_k."""
        weights = MixtureWeights(0.5, (0.5, 0.5))
        assert weights.variance_factor((10, 5, 5)) == pytest.approx(0.025 + 2 * 0.0125)


class TestEmpiricalRisks:
    """Test target, source and combined empirical risks."""

    def test_target(self):
        """Test the target average."""
        assert empirical_risk_target([0.2, 0.4]) == pytest.approx(0.3)

    def test_target_empty(self):
        """Test that an empty target raises."""
        with pytest.raises(EmptyDatasetError):
            empirical_risk_target([])

    def test_sources(self):
        """Test the w-weighted average of source means."""
        value = empirical_risk_sources([[0.1, 0.1], [0.5]], MixtureWeights(0.0, (0.5, 0.5)))
        assert value == pytest.approx(0.3)

    def test_combined(self):
        """Test the tau-convex combination."""
        report = combined_risk([0.2], [[0.4]], MixtureWeights(0.5, (1.0,)))
        assert report.combined == pytest.approx(0.3)
        assert report.to_dict()["tau"] == 0.5

    def test_sample_coefficients(self):
        """Test the per-sample weights of each domain."""
        coefficients = sample_coefficients((2, 4), MixtureWeights(0.5, (1.0,)))
        assert coefficients == pytest.approx((0.25, 0.125))


class TestOptimalParameters:
    """Test the sample-size optimal mixture weights."""

    def test_equal_sources(self):
        """Test equal sources with a small target."""
        weights = optimal_parameters((100, 2000, 2000))
        assert weights.tau == pytest.approx(100 / 4100)
        np.testing.assert_allclose(weights.w, [0.5, 0.5])

    def test_unequal_sources(self):
        """Test weights proportional to the source sizes."""
        weights = optimal_parameters((100, 1000, 3000))
        assert weights.tau == pytest.approx(0.0243902, abs=1e-7)
        np.testing.assert_allclose(weights.w, [0.25, 0.75])

    def test_grid_search_agrees(self):
        """Test that a simplex grid search lands on the same weights."""
        sizes = (100, 1000, 3000)
        grid = simplex_grid(2, 0.01)
        values = [lagrange_objective(w, sizes) for w in grid]
        best = grid[int(np.argmin(values))]
        np.testing.assert_allclose(best, optimal_parameters(sizes).w, atol=1e-9)

    def test_simplex_grid(self):
        """Test the number and validity of simplex grid points."""
        grid = simplex_grid(3, 0.25)
        assert grid.shape == (15, 3)
        np.testing.assert_allclose(grid.sum(axis=1), 1.0)

    def test_zero_size(self):
        """Test that empty domains are rejected."""
        with pytest.raises(ValidationError):
            optimal_parameters((0, 10))


class TestWeightedLeastSquares:
    """Test the weighted normal-equation solver."""

    def test_gradient_vanishes(self, rng):
        """Test that the objective gradient is zero at the solution."""
        bundle = _bundle(rng)
        weights = MixtureWeights(0.3, (0.4, 0.6))
        h = solve_weighted_least_squares(bundle, weights, ridge=0.0)
        gradient = objective_gradient(bundle, weights, h)
        np.testing.assert_allclose(gradient, 0.0, atol=1e-8)

    def test_recovers_noiseless_model(self, rng):
        """Test exact recovery of the generating coefficients without noise."""
        beta = np.array([2.0, -1.0, 0.5])
        bundle = _bundle(rng, beta=beta, noise=0.0)
        h = solve_weighted_least_squares(bundle, MixtureWeights(0.2, (0.5, 0.5)), ridge=0.0)
        np.testing.assert_allclose(h.weights, beta, atol=1e-9)
        assert h.bias == pytest.approx(0.5, abs=1e-9)
        assert weighted_objective(bundle, MixtureWeights(0.2, (0.5, 0.5)), h) < 1e-18

    def test_scale_invariance(self, rng):
        """Test that repeating every sample leaves the solution unchanged."""
        bundle = _bundle(rng)
        doubled = MultiSourceBundle(
            tuple(s.repeated(2) for s in bundle.sources), bundle.target.repeated(2)
        )
        weights = MixtureWeights(0.4, (0.7, 0.3))
        a = solve_weighted_least_squares(bundle, weights)
        b = solve_weighted_least_squares(doubled, weights)
        np.testing.assert_allclose(a.weights, b.weights, rtol=1e-8)

    def test_moments_reused_across_weights(self, rng):
        """Test that one set of moments solves every weight setting."""
        bundle = _bundle(rng)
        moments = NormalMoments.from_bundle(bundle)
        for weights in (MixtureWeights(0.1, (0.2, 0.8)), MixtureWeights(0.8, (0.5, 0.5))):
            direct = solve_weighted_least_squares(bundle, weights)
            np.testing.assert_allclose(moments.solve(weights).weights, direct.weights)

    def test_singular_without_ridge(self, rng):
        """Test that duplicated columns raise when no ridge is added."""
        column = rng.normal(size=(8, 1))
        target = DomainDataset(np.hstack([column, column]), rng.normal(size=8))
        source = DomainDataset(
            np.hstack([column, column]), rng.normal(size=8), DomainId.source(1)
        )
        bundle = MultiSourceBundle((source,), target)
        with pytest.raises(SingularSystemError):
            solve_weighted_least_squares(bundle, MixtureWeights(0.5, (1.0,)), ridge=0.0)
        h = solve_weighted_least_squares(bundle, MixtureWeights(0.5, (1.0,)))
        assert np.all(np.isfinite(h.weights))

    def test_zero_weight_source_may_be_empty(self, rng):
        """Test that a source with w_k = 0 needs no samples."""
        bundle = _bundle(rng)
        empty = DomainDataset(np.zeros((0, 3)), np.zeros(0), DomainId.source(2))
        bundle = MultiSourceBundle((bundle.sources[0], empty), bundle.target)
        h = solve_weighted_least_squares(bundle, MixtureWeights(0.5, (1.0, 0.0)))
        assert h.dim == 3

    def test_negative_ridge(self, rng):
        """Test that a negative ridge is rejected."""
        with pytest.raises(ValidationError):
            solve_weighted_least_squares(_bundle(rng), MixtureWeights.uniform(2), ridge=-1.0)


class TestExpectedRisk:
    """Test exact and Monte Carlo expected risks."""

    def test_discrete_perfect_model(self):
        """Test zero risk when the hypothesis generates the labels."""
        spec = DiscreteDomainSpec.from_arrays(
            [[0.0], [1.0], [2.0]], [0.0, 2.0, 4.0], (0.2, 0.3, 0.5)
        )
        estimate = expected_risk(spec, LinearHypothesis([2.0]), LossFunction.unclamped())
        assert estimate.value <= 1e-20
        assert estimate.draws == 0

    def test_discrete_value(self):
        """Test an exact expectation over two atoms."""
        spec = DiscreteDomainSpec.from_arrays([[0.0], [1.0]], [1.0, 1.0], (0.25, 0.75))
        estimate = expected_risk(spec, LinearHypothesis([1.0]), LossFunction.unclamped())
        assert estimate.value == pytest.approx(0.25)

    def test_gaussian_perfect_model(self):
        """Test zero Monte Carlo risk for the generating beta without noise."""
        spec = GaussianDomainSpec(0.0, 1.0, 4, 1.0, 5.0, 0.0, 0.0, "shared")
        h = LinearHypothesis(shared_beta(spec, 3))
        estimate = expected_risk(spec, h, LossFunction.unclamped(), draws=1000, seed=3)
        assert estimate.value <= 1e-20
        assert estimate.draws == 1000

    def test_gaussian_threads(self):
        """Test that the Monte Carlo estimate does not depend on the worker count."""
        spec = GaussianDomainSpec(0.0, 1.0, 2, 1.0, 5.0)
        h = LinearHypothesis([1.0, 1.0])
        a = expected_risk(spec, h, LossFunction(), draws=120_000, seed=5, threads=1)
        b = expected_risk(spec, h, LossFunction(), draws=120_000, seed=5, threads=3)
        assert a.value == b.value

    def test_gaussian_needs_draws(self):
        """Test that the Monte Carlo path requires a budget."""
        with pytest.raises(ValidationError):
            spec = GaussianDomainSpec(0.0, 1.0, 2, 1.0, 5.0)
            expected_risk(spec, LinearHypothesis([1.0, 1.0]), LossFunction())


class TestFiniteClassErm:
    """Test exact ERM over a finite class and the excess-risk sandwich."""

    def test_ties_go_to_lowest_index(self):
        """Test that equal risks select the first member."""
        hclass = FiniteHypothesisClass((LinearHypothesis([1.0]), LinearHypothesis([-1.0])))
        target = DomainDataset(np.zeros((3, 1)), np.ones(3))
        source = DomainDataset(np.zeros((2, 1)), np.ones(2), DomainId.source(1))
        bundle = MultiSourceBundle((source,), target)
        result = finite_class_erm(hclass, bundle, MixtureWeights.uniform(1, 0.5))
        assert result.index == 0
        assert result.risks[0] == result.risks[1]

    def test_sandwich_holds(self, absolute_class, coin_domains, coin_bundle):
        """Test 0 <= excess risk <= twice the uniform deviation."""
        report = excess_risk_sandwich(
            absolute_class, coin_domains[0], coin_bundle, MixtureWeights(0.3, (0.5, 0.5))
        )
        assert report.holds()
        assert report.excess >= -1e-12
        assert report.upper == pytest.approx(2 * report.uniform_deviation)
        assert math.isfinite(report.uniform_deviation)
