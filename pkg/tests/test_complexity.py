"""Unit tests for repda.complexity."""

import math

import numpy as np
import pytest

from repda.complexity import (
    WTauL1Norm,
    covering_number_exact,
    covering_number_greedy,
    ghost_sample,
    greedy_centers,
    is_cover,
    rademacher_empirical,
    rademacher_enumerated,
    rademacher_expected,
    rademacher_expected_enumerated,
    uen_enumerated,
    uen_estimate,
    w_tau_l1_norm,
)
from repda.domains import draw_from
from repda.errors import CapacityError, DimensionMismatchError, ValidationError
from repda.hypotheses import FunctionValueMatrix
from repda.risk import MixtureWeights
from repda.utils import RADEMACHER_STREAM, child_rng, child_seed


def _matrix(values, high=1.0):
    values = np.asarray(values, dtype=float)
    return FunctionValueMatrix(values, ("x",) * values.shape[1], (0.0, high))


@pytest.fixture
def three_domain_rows():
    """Each row is 1.5 on both columns of one domain; rows sit at mutual distance 1."""
    values = np.zeros((3, 6))
    for d in range(3):
        values[d, 2 * d : 2 * d + 2] = 1.5
    return _matrix(values, high=2.0)


@pytest.fixture
def equal_column_norm():
    """Six columns of weight 1/6 each."""
    return WTauL1Norm.for_sizes((1, 1, 1), MixtureWeights(1 / 3, (0.5, 0.5)))


class TestWTauL1Norm:
    """Test the weighted l1 norm over ghosted columns."""

    def test_constant_one(self):
        """Test that the column weights sum to 1."""
        sizes, weights = (2, 3, 1), MixtureWeights(0.4, (0.5, 0.5))
        assert w_tau_l1_norm(np.ones(12), sizes, weights) == pytest.approx(1.0)

    def test_column_weights(self, equal_column_norm):
        """Test per-column weights tau / 2N_T and (1 - tau) w_k / 2N_k."""
        np.testing.assert_allclose(equal_column_norm.column_weights, np.full(6, 1 / 6))

    def test_wrong_width(self, equal_column_norm):
        """Test that the value vector must match the column count."""
        with pytest.raises(DimensionMismatchError):
            equal_column_norm.norm(np.ones(5))

    def test_distances(self, three_domain_rows, equal_column_norm):
        """Test the pairwise distance matrix."""
        distances = equal_column_norm.distances(three_domain_rows.values)
        np.testing.assert_allclose(distances, 1.0 - np.eye(3))


class TestCoveringNumbers:
    """Test greedy and exact internal covers."""

    def test_separated_rows(self, three_domain_rows, equal_column_norm):
        """Test that three rows at distance 1 need three centers at radius 0.4."""
        greedy = covering_number_greedy(three_domain_rows, 0.4, equal_column_norm)
        exact = covering_number_exact(three_domain_rows, 0.4, equal_column_norm)
        assert greedy.value == 3.0
        assert exact.value == 3.0
        assert exact.details["method"] == "exact"

    def test_large_radius(self, three_domain_rows, equal_column_norm):
        """Test that one center suffices when the radius reaches every row."""
        assert covering_number_greedy(three_domain_rows, 1.0, equal_column_norm).value == 1.0

    def test_greedy_is_a_cover(self, rng):
        """Test that greedy centers cover every row and never beat the exact search."""
        norm = WTauL1Norm.for_sizes((2, 2, 2), MixtureWeights.uniform(2, 0.3))
        matrix = _matrix(rng.uniform(size=(15, 12)))
        distances = norm.distances(matrix.values)
        centers = greedy_centers(distances, 0.15)
        assert is_cover(distances, centers, 0.15)
        exact = covering_number_exact(matrix, 0.15, norm)
        assert 1 <= exact.value <= len(centers)

    def test_exact_capacity(self):
        """Test that the subset search refuses more than 20 functions."""
        norm = WTauL1Norm.for_sizes((1, 1), MixtureWeights.uniform(1, 0.5))
        with pytest.raises(CapacityError):
            covering_number_exact(_matrix(np.zeros((21, 4))), 0.1, norm)

    def test_radius_must_be_positive(self, three_domain_rows, equal_column_norm):
        """Test that a zero radius is rejected."""
        with pytest.raises(ValidationError):
            covering_number_greedy(three_domain_rows, 0.0, equal_column_norm)


class TestUniformEntropy:
    """Test ghost samples and uniform entropy number estimates."""

    def test_ghost_sample_layout(self, coin_domains):
        """Test that every domain gets equally many originals and ghosts."""
        target, *sources = coin_domains
        sample = ghost_sample(target, sources, (2, 3, 1), seed=4)
        assert sample.sizes == (2, 3, 1)
        assert len(sample.point_tags) == 12
        assert sample.point_tags[:4] == ("target", "target", "target'", "target'")
        assert sample.stacked().size == 12

    def test_ghost_sample_deterministic(self, coin_domains):
        """Test that a (seed, redraw) pair always gives the same sample."""
        target, *sources = coin_domains
        a = ghost_sample(target, sources, (3, 3, 3), seed=4, redraw=2)
        b = ghost_sample(target, sources, (3, 3, 3), seed=4, redraw=2)
        np.testing.assert_array_equal(a.stacked().inputs, b.stacked().inputs)

    def test_more_redraws_never_lower(self, absolute_class, coin_domains):
        """Test that the max over redraws grows with the redraw count."""
        target, *sources = coin_domains
        args = (absolute_class, target, sources, (3, 3, 3), MixtureWeights.uniform(2, 0.3), 0.05)
        few = uen_estimate(*args, redraws=1, seed=8)
        many = uen_estimate(*args, redraws=6, seed=8)
        assert many.value >= few.value
        assert many.details["estimate"] == "lower"

    def test_estimate_threads(self, absolute_class, coin_domains):
        """Test that the estimate does not depend on the worker count."""
        target, *sources = coin_domains
        args = (absolute_class, target, sources, (3, 3, 3), MixtureWeights.uniform(2, 0.3), 0.05)
        single = uen_estimate(*args, redraws=5, seed=8, threads=1)
        multi = uen_estimate(*args, redraws=5, seed=8, threads=3)
        assert single.value == multi.value

    def test_enumerated_exact_below_greedy(self, absolute_class, coin_domains):
        """Test that the exact-cover enumeration never exceeds the greedy one."""
        target, *sources = coin_domains
        args = (absolute_class, target, sources, (1, 1, 1), MixtureWeights.uniform(2, 0.3), 0.05)
        greedy = uen_enumerated(*args)
        exact = uen_enumerated(*args, exact=True)
        assert exact.value <= greedy.value
        assert 0.0 <= exact.value <= math.log(absolute_class.size)
        assert greedy.details["configurations"] == 27

    def test_enumeration_limit(self, absolute_class, coin_domains):
        """Test that oversized enumerations raise."""
        target, *sources = coin_domains
        with pytest.raises(CapacityError):
            uen_enumerated(
                absolute_class, target, sources, (1, 1, 1), MixtureWeights.uniform(2), 0.1, limit=10
            )

    def test_redraws_validated(self, absolute_class, coin_domains):
        """Test that at least one redraw is required."""
        target, *sources = coin_domains
        with pytest.raises(ValidationError):
            uen_estimate(
                absolute_class, target, sources, (1, 1, 1), MixtureWeights.uniform(2), 0.1, 0, 1
            )


class TestRademacher:
    """Test empirical and expected Rademacher complexities."""

    def test_constant_function(self):
        """Test that a single constant function has zero complexity."""
        assert rademacher_enumerated(np.full((1, 6), 0.7)).value == pytest.approx(0.0, abs=1e-15)

    def test_single_point(self):
        """Test max(sigma, 0) averaged over one sign."""
        assert rademacher_enumerated([[1.0], [0.0]]).value == pytest.approx(0.5)

    def test_monte_carlo_close_to_exact(self, rng):
        """Test the sign Monte Carlo against full enumeration."""
        values = rng.uniform(size=(4, 8))
        estimate = rademacher_empirical(values, trials=20_000, seed=2)
        assert estimate.value == pytest.approx(rademacher_enumerated(values).value, abs=0.02)
        assert estimate.std_error is not None

    def test_monte_carlo_threads(self, rng):
        """Test that chunked sign draws are identical across worker counts."""
        values = rng.uniform(size=(3, 10))
        single = rademacher_empirical(values, trials=3000, seed=7, threads=1)
        multi = rademacher_empirical(values, trials=3000, seed=7, threads=3)
        assert single.value == multi.value

    def test_trials_validated(self):
        """Test that zero sign draws are rejected."""
        with pytest.raises(ValidationError):
            rademacher_empirical(np.ones((1, 2)), trials=0, seed=1)

    def test_expected_matches_enumeration(self, absolute_class, coin_domains):
        """Test the nested Monte Carlo against exact enumeration over samples and signs."""
        exact = rademacher_expected_enumerated(absolute_class, coin_domains[0], 3)
        estimate = rademacher_expected(
            absolute_class, coin_domains[0], 3, data_trials=400, sigma_trials=200, seed=6
        )
        assert estimate.value == pytest.approx(exact.value, abs=0.05)
        assert estimate.trials == 80_000

    def test_expected_std_error_halves_trials(self, absolute_class, coin_domains):
        """Test that doubling the sign draws shrinks the standard error by about sqrt(2)."""
        ratios = []
        for seed in range(20):
            fewer, more = (
                rademacher_expected(
                    absolute_class, coin_domains[0], 20, data_trials=1, sigma_trials=s, seed=seed
                )
                for s in (200, 400)
            )
            ratios.append(fewer.std_error / more.std_error)
        assert float(np.mean(ratios)) == pytest.approx(math.sqrt(2), rel=0.1)

    def test_expected_uses_its_own_stream(self, absolute_class, coin_domains):
        """Test that data and sign draws come from the dedicated Rademacher stream."""
        seed, n = 5, 4
        estimate = rademacher_expected(
            absolute_class, coin_domains[0], n, data_trials=1, sigma_trials=300, seed=seed
        )
        dataset = draw_from(coin_domains[0], n, child_rng(seed, RADEMACHER_STREAM, 0, 0), seed=seed)
        inner_seed = int(child_seed(seed, RADEMACHER_STREAM, 0, 1).generate_state(1)[0])
        values = absolute_class.loss_values(dataset.inputs, dataset.labels)
        assert estimate.value == rademacher_empirical(values, 300, inner_seed).value

    def test_expected_enumeration_limit(self, absolute_class, coin_domains):
        """Test that atoms^N * 2^N above the limit raises."""
        with pytest.raises(CapacityError):
            rademacher_expected_enumerated(absolute_class, coin_domains[0], 11)
