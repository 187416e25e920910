"""Unit tests for repda.bounds."""

import math

import pytest

from repda.bounds import (
    BoundInput,
    alt_bennett_bound,
    asymptotic_condition,
    bennett_tail,
    bernstein_bound,
    eta_fn,
    gamma_fn,
    hoeffding_bound,
    is_optimal_weights,
    optimal_rate_bound,
    rademacher_bound_bennett,
    rademacher_bound_hoeffding,
)
from repda.errors import ContractError, DimensionMismatchError, ValidationError
from repda.risk import MixtureWeights, optimal_parameters


def _optimal(sizes, **kwargs) -> BoundInput:
    return BoundInput(sizes, optimal_parameters(sizes), **kwargs)


class TestBoundInput:
    """Test input validation and JSON loading."""

    def test_from_dict_defaults_to_optimal_weights(self):
        """Test that a document without tau and w uses the optimal weights."""
        inp = BoundInput.from_dict({"sizes": [100, 1000, 3000], "ln_uen": 2.0})
        assert is_optimal_weights(inp.weights, inp.sizes)
        assert inp.total == 4100

    def test_from_dict_needs_sizes(self):
        """Test that sizes are required."""
        with pytest.raises(ValidationError):
            BoundInput.from_dict({"ln_uen": 1.0})

    def test_confidence_range(self):
        """Test that epsilon must lie strictly inside (0, 1)."""
        with pytest.raises(ValidationError):
            BoundInput((10, 10), MixtureWeights(0.5, (1.0,)), confidence=1.0)

    def test_sizes_positive(self):
        """Test that empty domains are rejected."""
        with pytest.raises(ValidationError):
            BoundInput((0, 10), MixtureWeights(0.5, (1.0,)))

    def test_rademacher_values_per_source(self):
        """Test that one source Rademacher value is needed per source."""
        with pytest.raises(DimensionMismatchError):
            BoundInput((10, 10), MixtureWeights(0.5, (1.0,)), rademacher_sources=(0.1, 0.2))


class TestHelpers:
    """Test the Gamma and eta functions."""

    def test_gamma_at_one(self):
        """Test Gamma(1) = 1 - 2 ln 2."""
        assert gamma_fn(1.0) == pytest.approx(1 - 2 * math.log(2))

    def test_gamma_near_zero(self):
        """Test that the small-x branch matches -x^2 / 2."""
        assert gamma_fn(1e-6) == pytest.approx(-5e-13, rel=1e-5)

    def test_gamma_negative(self):
        """Test that Gamma rejects x < 0."""
        with pytest.raises(ValidationError):
            gamma_fn(-0.1)

    def test_eta_value(self):
        """Test eta(c1; x) at a known point."""
        assert eta_fn(0.2, 0.5) == pytest.approx(0.8863, abs=5e-4)

    def test_eta_singular_at_one(self):
        """Test that x = 1 is rejected."""
        with pytest.raises(ValidationError):
            eta_fn(0.2, 1.0)


class TestHoeffdingBounds:
    """Test the Hoeffding-type and optimal-rate bounds."""

    def test_stochastic_term(self):
        """Test sqrt((ln UEN - ln(eps/8)) * 32 / N) for a single source."""
        inp = BoundInput((1, 3200), MixtureWeights(0.0, (1.0,)), ln_uen=5.0, divergence=0.2)
        result = hoeffding_bound(inp)
        assert result.stochastic_term == pytest.approx(0.317414, abs=1e-6)
        assert result.discrepancy_term == pytest.approx(0.2)
        assert result.value == pytest.approx(0.517414, abs=1e-6)
        assert result.preconditions_ok

    def test_condition_failure_is_flagged(self):
        """Test that a violated weighted-size condition is reported, not raised."""
        inp = BoundInput((1, 2), MixtureWeights(0.0, (1.0,)), ln_uen=-3.0)
        result = hoeffding_bound(inp)
        assert not result.preconditions_ok
        assert result.details["issues"]

    def test_needs_ln_uen(self):
        """Test that the UEN value is required."""
        with pytest.raises(ValidationError):
            hoeffding_bound(BoundInput((1, 10), MixtureWeights(0.0, (1.0,))))

    def test_optimal_rate_matches_hoeffding(self):
        """Test that the two forms agree at the optimal weights."""
        inp = _optimal((100, 1000, 3000), ln_uen=3.0, divergence=0.1)
        general, optimal = hoeffding_bound(inp), optimal_rate_bound(inp)
        assert optimal.value == pytest.approx(general.value, rel=1e-9)
        assert optimal.discrepancy_term == pytest.approx(4000 / 4100 * 0.1)

    def test_monotone_in_inputs(self):
        """Test that the bound grows with ln UEN, D and 1/eps and shrinks with the sizes."""

        def value(scale=1, **kwargs):
            arguments = {"ln_uen": 2.0, "divergence": 0.1, "confidence": 0.05}
            arguments.update(kwargs)
            return hoeffding_bound(_optimal((100 * scale, 400 * scale, 500 * scale), **arguments))

        by_uen = [value(ln_uen=u).value for u in (0.0, 1.0, 2.0, 5.0)]
        by_divergence = [value(divergence=d).value for d in (0.0, 0.1, 0.3)]
        by_confidence = [value(confidence=e).value for e in (0.01, 0.05, 0.2)]
        by_scale = [value(scale=k).stochastic_term for k in (1, 2, 4, 8)]
        assert all(b > a for a, b in zip(by_uen, by_uen[1:]))
        assert all(b > a for a, b in zip(by_divergence, by_divergence[1:]))
        assert all(b < a for a, b in zip(by_confidence, by_confidence[1:]))
        assert all(b < a for a, b in zip(by_scale, by_scale[1:]))
        assert by_scale[-1] == pytest.approx(by_scale[0] / math.sqrt(8))

    def test_optimal_rate_contract(self):
        """Test that non-optimal weights are refused."""
        inp = BoundInput((100, 1000, 3000), MixtureWeights.uniform(2, 0.5), ln_uen=3.0)
        with pytest.raises(ContractError):
            optimal_rate_bound(inp)


class TestBennettBounds:
    """Test the Bennett tail, Bernstein and alternative Bennett bounds."""

    def test_tail_log_value(self):
        """Test ln 8 + ln UEN + N Gamma(xi)."""
        inp = _optimal((10, 45, 45), ln_uen=5.0)
        tail = bennett_tail(inp, 0.5)
        assert tail.log_value == pytest.approx(-3.7404, abs=1e-4)
        assert tail.value == pytest.approx(math.exp(tail.log_value))
        assert tail.preconditions_ok

    def test_tail_spaces_agree(self):
        """Test that the direct product matches the log-space sum."""
        inp = _optimal((10, 45, 45), ln_uen=5.0)
        assert bennett_tail(inp, 0.5, "direct").raw == pytest.approx(
            bennett_tail(inp, 0.5, "log").raw, rel=1e-9
        )

    def test_tail_direct_overflow_is_flagged(self):
        """Test that inf * 0 in the direct form gives the trivial bound with an issue."""
        inp = _optimal((10_000, 45_000, 45_000), ln_uen=800.0)
        direct, log_form = bennett_tail(inp, 0.9, "direct"), bennett_tail(inp, 0.9, "log")
        assert math.isnan(direct.raw)
        assert direct.value == 1.0
        assert not direct.preconditions_ok
        assert any("space='log'" in issue for issue in direct.details["issues"])
        assert log_form.value == 0.0
        assert log_form.preconditions_ok

    def test_tail_xi_below_discrepancy(self):
        """Test that xi <= (1 - tau) D gives the trivial bound with a flag."""
        inp = _optimal((10, 45, 45), ln_uen=5.0, divergence=0.6)
        tail = bennett_tail(inp, 0.5)
        assert tail.value == 1.0
        assert not tail.preconditions_ok

    def test_tail_needs_optimal_weights(self):
        """Test that the tail bound refuses other weights."""
        inp = BoundInput((10, 45, 45), MixtureWeights.uniform(2, 0.5), ln_uen=5.0)
        with pytest.raises(ContractError):
            bennett_tail(inp, 0.5)

    def test_bernstein_value(self):
        """Test 4 L / 3N + sqrt(2 L / N)."""
        inp = _optimal((100, 4950, 4950), ln_uen=10 + math.log(0.05 / 8))
        result = bernstein_bound(inp)
        expected = 4 * 10 / (3 * 10_000) + math.sqrt(2 * 10 / 10_000)
        assert result.stochastic_term == pytest.approx(expected)

    def test_alt_bennett_with_eta(self):
        """Test (L / N)^(1 / eta) and the missing-provenance flag."""
        inp = _optimal((100, 4950, 4950), ln_uen=10 + math.log(0.05 / 8), eta=1.5)
        result = alt_bennett_bound(inp)
        assert result.stochastic_term == pytest.approx(0.01)
        assert not result.preconditions_ok
        assert "no (c1, x) provenance for eta" in result.details["issues"]

    def test_alt_bennett_from_constants(self):
        """Test that (c1, x) fixes eta at eta(c1; x) and certifies the result."""
        inp = _optimal((100, 4950, 4950), ln_uen=10 + math.log(0.05 / 8), c1=0.2, x=0.1)
        result = alt_bennett_bound(inp)
        assert result.details["eta"] == pytest.approx(eta_fn(0.2, 0.1))
        assert result.preconditions_ok
        assert 0.0 <= result.details["implied_epsilon"] <= 1.0

    def test_alt_bennett_eta_too_small(self):
        """Test that an exponent below eta(c1; x) is flagged."""
        inp = _optimal((100, 4950, 4950), ln_uen=4.0, c1=0.2, x=0.1, eta=1.0)
        assert not alt_bennett_bound(inp).preconditions_ok


class TestRademacherBounds:
    """Test the Rademacher-complexity bounds."""

    def test_hoeffding_form(self):
        """Test 2 (1 - tau) sum w_k R_k + sqrt(ln(2/eps) / 2 * variance factor)."""
        inp = BoundInput(
            (1, 100),
            MixtureWeights(0.0, (1.0,)),
            rademacher_sources=(0.1,),
            rademacher_target=0.0,
        )
        result = rademacher_bound_hoeffding(inp)
        assert result.stochastic_term == pytest.approx(0.33581, abs=1e-5)
        assert result.details["complexity_term"] == pytest.approx(0.2)

    def test_needs_complexities(self):
        """Test that missing Rademacher values raise."""
        with pytest.raises(ValidationError):
            rademacher_bound_hoeffding(BoundInput((1, 100), MixtureWeights(0.0, (1.0,))))

    def test_bennett_c2_contract(self):
        """Test that c2 outside its interval raises unless explicitly allowed."""
        inp = BoundInput(
            (10, 100),
            MixtureWeights(0.5, (1.0,)),
            rademacher_sources=(0.1,),
            rademacher_target=0.1,
            c2=0.5,
            eta=1.5,
        )
        with pytest.raises(ContractError):
            rademacher_bound_bennett(inp)
        result = rademacher_bound_bennett(inp, allow_out_of_range=True)
        assert not result.preconditions_ok
        assert result.stochastic_term > result.details["complexity_term"]

    def test_bennett_in_range(self):
        """Test a certified evaluation with c2 inside its interval."""
        inp = BoundInput(
            (10, 100),
            MixtureWeights(0.5, (1.0,)),
            rademacher_sources=(0.1,),
            rademacher_target=0.1,
            c2=0.2,
            eta=1.5,
        )
        result = rademacher_bound_bennett(inp)
        assert result.preconditions_ok
        assert result.details["complexity_term"] == pytest.approx(0.2)


class TestAsymptoticCondition:
    """Test the ln UEN times variance-factor trend check."""

    def test_constant_uen_is_bounded(self):
        """Test that a fixed UEN with growing samples stays bounded."""
        growth = [(n, 10 * n, 10 * n) for n in (10, 20, 40, 80)]
        report = asymptotic_condition(growth, [3.0] * 4)
        assert report.bounded
        assert report.ratios[0] == pytest.approx(3.0 / 210)

    def test_fast_growing_uen_is_not_bounded(self):
        """Test that ln UEN growing faster than the sample size is flagged."""
        growth = [(n, 10 * n, 10 * n) for n in (10, 20, 40, 80)]
        report = asymptotic_condition(growth, [float(n * n) for n in (10, 20, 40, 80)])
        assert not report.bounded
        assert report.running_max[-1] == max(report.ratios)

    def test_lengths_must_match(self):
        """Test that one ln UEN value is needed per step."""
        with pytest.raises(DimensionMismatchError):
            asymptotic_condition([(1, 1), (2, 2)], [1.0])
