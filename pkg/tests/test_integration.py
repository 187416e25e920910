"""Integration tests for repda.

These tests check whole workflows and the cross-module identities the
bounds and estimators rely on, on seeded random instances.
"""

import math

import numpy as np
import pytest

from repda.bounds import BoundInput, bennett_tail, eta_fn, gamma_fn, hoeffding_bound
from repda.bounds import optimal_rate_bound
from repda.complexity import (
    WTauL1Norm,
    covering_number_exact,
    greedy_centers,
    is_cover,
    uen_enumerated,
)
from repda.deviation import (
    coverage_check,
    coverage_instance,
    run_deviation_suite,
    run_symmetrization_suite,
)
from repda.divergence import discrepancy_distance, ipm, q_label_metric
from repda.domains import DiscreteDomainSpec, DomainId, MultiSourceBundle, sample_discrete
from repda.experiment import ExperimentConfig, analyze_curve, run_convergence_experiment
from repda.hypotheses import FiniteHypothesisClass, FunctionValueMatrix, LinearHypothesis
from repda.hypotheses import LossFunction, LossKind
from repda.reports import emit_curve, read_curve_csv
from repda.risk import (
    MixtureWeights,
    finite_class_erm,
    lagrange_objective,
    optimal_parameters,
    simplex_grid,
)


def _random_class(rng, size=4) -> FiniteHypothesisClass:
    members = tuple(LinearHypothesis([rng.normal()], rng.normal()) for _ in range(size))
    return FiniteHypothesisClass(members, LossFunction(LossKind.SQUARED, (0.0, 1.0)))


def _random_spec(rng, labels, inputs) -> DiscreteDomainSpec:
    return DiscreteDomainSpec.from_arrays(inputs, labels, tuple(rng.dirichlet(np.ones(3))))


def test_gamma_eta_identities():
    """Test Gamma(x) = -c1 x^eta(c1; x) and the Bernstein-type upper bound on Gamma."""
    for c1 in (0.01, 0.1, 0.4):
        for x in np.linspace(0.01, 0.125, 12):
            assert abs(gamma_fn(x) + c1 * x ** eta_fn(c1, x)) <= 1e-12
    for x in np.linspace(0.01, 4.0, 400):
        assert gamma_fn(x) <= -(x * x) / (2.0 + 2.0 * x / 3.0)


def test_eta_decreasing_in_x():
    """Test that eta(c1; x) falls as x grows on (0, 1/8]."""
    grid = np.linspace(0.005, 0.125, 50)
    for c1 in (0.01, 0.05, 0.1, 0.2, 0.3):
        values = [eta_fn(c1, x) for x in grid]
        assert all(b < a for a, b in zip(values, values[1:]))


def test_ipm_below_discrepancy_plus_q_metric():
    """Test D_F <= disc + Q when the source labels come from a class member."""
    rng = np.random.default_rng(101)
    for _ in range(100):
        hclass = _random_class(rng)
        inputs = rng.uniform(-1.0, 1.0, size=(3, 1))
        g_source = hclass.members[int(rng.integers(hclass.size))]
        g_target = LinearHypothesis([rng.normal()], rng.normal())
        source = _random_spec(rng, g_source.predict_many(inputs), inputs)
        target = _random_spec(rng, g_target.predict_many(inputs), inputs)
        lhs = ipm(hclass, source, target).value
        rhs = discrepancy_distance(hclass, source, target).value
        rhs += q_label_metric(hclass, target, g_source, g_target).value
        assert lhs <= rhs + 1e-10


def test_matched_distributions_have_zero_divergence():
    """Test D_F = disc = 0 for identical distributions."""
    rng = np.random.default_rng(102)
    for _ in range(20):
        hclass = _random_class(rng)
        inputs = rng.uniform(-1.0, 1.0, size=(3, 1))
        spec = _random_spec(rng, rng.normal(size=3), inputs)
        assert ipm(hclass, spec, spec).value == 0.0
        assert discrepancy_distance(hclass, spec, spec).value == 0.0


def test_optimal_weights_match_grid_search():
    """Test that the closed-form weights are within one grid step of the grid minimum."""
    rng = np.random.default_rng(103)
    grids = {K: simplex_grid(K, 0.01) for K in (2, 3)}
    for _ in range(20):
        K = int(rng.integers(2, 4))
        sizes = tuple(int(n) for n in rng.integers(1, 7, size=K + 1))
        values = [lagrange_objective(w, sizes) for w in grids[K]]
        best = grids[K][int(np.argmin(values))]
        np.testing.assert_allclose(best, optimal_parameters(sizes).w, atol=0.0101)


def test_greedy_covers_against_exact():
    """Test greedy validity and exact <= greedy on random small classes."""
    rng = np.random.default_rng(104)
    norm = WTauL1Norm.for_sizes((2, 2, 2), MixtureWeights(0.3, (0.4, 0.6)))
    for _ in range(200):
        values = rng.uniform(size=(int(rng.integers(1, 9)), norm.n_columns))
        matrix = FunctionValueMatrix(values, ("x",) * norm.n_columns)
        radius = float(rng.uniform(0.02, 0.3))
        distances = norm.distances(values)
        centers = greedy_centers(distances, radius)
        assert is_cover(distances, centers, radius)
        assert covering_number_exact(matrix, radius, norm).value <= len(centers)


def test_bound_forms_agree():
    """Test optimal-rate = Hoeffding at the optimal weights and log = direct tails."""
    rng = np.random.default_rng(105)
    for _ in range(50):
        sizes = tuple(int(n) for n in rng.integers(1, 500, size=int(rng.integers(2, 5))))
        inp = BoundInput(
            sizes,
            optimal_parameters(sizes),
            divergence=float(rng.uniform(0, 0.5)),
            ln_uen=float(rng.uniform(0, 5)),
        )
        general, optimal = hoeffding_bound(inp), optimal_rate_bound(inp)
        assert optimal.value == pytest.approx(general.value, rel=1e-12, abs=1e-15)
        xi = float(rng.uniform(0.05, 1.0))
        log_form, direct = bennett_tail(inp, xi, "log"), bennett_tail(inp, xi, "direct")
        if 1e-300 < log_form.raw < 1e300:
            assert direct.raw == pytest.approx(log_form.raw, rel=1e-10)


def test_discrete_erm_workflow(absolute_class, coin_domains):
    """Test sampling a bundle, fitting by enumeration and bounding its deviation."""
    target, source1, source2 = coin_domains
    bundle = MultiSourceBundle(
        (
            sample_discrete(source1, 6, seed=2, domain_id=DomainId.source(1)),
            sample_discrete(source2, 6, seed=2, domain_id=DomainId.source(2)),
        ),
        sample_discrete(target, 3, seed=2),
    )
    weights = optimal_parameters(bundle.sizes)
    result = finite_class_erm(absolute_class, bundle, weights)
    assert 0 <= result.index < absolute_class.size

    ln_uen = uen_enumerated(
        absolute_class, target, (source1, source2), (1, 1, 1), optimal_parameters((1, 1, 1)), 0.05
    ).value
    inp = BoundInput(bundle.sizes, weights, ln_uen=ln_uen)
    assert hoeffding_bound(inp).value > 0


def test_curve_round_trip_analysis(tmp_path):
    """Test running, writing, reading back and analyzing a small curve."""
    config = ExperimentConfig(
        dims=3,
        n_target=60,
        n_target_fit=10,
        source_start=10,
        source_max=40,
        step=10,
        repeats=4,
        w_grid=(0.25, 0.5),
        tau_grid=(0.025, 0.8),
        seed=11,
    )
    curve = run_convergence_experiment(config, threads=2)
    emit_curve(curve, tmp_path)
    loaded = read_curve_csv(tmp_path / "curve.csv", config.n_target_fit)
    assert loaded.rows == curve.rows
    findings = analyze_curve(loaded)
    assert findings.optimal_tau == 0.025
    assert set(findings.tau_ranking) == {0.25, 0.5}


@pytest.mark.slow
def test_desk_experiment(tmp_path):
    """Test the desk preset end to end, including all four qualitative flags."""
    config = ExperimentConfig.desk()
    assert config.beta_mode == "shared"
    curve = run_convergence_experiment(config, threads=4)
    assert curve.is_complete()
    assert len(curve.rows) == 4 * 4 * 4
    assert all(np.isfinite(r.mean_discrepancy) for r in curve.rows)
    findings = analyze_curve(curve)
    assert findings.optimal_tau == 0.025
    assert findings.balanced_w == 0.5
    assert findings.flags == {
        "tau_small_decreasing": True,
        "large_tau_fails": True,
        "optimal_tau_best": True,
        "balanced_w_best": True,
    }
    paths = emit_curve(curve, tmp_path)
    assert len(paths) == 2 + 4 + 4


@pytest.mark.slow
def test_deviation_inequalities_hold():
    """Test every deviation inequality on ten instances with 10^4 trials each."""
    reports = run_deviation_suite(instances=10, trials=10_000, seed=0)
    failed = [(r.kind, r.details["instance"]) for r in reports if not r.passed]
    assert not failed


@pytest.mark.slow
def test_symmetrization_holds():
    """Test the symmetrization inequality on five instances at thresholds meeting the condition."""
    reports = run_symmetrization_suite(instances=5, trials=10_000, seed=0)
    assert len(reports) == 5
    for report in reports:
        assert report.passed
        assert len(report.checked) == len(report.rows) == 8
    # The ghost side must be exercised somewhere, not only the trivially empty tails.
    assert any(row.reference > 0 for report in reports for row in report.checked)


@pytest.mark.slow
def test_bound_coverage():
    """Test that a bound below the loss range is exceeded at most at the confidence level."""
    for index in range(3):
        hclass, domains, sizes = coverage_instance(seed=106, index=index)
        report = coverage_check(
            hclass, domains, sizes, optimal_parameters(sizes), 0.05, 10_000, seed=index
        )
        low, high = report.details["loss_range"]
        row = report.rows[0]
        assert report.passed
        assert 0 < row.xi < high - low
        assert report.details["ln_uen"] <= math.log(hclass.size)
