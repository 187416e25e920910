from .cli import main as main, run as run
from .domains import (
    DomainId as DomainId,
    DomainDataset as DomainDataset,
    MultiSourceBundle as MultiSourceBundle,
    DiscreteDomainSpec as DiscreteDomainSpec,
    GaussianDomainSpec as GaussianDomainSpec,
    synthesize_domain as synthesize_domain,
    sample_discrete as sample_discrete,
)
from .hypotheses import (
    LinearHypothesis as LinearHypothesis,
    LossFunction as LossFunction,
    FiniteHypothesisClass as FiniteHypothesisClass,
    evaluate_class as evaluate_class,
)
from .risk import (
    MixtureWeights as MixtureWeights,
    combined_risk as combined_risk,
    optimal_parameters as optimal_parameters,
    solve_weighted_least_squares as solve_weighted_least_squares,
    expected_risk as expected_risk,
    finite_class_erm as finite_class_erm,
    excess_risk_sandwich as excess_risk_sandwich,
)
from .divergence import (
    ipm as ipm,
    weighted_ipm as weighted_ipm,
    discrepancy_distance as discrepancy_distance,
    h_delta_h as h_delta_h,
)
from .complexity import (
    uen_estimate as uen_estimate,
    uen_enumerated as uen_enumerated,
    rademacher_empirical as rademacher_empirical,
    rademacher_expected as rademacher_expected,
)
from .bounds import (
    BoundInput as BoundInput,
    hoeffding_bound as hoeffding_bound,
    bernstein_bound as bernstein_bound,
    alt_bennett_bound as alt_bennett_bound,
    rademacher_bound_hoeffding as rademacher_bound_hoeffding,
    rademacher_bound_bennett as rademacher_bound_bennett,
)
from .deviation import (
    run_deviation_suite as run_deviation_suite,
    run_symmetrization_suite as run_symmetrization_suite,
)
from .experiment import (
    ExperimentConfig as ExperimentConfig,
    run_convergence_experiment as run_convergence_experiment,
    analyze_curve as analyze_curve,
)
from .reports import emit_report as emit_report

__version__ = "0.1.0"

__all__ = [
    "main",
    "run",
    "DomainId",
    "DomainDataset",
    "MultiSourceBundle",
    "DiscreteDomainSpec",
    "GaussianDomainSpec",
    "synthesize_domain",
    "sample_discrete",
    "LinearHypothesis",
    "LossFunction",
    "FiniteHypothesisClass",
    "evaluate_class",
    "MixtureWeights",
    "combined_risk",
    "optimal_parameters",
    "solve_weighted_least_squares",
    "expected_risk",
    "finite_class_erm",
    "excess_risk_sandwich",
    "ipm",
    "weighted_ipm",
    "discrepancy_distance",
    "h_delta_h",
    "uen_estimate",
    "uen_enumerated",
    "rademacher_empirical",
    "rademacher_expected",
    "BoundInput",
    "hoeffding_bound",
    "bernstein_bound",
    "alt_bennett_bound",
    "rademacher_bound_hoeffding",
    "rademacher_bound_bennett",
    "run_deviation_suite",
    "run_symmetrization_suite",
    "ExperimentConfig",
    "run_convergence_experiment",
    "analyze_curve",
    "emit_report",
]
