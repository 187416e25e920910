"""Monte Carlo validation of the multi-domain deviation inequalities.

Each experiment draws fresh samples from discrete domains (target first, then
sources 1..K), computes a statistic, and compares its empirical tail frequency
against a closed-form bound with a Wilson 99% interval.

The scaled statistic F = tau P sum_T f + (1 - tau) N_T sum_k w_k P_{-k} sum_k f,
with P the product of the source sizes and P_{-k} the same product without N_k,
grows like N_T P. Instances are therefore capped at K <= 3 sources and
N <= 8 samples per domain, and every bound is evaluated in log space. The sup
deviation works on averages and only keeps the source cap.
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from .bounds import BoundInput, BoundResult, gamma_fn, hoeffding_bound
from .complexity import uen_enumerated
from .divergence import class_expectations, weighted_ipm
from .domains import DiscreteDomainSpec
from .errors import CapacityError, DimensionMismatchError, ValidationError
from .hypotheses import FiniteHypothesisClass, LossFunction, LossKind
from .risk import MixtureWeights, optimal_parameters, split_sizes
from .utils import CHUNK_STREAM, GHOST_STREAM, INSTANCE_STREAM, child_rng, chunk_sizes, parallel_map

logger = logging.getLogger(__name__)

MAX_SOURCES = 3
MAX_SAMPLES = 8
MIN_TRIALS = 100
TRIAL_CHUNK = 1000
JOINT_ENUMERATION_LIMIT = 200_000
# Deviations within this relative distance of a threshold count as exceeding it.
TIE_TOLERANCE = 1e-12
EQUAL_C_TOLERANCE = 1e-12
WILSON_LEVEL = 0.99
SYMMETRIZATION_LIMIT = 0.125

TAIL_CSV_FIELDS = ("xi", "empirical_p", "wilson99", "bound", "pass")


class TailStatistic(str, Enum):
    F_STATISTIC = "f_statistic"
    SUP_DEVIATION = "sup_deviation"
    CUSTOM_BOUNDED_DIFFERENCE = "custom_bounded_difference"


# Atom indices per domain, each of shape (trials, N_d) -> one value per trial.
CustomStatistic = Callable[[Tuple[np.ndarray, ...]], np.ndarray]


def wilson_interval(
    successes: int, trials: int, level: float = WILSON_LEVEL
) -> Tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValidationError(f"Wilson interval needs trials >= 1, got {trials}")
    if not 0 <= successes <= trials:
        raise ValidationError(f"successes must lie in [0, {trials}], got {successes}")
    if not 0.0 < level < 1.0:
        raise ValidationError(f"level must lie in (0, 1), got {level}")
    z = float(norm.ppf(1.0 - (1.0 - level) / 2.0))
    p = successes / trials
    z2n = z * z / trials
    center = (p + z2n / 2.0) / (1.0 + z2n)
    half = z / (1.0 + z2n) * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials))
    return max(0.0, center - half), min(1.0, center + half)


def _products(n_sources: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
    """P = prod N_k and P_{-k} for every k (an empty product is 1)."""
    total = math.prod(n_sources)
    others = tuple(
        math.prod(n for i, n in enumerate(n_sources) if i != k) for k in range(len(n_sources))
    )
    return total, others


def _coefficients(sizes: Sequence[int], weights: MixtureWeights) -> Tuple[float, ...]:
    """Per-sample multipliers (tau P, (1 - tau) N_T w_k P_{-k}) of the scaled statistic."""
    n_target, n_sources = split_sizes(sizes)
    weights.check_sources(len(n_sources))
    total, others = _products(n_sources)
    sources = (
        (1.0 - weights.tau) * n_target * w_k * p_k for w_k, p_k in zip(weights.w, others)
    )
    return (weights.tau * total, *sources)


def f_statistic(values: Sequence[Sequence[float]], weights: MixtureWeights) -> float:
    """The scaled statistic F on one sample set; ``values[d]`` holds f on domain d's samples."""
    if len(values) < 2:
        raise DimensionMismatchError("Need values for the target and at least one source")
    sums = [math.fsum(np.asarray(v, dtype=float).reshape(-1)) for v in values]
    sizes = [len(np.asarray(v).reshape(-1)) for v in values]
    if any(n < 1 for n in sizes):
        raise DimensionMismatchError(f"Every domain needs samples, got sizes {sizes}")
    coefficients = _coefficients(sizes, weights)
    return math.fsum(c * s for c, s in zip(coefficients, sums))


def normalized_f_statistic(values: Sequence[Sequence[float]], weights: MixtureWeights) -> float:
    """F / (N_T P), which equals the combined empirical average E^tau_w f."""
    sizes = [len(np.asarray(v).reshape(-1)) for v in values]
    n_target, n_sources = split_sizes(sizes)
    return f_statistic(values, weights) / (n_target * math.prod(n_sources))


def f_expectation(
    means: Sequence[float], sizes: Sequence[int], weights: MixtureWeights
) -> float:
    """E F by linearity from the per-domain means of f."""
    if len(means) != len(sizes):
        raise DimensionMismatchError(f"{len(means)} means for {len(sizes)} domains")
    coefficients = _coefficients(sizes, weights)
    return math.fsum(c * n * m for c, n, m in zip(coefficients, sizes, means))


def f_statistic_c_table(
    sizes: Sequence[int], weights: MixtureWeights, value_range: Tuple[float, float] = (0.0, 1.0)
) -> Tuple[np.ndarray, ...]:
    """Bounded differences of F for every sample of every domain.

    Domains with zero weight never move F and are left out of the table.
    """
    span = _span(value_range)
    coefficients = _coefficients(sizes, weights)
    return tuple(np.full(n, c * span) for c, n in zip(coefficients, sizes) if c > 0)


def _span(value_range: Tuple[float, float]) -> float:
    a, b = (float(v) for v in value_range)
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        raise ValidationError(f"Value range needs finite a < b, got [{a}, {b}]")
    return b - a


def _check_xi(xi: float):
    if not (math.isfinite(xi) and xi > 0):
        raise ValidationError(f"xi must be > 0, got {xi}")


def hoeffding_dev_bound(
    sizes: Sequence[int],
    weights: MixtureWeights,
    value_range: Tuple[float, float],
    xi: float,
) -> float:
    """Two-sided Hoeffding bound on Pr{|F - E F| > xi}, unclamped."""
    _check_xi(xi)
    span = _span(value_range)
    n_target, n_sources = split_sizes(sizes)
    weights.check_sources(len(n_sources))
    total, others = _products(n_sources)
    inner = weights.tau**2 * total + math.fsum(
        (1.0 - weights.tau) ** 2 * n_target * w_k**2 * p_k for w_k, p_k in zip(weights.w, others)
    )
    log_denominator = math.log(n_target) + 2.0 * math.log(span) + math.log(total) + math.log(inner)
    return math.exp(math.log(2.0) - 2.0 * xi * xi * math.exp(-log_denominator))


def hoeffding_dev_bound_normalized(
    sizes: Sequence[int],
    weights: MixtureWeights,
    value_range: Tuple[float, float],
    xi: float,
) -> float:
    """The same bound for the deviation of F / (N_T P), i.e. of E^tau_w f.

    A derived convenience: it rescales ``xi`` by N_T P and defers to the
    unnormalized form.
    """
    n_target, n_sources = split_sizes(sizes)
    return hoeffding_dev_bound(sizes, weights, value_range, xi * n_target * math.prod(n_sources))


def bennett_dev_bound(sizes: Sequence[int], value_range: Tuple[float, float], xi: float) -> float:
    """2 exp((N_T + sum N) Gamma(xi / (N_T P (b - a)))) at the optimal weights, unclamped."""
    _check_xi(xi)
    span = _span(value_range)
    n_target, n_sources = split_sizes(sizes)
    total_samples = n_target + sum(n_sources)
    scale = n_target * math.prod(n_sources) * span
    return 2.0 * math.exp(total_samples * gamma_fn(xi / scale))


@dataclass(frozen=True)
class McDiarmidBound:
    """One-sided bounds on Pr{F - E F >= xi}; ``bennett`` is set only for equal c."""

    quadratic: float
    bennett: Optional[float]
    n_variables: int
    equal_c: bool


def mcdiarmid_bound(c_table: Sequence[Sequence[float]], xi: float) -> McDiarmidBound:
    """exp(-2 xi^2 / sum c^2), plus exp(n Gamma(xi / (c n))) when every c is the same."""
    if not xi >= 0 or not math.isfinite(xi):
        raise ValidationError(f"xi must be >= 0, got {xi}")
    flat = np.concatenate([np.asarray(c, dtype=float).reshape(-1) for c in c_table])
    if flat.size == 0:
        raise ValidationError("The bounded-difference table is empty")
    if not np.all(np.isfinite(flat)) or np.any(flat <= 0):
        raise ValidationError("Every bounded difference c must be finite and > 0")
    quadratic = math.exp(-2.0 * xi * xi / math.fsum(flat * flat))
    c = float(flat[0])
    equal = bool(np.all(np.abs(flat - c) <= EQUAL_C_TOLERANCE * max(1.0, c)))
    bennett = None
    if equal:
        n = int(flat.size)
        bennett = math.exp(n * gamma_fn(xi / (c * n)))
    return McDiarmidBound(quadratic, bennett, int(flat.size), equal)


def symmetrization_condition(
    sizes: Sequence[int], weights: MixtureWeights, span: float, xi_prime: float
) -> Tuple[float, bool]:
    """(b - a)^2 (tau^2 / N_T + sum (1 - tau)^2 w_k^2 / N_k) / xi'^2 and whether it is <= 1/8."""
    if not xi_prime > 0:
        raise ValidationError(f"xi' must be > 0, got {xi_prime}")
    value = span * span * weights.variance_factor(sizes) / (xi_prime * xi_prime)
    return value, value <= SYMMETRIZATION_LIMIT


@dataclass(frozen=True)
class TailRow:
    """One threshold of a tail report.

    ``status`` is ``ok``, ``skipped`` (threshold below the validity range) or
    ``condition_violated``; ``certified`` means the Wilson upper limit itself
    is within the bound.
    """

    xi: float
    exceedances: int
    trials: int
    empirical_p: float
    wilson_lower: float
    wilson_upper: float
    bound: float
    passed: bool
    certified: bool
    status: str = "ok"
    reference: Optional[float] = None

    def csv_row(self) -> List[str]:
        verdict = "skipped" if self.status != "ok" else ("true" if self.passed else "false")
        fields = (self.xi, self.empirical_p, self.wilson_upper, self.bound)
        return [*(repr(v) for v in fields), verdict]

    def to_dict(self) -> dict:
        return {
            "xi": self.xi,
            "exceedances": self.exceedances,
            "trials": self.trials,
            "empirical_p": self.empirical_p,
            "wilson_lower": self.wilson_lower,
            "wilson99": self.wilson_upper,
            "bound": self.bound,
            "pass": self.passed,
            "certified": self.certified,
            "status": self.status,
            "reference": self.reference,
        }


@dataclass(frozen=True)
class TailReport:
    kind: str
    rows: Tuple[TailRow, ...]
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def checked(self) -> Tuple[TailRow, ...]:
        return tuple(row for row in self.rows if row.status == "ok")

    @property
    def passed(self) -> bool:
        """Every checked row holds, and at least one row was checked."""
        checked = self.checked
        return bool(checked) and all(row.passed for row in checked)

    @property
    def status(self) -> str:
        if self.rows and not self.checked:
            return "condition_violated"
        return "passed" if self.passed else "failed"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "status": self.status,
            "rows": [row.to_dict() for row in self.rows],
            **self.details,
        }


def _row(
    xi: float,
    exceedances: int,
    trials: int,
    bound: float,
    status: str = "ok",
    reference: Optional[float] = None,
) -> TailRow:
    lower, upper = wilson_interval(exceedances, trials)
    empirical = exceedances / trials
    bound = min(1.0, max(0.0, bound))
    certified = upper <= bound
    return TailRow(
        xi,
        exceedances,
        trials,
        empirical,
        lower,
        upper,
        bound,
        certified or empirical <= bound,
        certified,
        status,
        reference,
    )


def _exceeds(deviations: np.ndarray, level: float) -> int:
    return int(np.count_nonzero(deviations >= level * (1.0 - TIE_TOLERANCE)))


def _check_caps(
    domains: Sequence[DiscreteDomainSpec], sizes: Sequence[int], scaled: bool = True
):
    n_target, n_sources = split_sizes(sizes)
    if len(domains) != len(n_sources) + 1:
        raise DimensionMismatchError(f"{len(domains)} domains for {len(sizes)} sizes")
    if len(n_sources) > MAX_SOURCES:
        raise CapacityError("A deviation experiment", len(n_sources), MAX_SOURCES, "sources")
    largest = max(n_target, *n_sources)
    if scaled and largest > MAX_SAMPLES:
        raise CapacityError("A deviation experiment", largest, MAX_SAMPLES, "samples per domain")
    if min(n_target, *n_sources) < 1:
        raise ValidationError(f"Every domain needs >= 1 sample, got {tuple(sizes)}")


def _check_thresholds(thresholds: Sequence[float]) -> Tuple[float, ...]:
    thresholds = tuple(float(t) for t in thresholds)
    if not thresholds:
        raise ValidationError("Need at least one threshold")
    if any(not (math.isfinite(t) and t > 0) for t in thresholds):
        raise ValidationError("Thresholds must be finite and > 0")
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValidationError("Thresholds must be sorted ascending")
    return thresholds


def _atom_counts(indices: np.ndarray, n_atoms: int) -> np.ndarray:
    """(trials, n_atoms) occurrence counts from (trials, N) atom indices."""
    return np.stack([np.count_nonzero(indices == a, axis=1) for a in range(n_atoms)], axis=1)


@dataclass(frozen=True, eq=False)
class TailExperiment:
    """A seeded tail-frequency experiment on discrete domains (target first).

    ``atom_values[d]`` tabulates f on the atoms of domain d for the F statistic.
    The sup deviation needs ``hclass``; a custom statistic needs ``custom`` and
    optionally its exact ``expectation`` (enumerated jointly when omitted).
    """

    statistic: TailStatistic
    domains: Tuple[DiscreteDomainSpec, ...]
    sizes: Tuple[int, ...]
    weights: MixtureWeights
    thresholds: Tuple[float, ...]
    trials: int
    seed: int
    atom_values: Optional[Tuple[np.ndarray, ...]] = None
    value_range: Tuple[float, float] = (0.0, 1.0)
    one_sided: bool = False
    hclass: Optional[FiniteHypothesisClass] = None
    custom: Optional[CustomStatistic] = None
    expectation: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "statistic", TailStatistic(self.statistic))
        object.__setattr__(self, "domains", tuple(self.domains))
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        scaled = self.statistic is not TailStatistic.SUP_DEVIATION
        _check_caps(self.domains, self.sizes, scaled)
        self.weights.check_sources(len(self.sizes) - 1)
        object.__setattr__(self, "thresholds", _check_thresholds(self.thresholds))
        if self.trials < MIN_TRIALS:
            raise ValidationError(f"Need at least {MIN_TRIALS} trials, got {self.trials}")
        a, b = self.value_range
        _span(self.value_range)

        if self.statistic is TailStatistic.F_STATISTIC:
            if self.atom_values is None:
                raise ValidationError("The F statistic needs atom values for every domain")
            values = tuple(np.asarray(v, dtype=float).reshape(-1) for v in self.atom_values)
            if len(values) != len(self.domains):
                raise DimensionMismatchError(
                    f"{len(values)} value tables for {len(self.domains)} domains"
                )
            for d, (spec, v) in enumerate(zip(self.domains, values)):
                if v.size != spec.n_atoms:
                    raise DimensionMismatchError(
                        f"Domain {d}: {v.size} values for {spec.n_atoms} atoms"
                    )
                if np.any(v < a) or np.any(v > b):
                    raise ValidationError(f"Domain {d}: atom values fall outside [{a}, {b}]")
            object.__setattr__(self, "atom_values", values)
        elif self.statistic is TailStatistic.SUP_DEVIATION:
            if self.hclass is None:
                raise ValidationError("The sup deviation needs a hypothesis class")
            if self.one_sided:
                raise ValidationError("The sup deviation is absolute; one_sided does not apply")
        elif self.custom is None:
            raise ValidationError("A custom statistic needs a callable")

    def draw(
        self, chunk: int, size: int, stream: int = CHUNK_STREAM, slot: int = 0
    ) -> Tuple[np.ndarray, ...]:
        """Atom indices (size, N_d) per domain for one trial chunk."""
        rng = child_rng(self.seed, stream, chunk, slot)
        return tuple(spec.draw_indices(rng, (size, n)) for spec, n in zip(self.domains, self.sizes))


def _custom_expectation(experiment: TailExperiment) -> float:
    """E of a custom statistic by enumerating every joint sample set."""
    required = math.prod(spec.n_atoms**n for spec, n in zip(experiment.domains, experiment.sizes))
    if required > JOINT_ENUMERATION_LIMIT:
        raise CapacityError("Joint sample enumeration", required, JOINT_ENUMERATION_LIMIT)
    tables, probs = [], []
    for spec, n in zip(experiment.domains, experiment.sizes):
        table = np.array(list(itertools.product(range(spec.n_atoms), repeat=n)), dtype=int)
        tables.append(table)
        probs.append(np.prod(spec.probabilities[table], axis=1))
    grid = np.meshgrid(*(np.arange(len(t)) for t in tables), indexing="ij")
    rows = [g.reshape(-1) for g in grid]
    draws = tuple(t[r] for t, r in zip(tables, rows))
    weight = np.prod([p[r] for p, r in zip(probs, rows)], axis=0)
    values = np.asarray(experiment.custom(draws), dtype=float)  # type: ignore[misc]
    return math.fsum(weight * values)


class _SupDeviation:
    """sup_f |E_T f - E^tau_w f| per trial, with exact target means."""

    def __init__(
        self,
        hclass: FiniteHypothesisClass,
        domains: Sequence[DiscreteDomainSpec],
        sizes: Sequence[int],
        weights: MixtureWeights,
    ):
        self.tables = [hclass.loss_values(spec.inputs, spec.labels) for spec in domains]
        self.n_atoms = [spec.n_atoms for spec in domains]
        self.sizes = tuple(sizes)
        self.coefficients = (weights.tau, *((1.0 - weights.tau) * w_k for w_k in weights.w))
        self.target_means = class_expectations(hclass, domains[0])

    def combined(self, draws: Sequence[np.ndarray]) -> np.ndarray:
        """(trials, |F|) combined empirical averages."""
        total = 0.0
        parts = zip(self.coefficients, self.tables, self.n_atoms, self.sizes, draws)
        for c, table, n_atoms, n, idx in parts:
            if c > 0:
                total = total + c * (_atom_counts(idx, n_atoms) @ table.T) / n
        return np.asarray(total, dtype=float)

    def __call__(self, draws: Sequence[np.ndarray]) -> np.ndarray:
        return np.abs(self.combined(draws) - self.target_means[None, :]).max(axis=1)


def _deviation_fn(experiment: TailExperiment) -> Callable[[Tuple[np.ndarray, ...]], np.ndarray]:
    if experiment.statistic is TailStatistic.SUP_DEVIATION:
        return _SupDeviation(
            experiment.hclass, experiment.domains, experiment.sizes, experiment.weights
        )

    if experiment.statistic is TailStatistic.F_STATISTIC:
        coefficients = _coefficients(experiment.sizes, experiment.weights)
        means = [
            math.fsum(p * v for p, v in zip(spec.probabilities, values))
            for spec, values in zip(experiment.domains, experiment.atom_values)
        ]
        center = f_expectation(means, experiment.sizes, experiment.weights)

        def statistic(draws: Tuple[np.ndarray, ...]) -> np.ndarray:
            sums = [values[idx].sum(axis=1) for values, idx in zip(experiment.atom_values, draws)]
            return sum(c * s for c, s in zip(coefficients, sums))

    else:
        center = experiment.expectation
        if center is None:
            center = _custom_expectation(experiment)
        statistic = experiment.custom  # type: ignore[assignment]

    def deviation(draws: Tuple[np.ndarray, ...]) -> np.ndarray:
        shifted = np.asarray(statistic(draws), dtype=float) - center
        return shifted if experiment.one_sided else np.abs(shifted)

    return deviation


def _run_chunks(
    experiment: TailExperiment,
    fn: Callable[[Tuple[np.ndarray, ...]], np.ndarray],
    threads: int,
    stream: int = CHUNK_STREAM,
) -> np.ndarray:
    chunks = list(enumerate(chunk_sizes(experiment.trials, TRIAL_CHUNK)))
    parts = parallel_map(
        lambda item: fn(experiment.draw(item[0], item[1], stream)), chunks, threads
    )
    return np.concatenate(parts)


def mc_tail_estimate(
    experiment: TailExperiment, bound_fn: Callable[[float], float], threads: int = 1
) -> TailReport:
    """Empirical Pr{deviation >= xi} for every threshold against ``bound_fn(xi)``.

    Trials run in fixed chunks on child streams of the experiment seed, so the
    exceedance counts do not depend on ``threads``.
    """
    deviations = _run_chunks(experiment, _deviation_fn(experiment), threads)
    rows = tuple(
        _row(xi, _exceeds(deviations, xi), experiment.trials, bound_fn(xi))
        for xi in experiment.thresholds
    )
    report = TailReport(
        experiment.statistic.value,
        rows,
        {
            "sizes": list(experiment.sizes),
            "weights": experiment.weights.to_dict(),
            "trials": experiment.trials,
            "seed": experiment.seed,
            "one_sided": experiment.one_sided,
        },
    )
    logger.debug("%s tail estimate: %s", experiment.statistic.value, report.status)
    return report


def loss_span(
    hclass: FiniteHypothesisClass, domains: Sequence[DiscreteDomainSpec]
) -> Tuple[float, float]:
    """Smallest [a, b] holding every loss value of the class on the domain atoms."""
    values = np.concatenate([hclass.loss_values(s.inputs, s.labels).reshape(-1) for s in domains])
    low, high = float(values.min()), float(values.max())
    return (low, high) if high > low else (low, low + 1.0)


def symmetrization_check(
    hclass: FiniteHypothesisClass,
    domains: Sequence[DiscreteDomainSpec],
    sizes: Sequence[int],
    weights: MixtureWeights,
    thresholds: Sequence[float],
    trials: int,
    seed: int,
    threads: int = 1,
) -> TailReport:
    """Pr{sup |E_T f - E^tau_w f| > xi} against 2 Pr{sup |E'^tau_w f - E^tau_w f| > xi'/2}.

    xi' = xi - (1 - tau) D^(w) and (b - a) is the range of the loss values on
    the atoms. The left side uses exact target means; the right side pairs
    each draw with an independent ghost draw. Thresholds with xi' <= 0 or
    outside the size condition are reported but never counted as passes.
    """
    domains = tuple(domains)
    experiment = TailExperiment(
        TailStatistic.SUP_DEVIATION,
        domains,
        tuple(sizes),
        weights,
        thresholds,
        trials,
        seed,
        hclass=hclass,
    )
    a, b = loss_span(hclass, domains)
    span = b - a
    divergence = weighted_ipm(hclass, domains[1:], domains[0], weights).value
    sup = _SupDeviation(hclass, domains, experiment.sizes, weights)

    lhs = _run_chunks(experiment, sup, threads)

    def ghost_gap(item: Tuple[int, int]) -> np.ndarray:
        chunk, size = item
        first = experiment.draw(chunk, size, GHOST_STREAM, 0)
        second = experiment.draw(chunk, size, GHOST_STREAM, 1)
        return np.abs(sup.combined(first) - sup.combined(second)).max(axis=1)

    chunks = list(enumerate(chunk_sizes(trials, TRIAL_CHUNK)))
    rhs = np.concatenate(parallel_map(ghost_gap, chunks, threads))

    rows = []
    for xi in experiment.thresholds:
        xi_prime = xi - (1.0 - weights.tau) * divergence
        left = _exceeds(lhs, xi)
        if xi_prime <= 0:
            rows.append(_skipped_row(xi, left, trials, "skipped"))
            continue
        condition, ok = symmetrization_condition(experiment.sizes, weights, span, xi_prime)
        if not ok:
            rows.append(_skipped_row(xi, left, trials, "condition_violated", condition))
            continue
        rows.append(symmetrization_row(xi, left, _exceeds(rhs, xi_prime / 2.0), trials))
    report = TailReport(
        "symmetrization",
        tuple(rows),
        {
            "sizes": list(experiment.sizes),
            "weights": weights.to_dict(),
            "divergence": divergence,
            "loss_range": [a, b],
            "trials": trials,
            "seed": seed,
        },
    )
    logger.debug("symmetrization check: %s (D^(w) = %.4g)", report.status, divergence)
    return report


def symmetrization_row(xi: float, left: int, right: int, trials: int) -> TailRow:
    """Verdict of one threshold from the left and right exceedance counts.

    The row passes when the left Wilson lower limit is within twice the right
    Wilson upper limit; ``reference`` is twice the right frequency.
    """
    lower, upper = wilson_interval(left, trials)
    bound = min(1.0, 2.0 * wilson_interval(right, trials)[1])
    return TailRow(
        xi,
        left,
        trials,
        left / trials,
        lower,
        upper,
        bound,
        passed=lower <= bound,
        certified=upper <= bound,
        reference=min(1.0, 2.0 * right / trials),
    )


def _skipped_row(
    xi: float, left: int, trials: int, status: str, reference: Optional[float] = None
) -> TailRow:
    lower, upper = wilson_interval(left, trials)
    return TailRow(
        xi, left, trials, left / trials, lower, upper, 1.0, False, False, status, reference
    )


def coverage_check(
    hclass: FiniteHypothesisClass,
    domains: Sequence[DiscreteDomainSpec],
    sizes: Sequence[int],
    weights: MixtureWeights,
    confidence: float,
    trials: int,
    seed: int,
    threads: int = 1,
) -> TailReport:
    """How often the uniform deviation exceeds the Hoeffding-type generalization bound.

    ln UEN is enumerated at radius xi'/8, xi' being the bound's own stochastic
    term. Starting from ln |F|, which holds at every radius, the term is
    lowered while the UEN at its radius stays at or below the ln UEN it was
    computed from, so the reported bound always holds at level ``confidence``.

    The single row reports the bound value as ``xi`` and ``confidence`` as the
    bound on the frequency. It passes when the Wilson lower limit is at most
    ``confidence``.
    """
    domains = tuple(domains)
    sizes = tuple(int(n) for n in sizes)
    value_range = loss_span(hclass, domains)
    divergence = weighted_ipm(hclass, domains[1:], domains[0], weights).value

    def bound(ln_uen: float, radius: Optional[float]) -> BoundResult:
        inp = BoundInput(
            sizes,
            weights,
            confidence=confidence,
            value_range=value_range,
            divergence=divergence,
            ln_uen=ln_uen,
            uen_radius=radius,
        )
        return hoeffding_bound(inp)

    ln_uen = math.log(hclass.size)
    result = bound(ln_uen, None)
    supported = (ln_uen, result)
    steps = 0
    while True:
        radius = result.stochastic_term / 8.0
        at_radius = uen_enumerated(hclass, domains[0], domains[1:], sizes, weights, radius).value
        steps += 1
        if at_radius > ln_uen + TIE_TOLERANCE:
            # the last step is not supported at its own radius
            ln_uen, result = supported
            break
        supported = (ln_uen, bound(ln_uen, radius))
        if at_radius >= ln_uen - TIE_TOLERANCE:
            result = supported[1]
            break
        ln_uen, result = at_radius, bound(at_radius, None)

    experiment = TailExperiment(
        TailStatistic.SUP_DEVIATION,
        domains,
        sizes,
        weights,
        (max(result.value, TIE_TOLERANCE),),
        trials,
        seed,
        hclass=hclass,
    )
    deviations = _run_chunks(experiment, _deviation_fn(experiment), threads)
    hits = _exceeds(deviations, result.value)
    lower, upper = wilson_interval(hits, trials)
    row = TailRow(
        result.value,
        hits,
        trials,
        hits / trials,
        lower,
        upper,
        confidence,
        passed=lower <= confidence,
        certified=upper <= confidence,
    )
    return TailReport(
        "coverage",
        (row,),
        {
            "bound": result.to_dict(),
            "ln_uen": ln_uen,
            "uen_steps": steps,
            "divergence": divergence,
            "loss_range": list(value_range),
            "sizes": list(sizes),
            "trials": trials,
            "seed": seed,
        },
    )


def _two_atom_domain(rng: np.random.Generator) -> DiscreteDomainSpec:
    p = float(rng.uniform(0.1, 0.9))
    return DiscreteDomainSpec.from_arrays(
        rng.uniform(-1.0, 1.0, size=(2, 1)), rng.uniform(-1.0, 1.0, size=2), (p, 1.0 - p)
    )


def _random_weights(rng: np.random.Generator, K: int) -> MixtureWeights:
    w = rng.dirichlet(np.ones(K))
    w[-1] = 1.0 - math.fsum(w[:-1])
    return MixtureWeights(float(rng.uniform(0.05, 0.95)), w)


def deviation_instance(
    seed: int, index: int, trials: int
) -> List[Tuple[str, TailExperiment, Callable[[float], float]]]:
    """The four (name, experiment, bound) checks of one random two-source instance."""
    rng = child_rng(seed, INSTANCE_STREAM, index)
    sizes = (int(rng.integers(2, 5)), int(rng.integers(2, 5)), int(rng.integers(2, 5)))
    domains = tuple(_two_atom_domain(rng) for _ in sizes)
    values = tuple(rng.uniform(0.0, 1.0, size=2) for _ in sizes)
    weights = _random_weights(rng, 2)
    best = optimal_parameters(sizes)
    scale = sizes[0] * sizes[1] * sizes[2]
    thresholds = tuple(float(t) for t in np.linspace(0.05, 0.6, 8) * scale)
    unit = (0.0, 1.0)

    def make(w: MixtureWeights, one_sided: bool) -> TailExperiment:
        return TailExperiment(
            TailStatistic.F_STATISTIC,
            domains,
            sizes,
            w,
            thresholds,
            trials,
            int(rng.integers(0, 2**32)),
            atom_values=values,
            one_sided=one_sided,
        )

    c_random = f_statistic_c_table(sizes, weights, unit)
    c_best = f_statistic_c_table(sizes, best, unit)
    return [
        (
            "hoeffding",
            make(weights, False),
            lambda xi: hoeffding_dev_bound(sizes, weights, unit, xi),
        ),
        ("bennett", make(best, False), lambda xi: bennett_dev_bound(sizes, unit, xi)),
        ("mcdiarmid", make(weights, True), lambda xi: mcdiarmid_bound(c_random, xi).quadratic),
        ("mcdiarmid_bennett", make(best, True), lambda xi: mcdiarmid_bound(c_best, xi).bennett),
    ]


def run_deviation_suite(
    instances: int = 10, trials: int = 10_000, seed: int = 0, threads: int = 1
) -> List[TailReport]:
    """Validate every deviation inequality on ``instances`` random instances."""
    reports = []
    for index in range(instances):
        for name, experiment, bound_fn in deviation_instance(seed, index, trials):
            report = mc_tail_estimate(experiment, bound_fn, threads)
            reports.append(
                TailReport(name, report.rows, {"instance": index, **report.details})
            )
    failed = sum(not r.passed for r in reports)
    logger.info("deviation suite: %d reports, %d failed", len(reports), failed)
    return reports


def symmetrization_instance(
    seed: int, index: int
) -> Tuple[FiniteHypothesisClass, Tuple[DiscreteDomainSpec, ...], Tuple[int, ...]]:
    """A five-member linear class on three domains over the atoms (0, 0) and (1, 1)."""
    rng = child_rng(seed, INSTANCE_STREAM, 1_000 + index)
    sizes = tuple(int(rng.integers(6, 9)) for _ in range(3))
    domains = tuple(_labeled_coin(float(rng.uniform(0.3, 0.7))) for _ in sizes)
    hclass = FiniteHypothesisClass.linear_grid(
        1, (-1.0, -0.5, 0.0, 0.5, 1.0), loss=LossFunction(LossKind.ABSOLUTE, (0.0, 1.0))
    )
    return hclass, domains, sizes


def coverage_instance(
    seed: int, index: int, sizes: Sequence[int] = (100, 200)
) -> Tuple[FiniteHypothesisClass, Tuple[DiscreteDomainSpec, ...], Tuple[int, ...]]:
    """The symmetrization class on a target and one source sharing the same two atoms."""
    rng = child_rng(seed, INSTANCE_STREAM, 2_000 + index)
    sizes = tuple(int(n) for n in sizes)
    domains = tuple(_labeled_coin(float(rng.uniform(0.4, 0.6))) for _ in sizes)
    hclass = FiniteHypothesisClass.linear_grid(
        1, (-1.0, -0.5, 0.0, 0.5, 1.0), loss=LossFunction(LossKind.ABSOLUTE, (0.0, 1.0))
    )
    return hclass, domains, sizes


def _labeled_coin(p: float) -> DiscreteDomainSpec:
    return DiscreteDomainSpec.from_arrays([[0.0], [1.0]], [0.0, 1.0], (1.0 - p, p))


def symmetrization_thresholds(
    hclass: FiniteHypothesisClass,
    domains: Sequence[DiscreteDomainSpec],
    sizes: Sequence[int],
    weights: MixtureWeights,
    points: int = 8,
) -> Tuple[float, ...]:
    """Thresholds whose xi' spans 1 to 1.5 times the smallest value meeting the size condition."""
    domains = tuple(domains)
    a, b = loss_span(hclass, domains)
    divergence = weighted_ipm(hclass, domains[1:], domains[0], weights).value
    smallest = (b - a) * math.sqrt(weights.variance_factor(sizes) / SYMMETRIZATION_LIMIT)
    offsets = smallest * np.linspace(1.001, 1.5, points)
    return tuple(float((1.0 - weights.tau) * divergence + t) for t in offsets)


def run_symmetrization_suite(
    instances: int = 5, trials: int = 10_000, seed: int = 0, threads: int = 1
) -> List[TailReport]:
    """Symmetrization checks at the optimal weights, on thresholds meeting the size condition."""
    reports = []
    for index in range(instances):
        hclass, domains, sizes = symmetrization_instance(seed, index)
        weights = optimal_parameters(sizes)
        report = symmetrization_check(
            hclass,
            domains,
            sizes,
            weights,
            symmetrization_thresholds(hclass, domains, sizes, weights),
            trials,
            seed + index,
            threads,
        )
        reports.append(TailReport(report.kind, report.rows, {"instance": index, **report.details}))
    logger.info(
        "symmetrization suite: %d reports, %d failed",
        len(reports),
        sum(not r.passed for r in reports),
    )
    return reports
