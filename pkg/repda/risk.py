"""Empirical and expected risks, weighted least squares, and the optimal mixture weights."""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .domains import (
    DiscreteDomainSpec,
    GaussianDomainSpec,
    MultiSourceBundle,
    draw_gaussian,
    enumerate_expectation,
    shared_beta,
)
from .errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    SingularSystemError,
    ValidationError,
)
from .hypotheses import FiniteHypothesisClass, Hypothesis, LinearHypothesis, LossFunction
from .utils import CHUNK_STREAM, child_rng, chunk_sizes, parallel_map

logger = logging.getLogger(__name__)

SIMPLEX_TOLERANCE = 1e-12
DEFAULT_RIDGE_SCALE = 1e-10
MC_CHUNK = 50_000


@dataclass(frozen=True, eq=False)
class MixtureWeights:
    """The pair (tau, w): tau in [0, 1) and w on the probability simplex."""

    tau: float
    w: np.ndarray

    def __post_init__(self):
        tau = float(self.tau)
        if not (math.isfinite(tau) and 0.0 <= tau < 1.0):
            raise ValidationError(f"tau must lie in [0, 1), got {tau}")
        w = np.array(self.w, dtype=float).reshape(-1)
        if w.size == 0:
            raise ValidationError("w needs at least one source weight")
        if not np.all(np.isfinite(w)) or np.any(w < 0) or np.any(w > 1):
            raise ValidationError(f"Every w_k must lie in [0, 1], got {w.tolist()}")
        if abs(math.fsum(w) - 1.0) > SIMPLEX_TOLERANCE:
            raise ValidationError(f"w must sum to 1, got {math.fsum(w)!r}")
        w.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "w", w)

    @classmethod
    def uniform(cls, K: int, tau: float = 0.0) -> "MixtureWeights":
        return cls(tau, np.full(K, 1.0 / K))

    @property
    def K(self) -> int:
        return int(self.w.shape[0])

    def check_sources(self, K: int):
        if K != self.K:
            raise DimensionMismatchError(f"{self.K} source weights for {K} sources")

    def variance_factor(self, sizes: Sequence[int]) -> float:
        """tau^2/N_T + sum_k (1-tau)^2 w_k^2 / N_k for sizes (N_T, N_1..N_K)."""
        n_target, n_sources = split_sizes(sizes)
        self.check_sources(len(n_sources))
        total = math.fsum(
            ((1 - self.tau) * w_k) ** 2 / n_k for w_k, n_k in zip(self.w, n_sources) if w_k > 0
        )
        if self.tau > 0:
            total += self.tau**2 / n_target
        return total

    def to_dict(self) -> dict:
        return {"tau": self.tau, "w": self.w.tolist()}


def split_sizes(sizes: Sequence[int]) -> Tuple[int, Tuple[int, ...]]:
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) < 2:
        raise DimensionMismatchError("Sizes are (N_T, N_1, ..., N_K) with K >= 1")
    return sizes[0], sizes[1:]


@dataclass(frozen=True)
class RiskReport:
    target_empirical: float
    source_weighted: float
    combined: float
    tau: float

    def to_dict(self) -> dict:
        return {
            "target_empirical": self.target_empirical,
            "source_weighted": self.source_weighted,
            "combined": self.combined,
            "tau": self.tau,
        }


@dataclass(frozen=True)
class RiskEstimate:
    """An expected risk; ``draws == 0`` marks an exact value."""

    value: float
    std_error: float
    draws: int


def empirical_risk_target(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise EmptyDatasetError("Target empirical risk needs at least one sample")
    return math.fsum(values) / values.size


def empirical_risk_sources(
    source_values: Sequence[Sequence[float]], weights: MixtureWeights
) -> float:
    """sum_k w_k * mean_k."""
    weights.check_sources(len(source_values))
    means = []
    for k, values in enumerate(source_values, 1):
        values = np.asarray(values, dtype=float).reshape(-1)
        if values.size == 0:
            raise EmptyDatasetError(f"Source {k} has no samples")
        means.append(math.fsum(values) / values.size)
    return math.fsum(w_k * m for w_k, m in zip(weights.w, means))


def combined_risk(
    target_values: Sequence[float],
    source_values: Sequence[Sequence[float]],
    weights: MixtureWeights,
) -> RiskReport:
    target = empirical_risk_target(target_values)
    source = empirical_risk_sources(source_values, weights)
    combined = weights.tau * target + (1.0 - weights.tau) * source
    return RiskReport(target, source, combined, weights.tau)


def combined_risk_matrix(
    target_values: np.ndarray, source_values: Sequence[np.ndarray], weights: MixtureWeights
) -> np.ndarray:
    """Combined empirical risk of every class member.

    Each argument holds one row per member; the result has one entry per row.
    """
    weights.check_sources(len(source_values))
    total = weights.tau * np.asarray(target_values).mean(axis=1) if weights.tau > 0 else 0.0
    for w_k, values in zip(weights.w, source_values):
        if w_k > 0:
            total = total + (1.0 - weights.tau) * w_k * np.asarray(values).mean(axis=1)
    return np.asarray(total, dtype=float)


def sample_coefficients(sizes: Sequence[int], weights: MixtureWeights) -> Tuple[float, ...]:
    """Per-sample weights (c_T, c_1..c_K) with c_T = tau/N_T, c_k = (1-tau) w_k / N_k."""
    n_target, n_sources = split_sizes(sizes)
    weights.check_sources(len(n_sources))
    if weights.tau > 0 and n_target == 0:
        raise EmptyDatasetError("tau > 0 needs target samples")
    coefficients = [weights.tau / n_target if weights.tau > 0 else 0.0]
    for k, (w_k, n_k) in enumerate(zip(weights.w, n_sources), 1):
        if w_k > 0 and n_k == 0:
            raise EmptyDatasetError(f"Source {k} has weight {w_k} but no samples")
        coefficients.append((1.0 - weights.tau) * w_k / n_k if w_k > 0 else 0.0)
    return tuple(coefficients)


def _design(
    bundle: MultiSourceBundle, weights: MixtureWeights, fit_intercept: bool
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Stacked design matrix, labels, and per-row weights of the weighted objective."""
    coefficients = sample_coefficients(bundle.sizes, weights)
    datasets = (bundle.target, *bundle.sources)
    rows = [(d, c) for d, c in zip(datasets, coefficients) if c > 0]
    if not rows:
        raise EmptyDatasetError("No domain carries positive weight")
    inputs = np.vstack([d.inputs for d, _ in rows])
    labels = np.concatenate([d.labels for d, _ in rows])
    if labels.ndim != 1:
        raise DimensionMismatchError("Least squares needs scalar labels")
    row_weights = np.concatenate([np.full(d.size, c) for d, c in rows])
    if fit_intercept:
        inputs = np.hstack([inputs, np.ones((inputs.shape[0], 1))])
    return inputs, labels, row_weights


def weighted_objective(
    bundle: MultiSourceBundle, weights: MixtureWeights, h: LinearHypothesis
) -> float:
    """Combined empirical squared-loss risk of ``h`` (the least-squares objective)."""
    datasets = (bundle.target, *bundle.sources)
    coefficients = sample_coefficients(bundle.sizes, weights)
    total = 0.0
    for dataset, c in zip(datasets, coefficients):
        if c > 0:
            residual = h.predict_many(dataset.inputs) - dataset.labels
            total += c * float(residual @ residual)
    return total


def objective_gradient(
    bundle: MultiSourceBundle,
    weights: MixtureWeights,
    h: LinearHypothesis,
    fit_intercept: bool = True,
) -> np.ndarray:
    """Gradient of ``weighted_objective`` in (weights, bias) coordinates."""
    design, labels, row_weights = _design(bundle, weights, fit_intercept)
    theta = np.append(h.weights, h.bias) if fit_intercept else h.weights
    residual = design @ theta - labels
    return 2.0 * design.T @ (row_weights * residual)


@dataclass(frozen=True, eq=False)
class NormalMoments:
    """Per-domain X^T X and X^T y of a bundle, in (target, source_1..K) order.

    Re-weighting the domains only rescales these blocks, so one set of moments
    serves every (tau, w) of a grid.
    """

    grams: Tuple[np.ndarray, ...]
    rhs: Tuple[np.ndarray, ...]
    sizes: Tuple[int, ...]
    fit_intercept: bool

    @classmethod
    def from_bundle(cls, bundle: MultiSourceBundle, fit_intercept: bool = True) -> "NormalMoments":
        grams, rhs = [], []
        for dataset in (bundle.target, *bundle.sources):
            if dataset.labels.ndim != 1:
                raise DimensionMismatchError("Least squares needs scalar labels")
            design = dataset.inputs
            if fit_intercept:
                design = np.hstack([design, np.ones((dataset.size, 1))])
            grams.append(design.T @ design)
            rhs.append(design.T @ dataset.labels)
        return cls(tuple(grams), tuple(rhs), tuple(bundle.sizes), fit_intercept)

    def solve(self, weights: MixtureWeights, ridge: Optional[float] = None) -> LinearHypothesis:
        coefficients = sample_coefficients(self.sizes, weights)
        if not any(c > 0 for c in coefficients):
            raise EmptyDatasetError("No domain carries positive weight")
        gram = sum(c * g for c, g in zip(coefficients, self.grams) if c > 0)
        rhs = sum(c * r for c, r in zip(coefficients, self.rhs) if c > 0)
        p = gram.shape[0]

        if ridge is None:
            ridge = DEFAULT_RIDGE_SCALE * float(np.trace(gram)) / p
        if not (math.isfinite(ridge) and ridge >= 0):
            raise ValidationError(f"ridge must be >= 0, got {ridge}")
        if ridge == 0:
            rank = int(np.linalg.matrix_rank(gram))
            if rank < p:
                raise SingularSystemError(rank, p)
        else:
            gram = gram + ridge * np.eye(p)

        try:
            theta = scipy.linalg.solve(gram, rhs, assume_a="sym")
        except scipy.linalg.LinAlgError:
            raise SingularSystemError(int(np.linalg.matrix_rank(gram)), p) from None
        logger.debug("solved %dx%d normal system (ridge %.3g)", p, p, ridge)
        if self.fit_intercept:
            return LinearHypothesis(theta[:-1], float(theta[-1]))
        return LinearHypothesis(theta, 0.0)


def solve_weighted_least_squares(
    bundle: MultiSourceBundle,
    weights: MixtureWeights,
    ridge: Optional[float] = None,
    fit_intercept: bool = True,
) -> LinearHypothesis:
    """Minimize the combined squared-loss risk by the weighted normal equations.

    ``ridge=None`` adds 1e-10 * trace(A) / p to the diagonal; ``ridge=0`` solves
    the plain system and raises SingularSystemError when it is rank deficient.
    """
    weights.check_sources(bundle.K)
    return NormalMoments.from_bundle(bundle, fit_intercept).solve(weights, ridge)


def optimal_parameters(sizes: Sequence[int]) -> MixtureWeights:
    """w_k = N_k / sum N and tau = N_T / (N_T + sum N), for sizes (N_T, N_1..N_K)."""
    n_target, n_sources = split_sizes(sizes)
    if n_target < 1 or any(n < 1 for n in n_sources):
        raise ValidationError(f"All sample sizes must be >= 1, got {tuple(sizes)}")
    total_sources = sum(n_sources)
    w = np.array([n / total_sources for n in n_sources])
    return MixtureWeights(n_target / (n_target + total_sources), w)


def _log_h(x: np.ndarray) -> np.ndarray:
    """log(e^x - 1 - x) for x >= 0, stable at both ends."""
    x = np.asarray(x, dtype=float)
    out = np.full(x.shape, -np.inf)
    small = (x > 0) & (x < 1e-3)
    mid = (x >= 1e-3) & (x <= 30)
    large = x > 30
    xs = x[small]
    out[small] = np.log(xs * xs / 2 * (1 + xs / 3 + xs * xs / 12 + xs**3 / 60))
    out[mid] = np.log(np.expm1(x[mid]) - x[mid])
    xl = x[large]
    out[large] = xl + np.log1p(-(1 + xl) * np.exp(-xl))
    return out


def lagrange_objective(w: Sequence[float], sizes: Sequence[int]) -> float:
    """log of sum_k N_k h(w_k prod_{i != k} N_i) with h(x) = e^x - 1 - x."""
    _, n_sources = split_sizes(sizes)
    w = np.asarray(w, dtype=float)
    if w.shape != (len(n_sources),):
        raise DimensionMismatchError(f"{w.size} weights for {len(n_sources)} sources")
    n = np.asarray(n_sources, dtype=float)
    log_n = np.log(n)
    log_others = log_n.sum() - log_n
    scaled = w * np.exp(log_others)
    return float(logsumexp(log_n + _log_h(scaled)))


def simplex_grid(K: int, step: float = 0.01) -> np.ndarray:
    """Every point of the K-simplex whose coordinates are multiples of ``step``."""
    if K < 1:
        raise ValidationError("K must be >= 1")
    n = round(1.0 / step)
    if abs(n * step - 1.0) > 1e-9:
        raise ValidationError(f"step must divide 1, got {step}")
    points = []
    # stars and bars: K-1 dividers among n+K-1 slots
    for bars in itertools.combinations(range(n + K - 1), K - 1):
        edges = (-1, *bars, n + K - 1)
        points.append([edges[i + 1] - edges[i] - 1 for i in range(K)])
    return np.array(points, dtype=float) / n


def expected_risk(
    spec: Union[DiscreteDomainSpec, GaussianDomainSpec],
    h: Hypothesis,
    loss: LossFunction,
    draws: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
) -> RiskEstimate:
    """Target expected risk of ``h``.

    Exact for discrete specs. Gaussian specs use ``draws`` Monte Carlo samples
    split into fixed chunks with child seeds, reduced in chunk order.
    """
    if isinstance(spec, DiscreteDomainSpec):
        value = enumerate_expectation(spec, lambda z: float(loss(h.predict(z.x), z.y)))
        return RiskEstimate(value, 0.0, 0)

    if draws is None or draws < 1:
        raise ValidationError(f"Monte Carlo expected risk needs draws >= 1, got {draws}")
    beta = shared_beta(spec, seed) if spec.beta_mode == "shared" else None

    def run_chunk(item: Tuple[int, int]) -> np.ndarray:
        index, size = item
        inputs, labels = draw_gaussian(spec, size, child_rng(seed, CHUNK_STREAM, index), beta)
        return loss(h.predict_many(inputs), labels)

    chunks = list(enumerate(chunk_sizes(draws, MC_CHUNK)))
    values = np.concatenate(parallel_map(run_chunk, chunks, threads))
    std_error = float(values.std(ddof=1) / math.sqrt(draws)) if draws > 1 else math.nan
    return RiskEstimate(float(values.mean()), std_error, draws)


@dataclass(frozen=True)
class FiniteErmResult:
    index: int
    risks: np.ndarray


def finite_class_erm(
    hclass: FiniteHypothesisClass, bundle: MultiSourceBundle, weights: MixtureWeights
) -> FiniteErmResult:
    """Exact combined-risk argmin over a finite class; ties go to the lowest index."""
    weights.check_sources(bundle.K)
    target_values = (
        hclass.loss_values(bundle.target.inputs, bundle.target.labels)
        if weights.tau > 0
        else np.zeros((hclass.size, 1))
    )
    source_values = [
        hclass.loss_values(s.inputs, s.labels) if w_k > 0 else np.zeros((hclass.size, 1))
        for s, w_k in zip(bundle.sources, weights.w)
    ]
    risks = combined_risk_matrix(target_values, source_values, weights)
    return FiniteErmResult(int(np.argmin(risks)), risks)


def class_expected_risks(hclass: FiniteHypothesisClass, spec: DiscreteDomainSpec) -> np.ndarray:
    """Exact expected loss of every member under a discrete domain."""
    return hclass.loss_values(spec.inputs, spec.labels) @ spec.probabilities


@dataclass(frozen=True)
class SandwichReport:
    """Both sides of 0 <= excess <= 2 * sup |E_T f - E^tau_w f|."""

    excess: float
    uniform_deviation: float
    erm_index: int
    best_index: int

    @property
    def upper(self) -> float:
        return 2.0 * self.uniform_deviation

    def holds(self, tol: float = 1e-10) -> bool:
        return -tol <= self.excess <= self.upper + tol


def excess_risk_sandwich(
    hclass: FiniteHypothesisClass,
    target_spec: DiscreteDomainSpec,
    bundle: MultiSourceBundle,
    weights: MixtureWeights,
) -> SandwichReport:
    """Target excess risk of the combined-risk minimizer against the uniform deviation."""
    erm = finite_class_erm(hclass, bundle, weights)
    expected = class_expected_risks(hclass, target_spec)
    best = int(np.argmin(expected))
    deviation = float(np.max(np.abs(expected - erm.risks)))
    return SandwichReport(float(expected[erm.index] - expected[best]), deviation, erm.index, best)

