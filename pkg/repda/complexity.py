"""Capacity measures: the weighted l1 norm, covering numbers, UEN, Rademacher complexity."""

import itertools
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .domains import DiscreteDomainSpec, DomainDataset, DomainId, DomainSpec, draw_from
from .errors import CapacityError, DimensionMismatchError, EvaluationError, ValidationError
from .hypotheses import FiniteHypothesisClass, FunctionValueMatrix, evaluate_class
from .risk import MixtureWeights, split_sizes
from .utils import (
    CHUNK_STREAM,
    GHOST_STREAM,
    RADEMACHER_STREAM,
    child_rng,
    child_seed,
    chunk_sizes,
    parallel_map,
)

logger = logging.getLogger(__name__)

# Relative slack on "within radius" shared by every cover routine.
COVER_TOLERANCE = 1e-12
EXACT_COVER_LIMIT = 20
SIGMA_CHUNK = 1024
UEN_ENUMERATION_LIMIT = 200_000
RADEMACHER_ENUMERATION_LIMIT = 1 << 20


class ComplexityKind(str, Enum):
    COVERING_NUMBER = "covering_number"
    UEN = "uen"
    RADEMACHER_EMPIRICAL = "rademacher_empirical"
    RADEMACHER_EXPECTED = "rademacher_expected"


@dataclass(frozen=True)
class ComplexityEstimate:
    """A capacity value; ``trials == 0`` marks an exact computation."""

    kind: ComplexityKind
    value: float
    radius: Optional[float] = None
    trials: int = 0
    std_error: Optional[float] = None
    details: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "radius": self.radius,
            "trials": self.trials,
            "std_error": self.std_error,
            **self.details,
        }


def _domain_tags(K: int) -> List[str]:
    return [str(DomainId.target())] + [str(DomainId.source(k)) for k in range(1, K + 1)]


@dataclass(frozen=True, eq=False)
class GhostedSample:
    """Original and ghost datasets per domain, target first then sources 1..K."""

    original: Tuple[DomainDataset, ...]
    ghost: Tuple[DomainDataset, ...]

    def __post_init__(self):
        original, ghost = tuple(self.original), tuple(self.ghost)
        if len(original) != len(ghost) or len(original) < 2:
            raise DimensionMismatchError(
                "Need original and ghost sets for the target and >= 1 source"
            )
        for o, g in zip(original, ghost):
            if o.size != g.size:
                raise DimensionMismatchError(
                    f"{o.domain_id}: {o.size} original points but {g.size} ghost points"
                )
        object.__setattr__(self, "original", original)
        object.__setattr__(self, "ghost", ghost)

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(d.size for d in self.original)

    @property
    def point_tags(self) -> Tuple[str, ...]:
        tags: List[str] = []
        for tag, d in zip(_domain_tags(len(self.original) - 1), self.original):
            tags += [tag] * d.size + [tag + "'"] * d.size
        return tuple(tags)

    def stacked(self) -> DomainDataset:
        """All points in norm column order: per domain, originals then ghosts."""
        parts = [d for pair in zip(self.original, self.ghost) for d in pair if d.size]
        labels = np.concatenate([d.labels for d in parts])
        return DomainDataset(np.vstack([d.inputs for d in parts]), labels)


def ghost_sample(
    target_spec: DomainSpec,
    source_specs: Sequence[DomainSpec],
    sizes: Sequence[int],
    seed: int,
    redraw: int = 0,
) -> GhostedSample:
    """Draw N_d original and N_d ghost points for every domain."""
    n_target, n_sources = split_sizes(sizes)
    if len(source_specs) != len(n_sources):
        raise DimensionMismatchError(f"{len(source_specs)} source specs for {len(n_sources)} sizes")
    specs = (target_spec, *source_specs)
    ids = (DomainId.target(), *(DomainId.source(k) for k in range(1, len(source_specs) + 1)))
    original, ghost = [], []
    for spec, domain_id, n in zip(specs, ids, (n_target, *n_sources)):
        for slot, bucket in enumerate((original, ghost)):
            rng = child_rng(seed, GHOST_STREAM, redraw, domain_id.code, slot)
            bucket.append(draw_from(spec, n, rng, domain_id, seed))
    return GhostedSample(tuple(original), tuple(ghost))


@dataclass(frozen=True, eq=False)
class WTauL1Norm:
    """The l1^{w,tau} norm as per-column weights over a ghosted column layout.

    Target columns carry tau / (2 N_T); source k columns carry (1 - tau) w_k / (2 N_k).
    """

    column_weights: np.ndarray

    @classmethod
    def for_sizes(cls, sizes: Sequence[int], weights: MixtureWeights) -> "WTauL1Norm":
        n_target, n_sources = split_sizes(sizes)
        weights.check_sources(len(n_sources))
        blocks = [np.full(2 * n_target, weights.tau / (2 * n_target) if n_target else 0.0)]
        for w_k, n_k in zip(weights.w, n_sources):
            blocks.append(np.full(2 * n_k, (1 - weights.tau) * w_k / (2 * n_k) if n_k else 0.0))
        return cls(np.concatenate(blocks))

    @property
    def n_columns(self) -> int:
        return int(self.column_weights.shape[0])

    def norm(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.n_columns:
            raise DimensionMismatchError(
                f"{values.shape[-1]} values for a norm over {self.n_columns} columns"
            )
        return np.abs(values) @ self.column_weights

    def distances(self, values: np.ndarray) -> np.ndarray:
        """Pairwise distance matrix between the rows of ``values``."""
        values = np.asarray(values, dtype=float)
        return np.stack([self.norm(values - row) for row in values])


def w_tau_l1_norm(values: Sequence[float], sizes: Sequence[int], weights: MixtureWeights) -> float:
    """Norm of one function given by its values in ghosted column order."""
    return float(WTauL1Norm.for_sizes(sizes, weights).norm(np.asarray(values, dtype=float)))


def _within(distances: np.ndarray, radius: float) -> np.ndarray:
    return distances <= radius * (1 + COVER_TOLERANCE)


def greedy_centers(distances: np.ndarray, radius: float) -> List[int]:
    """Farthest-point greedy internal cover starting at member 0.

    The next center is the first index at maximal distance from the chosen ones.
    """
    centers = [0]
    nearest = distances[0].copy()
    while not np.all(_within(nearest, radius)):
        j = int(np.argmax(nearest))
        centers.append(j)
        nearest = np.minimum(nearest, distances[j])
    return centers


def is_cover(distances: np.ndarray, centers: Sequence[int], radius: float) -> bool:
    return bool(np.all(_within(distances[list(centers)], radius).any(axis=0)))


def _check_radius(radius: float):
    if not (math.isfinite(radius) and radius > 0):
        raise ValidationError(f"Cover radius must be > 0, got {radius}")


def covering_number_greedy(
    matrix: FunctionValueMatrix, radius: float, norm: WTauL1Norm
) -> ComplexityEstimate:
    """Size of a certified internal cover built by farthest-point greedy."""
    _check_radius(radius)
    distances = norm.distances(matrix.values)
    centers = greedy_centers(distances, radius)
    if not is_cover(distances, centers, radius):
        raise EvaluationError("Greedy cover failed validation")
    return ComplexityEstimate(
        ComplexityKind.COVERING_NUMBER, float(len(centers)), radius, details={"method": "greedy"}
    )


def _minimum_cover_size(distances: np.ndarray, radius: float, upper: int) -> int:
    within = _within(distances, radius)
    members = range(distances.shape[0])
    for size in range(1, upper):
        for centers in itertools.combinations(members, size):
            if within[list(centers)].any(axis=0).all():
                return size
    return upper


def covering_number_exact(
    matrix: FunctionValueMatrix,
    radius: float,
    norm: WTauL1Norm,
    limit: int = EXACT_COVER_LIMIT,
) -> ComplexityEstimate:
    """Minimum internal cover size by subset search (classes of at most ``limit``)."""
    _check_radius(radius)
    if matrix.n_functions > limit:
        raise CapacityError("Exact covering search", 2**matrix.n_functions, 2**limit)
    distances = norm.distances(matrix.values)
    upper = len(greedy_centers(distances, radius))
    size = _minimum_cover_size(distances, radius, upper)
    return ComplexityEstimate(
        ComplexityKind.COVERING_NUMBER, float(size), radius, details={"method": "exact"}
    )


def uen_estimate(
    hclass: FiniteHypothesisClass,
    target_spec: DomainSpec,
    source_specs: Sequence[DomainSpec],
    sizes: Sequence[int],
    weights: MixtureWeights,
    radius: float,
    redraws: int,
    seed: int,
    threads: int = 1,
) -> ComplexityEstimate:
    """Max over ``redraws`` ghosted bundles of ln(greedy covering number).

    A lower estimate of the uniform entropy number. Redraw r always uses the
    stream (seed, r), so more redraws only add bundles.
    """
    if redraws < 1:
        raise ValidationError(f"UEN needs redraws >= 1, got {redraws}")
    _check_radius(radius)
    norm = WTauL1Norm.for_sizes(sizes, weights)

    def one(redraw: int) -> float:
        sample = ghost_sample(target_spec, source_specs, sizes, seed, redraw)
        matrix = evaluate_class(hclass, sample.stacked(), sample.point_tags)
        return math.log(covering_number_greedy(matrix, radius, norm).value)

    logs = parallel_map(one, range(redraws), threads)
    best = max(logs)
    logger.debug("UEN over %d redraws: %.4f", redraws, best)
    return ComplexityEstimate(
        ComplexityKind.UEN,
        best,
        radius,
        trials=redraws,
        details={"estimate": "lower", "redraws": redraws},
    )


def _multiset_counts(n_atoms: int, draws: int) -> List[np.ndarray]:
    counts = []
    for combo in itertools.combinations_with_replacement(range(n_atoms), draws):
        counts.append(np.bincount(np.array(combo, dtype=int), minlength=n_atoms).astype(float))
    return counts or [np.zeros(n_atoms)]


def uen_enumerated(
    hclass: FiniteHypothesisClass,
    target_spec: DiscreteDomainSpec,
    source_specs: Sequence[DiscreteDomainSpec],
    sizes: Sequence[int],
    weights: MixtureWeights,
    radius: float,
    exact: bool = False,
    limit: int = UEN_ENUMERATION_LIMIT,
) -> ComplexityEstimate:
    """Exact sup over every possible ghosted sample set of ln(covering number).

    The norm only sees how often each atom occurs per domain, so multisets of
    2 N_d atoms per domain cover every sample set.
    """
    _check_radius(radius)
    n_target, n_sources = split_sizes(sizes)
    weights.check_sources(len(n_sources))
    specs = (target_spec, *source_specs)
    draws = (n_target, *n_sources)
    column_weight = [weights.tau / (2 * n_target) if n_target else 0.0] + [
        (1 - weights.tau) * w_k / (2 * n_k) if n_k else 0.0
        for w_k, n_k in zip(weights.w, n_sources)
    ]

    required = math.prod(math.comb(s.n_atoms + 2 * n - 1, 2 * n) for s, n in zip(specs, draws))
    if required > limit:
        raise CapacityError("UEN enumeration", required, limit)

    # gaps[d][i, j, a] = |f_i - f_j| at atom a of domain d
    gaps = []
    for spec in specs:
        table = hclass.loss_values(spec.inputs, spec.labels)
        gaps.append(np.abs(table[:, None, :] - table[None, :, :]))

    per_domain = [_multiset_counts(s.n_atoms, 2 * n) for s, n in zip(specs, draws)]
    best = -math.inf
    for counts in itertools.product(*per_domain):
        distances = sum(c * (g @ n) for c, g, n in zip(column_weight, gaps, counts))
        upper = len(greedy_centers(distances, radius))
        size = _minimum_cover_size(distances, radius, upper) if exact else upper
        best = max(best, math.log(size))
    return ComplexityEstimate(
        ComplexityKind.UEN,
        best,
        radius,
        details={
            "estimate": "exact",
            "configurations": required,
            "cover": "exact" if exact else "greedy",
        },
    )


def _sign_chunk_sups(values: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    n_points = values.shape[1]
    sigma = rng.integers(0, 2, size=(size, n_points)) * 2 - 1
    return (sigma @ values.T).max(axis=1) / n_points


def rademacher_empirical(
    values: np.ndarray, trials: int, seed: int, threads: int = 1
) -> ComplexityEstimate:
    """Monte Carlo E_sigma sup_f (1/N) sum_n sigma_n f(z_n) over ``trials`` sign draws.

    ``values`` holds one row per function (a ``FunctionValueMatrix`` works too).
    """
    if isinstance(values, FunctionValueMatrix):
        values = values.values
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if trials < 1:
        raise ValidationError(f"Rademacher estimate needs trials >= 1, got {trials}")
    if values.shape[1] == 0:
        raise DimensionMismatchError("Rademacher estimate needs at least one point")

    chunks = list(enumerate(chunk_sizes(trials, SIGMA_CHUNK)))
    sups = np.concatenate(
        parallel_map(
            lambda item: _sign_chunk_sups(values, item[1], child_rng(seed, CHUNK_STREAM, item[0])),
            chunks,
            threads,
        )
    )
    std_error = float(sups.std(ddof=1) / math.sqrt(trials)) if trials > 1 else None
    return ComplexityEstimate(
        ComplexityKind.RADEMACHER_EMPIRICAL, float(sups.mean()), trials=trials, std_error=std_error
    )


def rademacher_enumerated(values: np.ndarray) -> ComplexityEstimate:
    """Exact empirical Rademacher complexity over all 2^N sign vectors."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    n_points = values.shape[1]
    if 2**n_points > RADEMACHER_ENUMERATION_LIMIT:
        raise CapacityError("Sign enumeration", 2**n_points, RADEMACHER_ENUMERATION_LIMIT)
    sigma = np.array(list(itertools.product((-1.0, 1.0), repeat=n_points)))
    value = float(((sigma @ values.T).max(axis=1) / n_points).mean())
    return ComplexityEstimate(ComplexityKind.RADEMACHER_EMPIRICAL, value, std_error=0.0)


def rademacher_expected(
    hclass: FiniteHypothesisClass,
    spec: DomainSpec,
    n: int,
    data_trials: int,
    sigma_trials: int,
    seed: int,
    threads: int = 1,
) -> ComplexityEstimate:
    """Outer Monte Carlo over data draws of the empirical Rademacher complexity.

    With several data draws the standard error is the spread of the inner
    estimates; with one it is the inner standard error.
    """
    if data_trials < 1 or sigma_trials < 1 or n < 1:
        raise ValidationError("Rademacher expectation needs n, data_trials, sigma_trials >= 1")

    def one(trial: int) -> ComplexityEstimate:
        dataset = draw_from(spec, n, child_rng(seed, RADEMACHER_STREAM, trial, 0), seed=seed)
        inner_seed = int(child_seed(seed, RADEMACHER_STREAM, trial, 1).generate_state(1)[0])
        values = hclass.loss_values(dataset.inputs, dataset.labels)
        return rademacher_empirical(values, sigma_trials, inner_seed)

    inner = parallel_map(one, range(data_trials), threads)
    means = np.array([e.value for e in inner])
    if data_trials > 1:
        std_error: Optional[float] = float(means.std(ddof=1) / math.sqrt(data_trials))
    else:
        std_error = inner[0].std_error
    return ComplexityEstimate(
        ComplexityKind.RADEMACHER_EXPECTED,
        float(means.mean()),
        trials=data_trials * sigma_trials,
        std_error=std_error,
        details={"data_trials": data_trials, "sigma_trials": sigma_trials},
    )


def rademacher_expected_enumerated(
    hclass: FiniteHypothesisClass,
    spec: DiscreteDomainSpec,
    n: int,
    limit: int = RADEMACHER_ENUMERATION_LIMIT,
) -> ComplexityEstimate:
    """Exact expected Rademacher complexity over atoms^N samples and 2^N signs."""
    required = spec.n_atoms**n * 2**n
    if required > limit:
        raise CapacityError("Rademacher enumeration", required, limit)
    table = hclass.loss_values(spec.inputs, spec.labels)
    probs = spec.probabilities
    total = 0.0
    for idx in itertools.product(range(spec.n_atoms), repeat=n):
        weight = float(np.prod(probs[list(idx)]))
        if weight > 0:
            total += weight * rademacher_enumerated(table[:, list(idx)]).value
    return ComplexityEstimate(ComplexityKind.RADEMACHER_EXPECTED, total, std_error=0.0)
