"""Convergence experiment for weighted least squares across two Gaussian sources.

Every repeat draws a target set of N_T samples, fits on its first N'_T rows
plus the current source sets, and measures how far the combined empirical risk
of the fit is from its risk on the remaining N''_T target rows.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from . import config as settings
from .domains import (
    DomainId,
    GaussianDomainSpec,
    MultiSourceBundle,
    domain_spec_from_dict,
    domain_spec_to_dict,
    experiment_source_specs,
    experiment_target_spec,
    synthesize_domain,
)
from .errors import ConfigError, RepdaError, ValidationError
from .risk import MixtureWeights, NormalMoments, weighted_objective
from .utils import parallel_map

logger = logging.getLogger(__name__)

CURVE_CSV_FIELDS = ("n_total", "w", "tau", "mean_discrepancy", "std_discrepancy", "repeats")
DECREASE_FACTOR = 0.7
# Two-sided 99% normal quantile; comparisons allow this many standard errors.
MC_Z = float(norm.ppf(0.995))
LARGE_TAU = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    """Protocol of one convergence run.

    Both sources grow together from ``source_start`` to ``source_max`` in
    increments of ``step``. Source k gets weight w for k = 1 and 1 - w for k = 2.
    ``target`` and ``sources`` override the default Gaussian domains.
    """

    dims: int = 20
    n_target: int = 1000
    n_target_fit: int = 100
    source_start: int = 200
    source_max: int = 800
    step: int = 200
    repeats: int = 20
    w_grid: Tuple[float, ...] = (0.1, 0.25, 0.5, 0.8)
    tau_grid: Tuple[float, ...] = (0.025, 0.3, 0.5, 0.8)
    seed: int = settings.DEFAULT_SEED
    noise_var: float = 0.5
    beta_mode: str = "shared"
    fixed_pool: bool = False
    ridge: Optional[float] = None
    target: Optional[GaussianDomainSpec] = None
    sources: Optional[Tuple[GaussianDomainSpec, GaussianDomainSpec]] = None
    preset: str = "desk"

    def __post_init__(self):
        object.__setattr__(self, "w_grid", tuple(float(w) for w in self.w_grid))
        object.__setattr__(self, "tau_grid", tuple(float(t) for t in self.tau_grid))
        if self.sources is not None:
            object.__setattr__(self, "sources", tuple(self.sources))
        self.validate()

    def validate(self):
        if self.dims < 1:
            raise ConfigError(f"dims must be >= 1, got {self.dims}")
        if not 1 <= self.n_target_fit < self.n_target:
            raise ConfigError(
                f"Need 1 <= N'_T < N_T so the held-out set is nonempty, "
                f"got N'_T={self.n_target_fit}, N_T={self.n_target}"
            )
        if self.source_start < 1 or self.step < 1 or self.source_max < self.source_start:
            raise ConfigError("Source sizes need 1 <= source_start <= source_max and step >= 1")
        if (self.source_max - self.source_start) % self.step:
            raise ConfigError(
                f"step {self.step} does not divide {self.source_max} - {self.source_start}"
            )
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if not self.w_grid or any(not 0.0 <= w <= 1.0 for w in self.w_grid):
            raise ConfigError(f"w grid values must lie in [0, 1], got {self.w_grid}")
        if not self.tau_grid or any(not 0.0 <= t < 1.0 for t in self.tau_grid):
            raise ConfigError(f"tau grid values must lie in [0, 1), got {self.tau_grid}")
        if self.ridge is not None and not self.ridge >= 0:
            raise ConfigError(f"ridge must be >= 0, got {self.ridge}")
        if self.sources is not None and len(self.sources) != 2:
            raise ConfigError("The experiment uses exactly two source domains")
        for spec in (self.target, *(self.sources or ())):
            if spec is not None and spec.dim != self.dims:
                raise ConfigError(f"Domain dimension {spec.dim} differs from dims {self.dims}")

    @classmethod
    def desk(cls) -> "ExperimentConfig":
        return cls()

    @classmethod
    def full(cls) -> "ExperimentConfig":
        """The full protocol: 100 dimensions, N_T = 4000, sources up to 2000, 100 repeats."""
        return cls(
            dims=100,
            n_target=4000,
            n_target_fit=100,
            source_start=200,
            source_max=2000,
            step=200,
            repeats=100,
            preset="full",
        )

    @property
    def n_target_heldout(self) -> int:
        return self.n_target - self.n_target_fit

    @property
    def source_sizes(self) -> Tuple[int, ...]:
        return tuple(range(self.source_start, self.source_max + 1, self.step))

    @property
    def n_totals(self) -> Tuple[int, ...]:
        return tuple(2 * n for n in self.source_sizes)

    def target_spec(self) -> GaussianDomainSpec:
        if self.target is not None:
            return self.target
        spec = experiment_target_spec(self.dims, self.noise_var)
        return dataclasses.replace(spec, beta_mode=self.beta_mode)

    def source_specs(self) -> Tuple[GaussianDomainSpec, ...]:
        if self.sources is not None:
            return tuple(self.sources)
        specs = experiment_source_specs(self.dims, self.noise_var)
        return tuple(dataclasses.replace(s, beta_mode=self.beta_mode) for s in specs)

    def weights(self, w: float, tau: float) -> MixtureWeights:
        return MixtureWeights(tau, (w, 1.0 - w))

    def to_dict(self) -> dict:
        document = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("target", "sources")
        }
        document["w_grid"] = list(self.w_grid)
        document["tau_grid"] = list(self.tau_grid)
        document["target"] = domain_spec_to_dict(self.target) if self.target else None
        document["sources"] = (
            [domain_spec_to_dict(s) for s in self.sources] if self.sources else None
        )
        return document

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "ExperimentConfig":
        """Build from JSON: optional ``"preset"`` (``desk`` or ``full``) plus overrides."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(document) - known)
        if unknown:
            raise ConfigError(f"Unknown experiment keys: {', '.join(unknown)}")
        preset = document.get("preset", "desk")
        presets: Dict[str, Callable[[], ExperimentConfig]] = {"desk": cls.desk, "full": cls.full}
        if preset not in presets:
            raise ConfigError(f"Unknown preset {preset!r} (use 'desk' or 'full')")
        overrides = {k: v for k, v in document.items() if k != "preset"}
        try:
            if overrides.get("target") is not None:
                overrides["target"] = _gaussian(overrides["target"])
            if overrides.get("sources") is not None:
                overrides["sources"] = tuple(_gaussian(s) for s in overrides["sources"])
            return dataclasses.replace(presets[preset](), preset=preset, **overrides)
        except ConfigError:
            raise
        except (RepdaError, TypeError, ValueError) as e:
            raise ConfigError(f"Bad experiment config: {e}") from None


def _gaussian(document: Mapping[str, Any]) -> GaussianDomainSpec:
    spec = domain_spec_from_dict(document)
    if not isinstance(spec, GaussianDomainSpec):
        raise ConfigError("Experiment domains must be gaussian specs")
    return spec


@dataclass(frozen=True)
class ConvergenceRow:
    n_total: int
    w: float
    tau: float
    mean_discrepancy: float
    std_discrepancy: float
    repeats: int

    def csv_row(self) -> List[str]:
        return [
            str(self.n_total),
            repr(self.w),
            repr(self.tau),
            repr(self.mean_discrepancy),
            repr(self.std_discrepancy),
            str(self.repeats),
        ]


@dataclass(frozen=True)
class ConvergenceCurve:
    """Mean |combined risk - held-out target risk| of the fit per (w, tau, N_1 + N_2)."""

    rows: Tuple[ConvergenceRow, ...]
    n_target_fit: int = 100
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def w_grid(self) -> Tuple[float, ...]:
        return tuple(dict.fromkeys(r.w for r in self.rows))

    @property
    def tau_grid(self) -> Tuple[float, ...]:
        return tuple(dict.fromkeys(r.tau for r in self.rows))

    @property
    def n_totals(self) -> Tuple[int, ...]:
        return tuple(sorted(set(r.n_total for r in self.rows)))

    def is_complete(self) -> bool:
        cells = {(r.w, r.tau, r.n_total) for r in self.rows}
        expected = len(self.w_grid) * len(self.tau_grid) * len(self.n_totals)
        return bool(self.rows) and len(cells) == len(self.rows) == expected

    def series(self, w: float, tau: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(n_total, mean, std) of one (w, tau) curve in increasing size order."""
        picked = sorted(
            (r for r in self.rows if r.w == w and r.tau == tau), key=lambda r: r.n_total
        )
        return (
            np.array([r.n_total for r in picked], dtype=int),
            np.array([r.mean_discrepancy for r in picked]),
            np.array([r.std_discrepancy for r in picked]),
        )


def _one_repeat(config: ExperimentConfig, repeat: int) -> np.ndarray:
    """Discrepancies of shape (len(w_grid), len(tau_grid), steps) for one repeat."""
    seed = config.seed
    target = synthesize_domain(
        config.target_spec(), config.n_target, seed, DomainId.target(), repeat
    )
    target_fit, heldout = target.split(config.n_target_fit)
    specs = config.source_specs()
    steps = config.source_sizes
    pools = None
    if config.fixed_pool:
        pools = [
            synthesize_domain(spec, config.source_max, seed, DomainId.source(k), repeat)
            for k, spec in enumerate(specs, 1)
        ]

    out = np.empty((len(config.w_grid), len(config.tau_grid), len(steps)))
    for i, n in enumerate(steps):
        if pools is not None:
            sources = tuple(pool.take(np.arange(n)) for pool in pools)
        else:
            replicate = repeat * len(steps) + i
            sources = tuple(
                synthesize_domain(spec, n, seed, DomainId.source(k), replicate)
                for k, spec in enumerate(specs, 1)
            )
        bundle = MultiSourceBundle(sources, target_fit)
        moments = NormalMoments.from_bundle(bundle)
        for a, w in enumerate(config.w_grid):
            for b, tau in enumerate(config.tau_grid):
                weights = config.weights(w, tau)
                h = moments.solve(weights, config.ridge)
                combined = weighted_objective(bundle, weights, h)
                residual = h.predict_many(heldout.inputs) - heldout.labels
                out[a, b, i] = abs(combined - float(residual @ residual) / heldout.size)
    return out


def run_convergence_experiment(
    config: ExperimentConfig,
    threads: int = 1,
    progress: Optional[Callable[[int], None]] = None,
) -> ConvergenceCurve:
    """Run every repeat and average the discrepancies in repeat order.

    Each repeat reads only its own child streams, so the curve depends on
    ``config`` alone. ``progress`` is called with each finished repeat index.
    """

    def run(repeat: int) -> np.ndarray:
        result = _one_repeat(config, repeat)
        if progress is not None:
            progress(repeat)
        return result

    logger.info(
        "convergence run: %d repeats x %d steps x %d weight settings",
        config.repeats,
        len(config.source_sizes),
        len(config.w_grid) * len(config.tau_grid),
    )
    stacked = np.stack(parallel_map(run, range(config.repeats), threads))
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0, ddof=1) if config.repeats > 1 else np.zeros_like(mean)

    rows = []
    for a, w in enumerate(config.w_grid):
        for b, tau in enumerate(config.tau_grid):
            for i, n_total in enumerate(config.n_totals):
                rows.append(
                    ConvergenceRow(
                        n_total, w, tau, float(mean[a, b, i]), float(std[a, b, i]), config.repeats
                    )
                )
    return ConvergenceCurve(
        tuple(rows), config.n_target_fit, {"config": config.to_dict(), "seed": config.seed}
    )


@dataclass(frozen=True)
class CurveFindings:
    """Summary of a convergence curve against the expected qualitative behavior.

    ``decreases`` maps (w, tau) to (first - last) / first. Rankings list grid
    values from smallest to largest final discrepancy.
    """

    decreases: Dict[Tuple[float, float], float]
    tau_ranking: Dict[float, Tuple[float, ...]]
    w_ranking: Dict[float, Tuple[float, ...]]
    optimal_tau: float
    balanced_w: float
    flags: Dict[str, bool]

    def to_dict(self) -> dict:
        return {
            "decreases": [
                {"w": w, "tau": tau, "relative_decrease": d}
                for (w, tau), d in self.decreases.items()
            ],
            "tau_ranking": {repr(w): list(r) for w, r in self.tau_ranking.items()},
            "w_ranking": {repr(tau): list(r) for tau, r in self.w_ranking.items()},
            "optimal_tau": self.optimal_tau,
            "balanced_w": self.balanced_w,
            "flags": dict(self.flags),
        }


def _nearest(grid: Sequence[float], value: float) -> float:
    return min(grid, key=lambda g: (abs(g - value), g))


def _best_within(
    finals: Dict[float, float], errors: Dict[float, float], choice: float, z: float
) -> bool:
    """``choice`` beats every other key, up to z combined standard errors."""
    return all(
        finals[choice] < v + z * math.hypot(errors[choice], errors[k])
        for k, v in finals.items()
        if k != choice
    )


def analyze_curve(
    curve: ConvergenceCurve, n_target_fit: Optional[int] = None, z: float = MC_Z
) -> CurveFindings:
    """Relative decreases, rankings, and the four qualitative flags.

    The optimal tau is the grid value nearest N'_T / (N'_T + N_1 + N_2) at the
    final step; the balanced w is the grid value nearest 1/2. Every flag
    comparison allows ``z`` standard errors of the repeat means; ``z = 0``
    compares the means strictly.
    """
    if not curve.is_complete():
        raise ValidationError("Curve is incomplete: every (w, tau, size) cell needs one row")
    if not (math.isfinite(z) and z >= 0):
        raise ValidationError(f"z must be finite and >= 0, got {z}")
    n_fit = n_target_fit if n_target_fit is not None else curve.n_target_fit
    w_grid, tau_grid = curve.w_grid, curve.tau_grid
    repeats = {(r.w, r.tau, r.n_total): r.repeats for r in curve.rows}

    first: Dict[Tuple[float, float], float] = {}
    final: Dict[Tuple[float, float], float] = {}
    first_se: Dict[Tuple[float, float], float] = {}
    final_se: Dict[Tuple[float, float], float] = {}
    decreases: Dict[Tuple[float, float], float] = {}
    for w in w_grid:
        for tau in tau_grid:
            sizes, mean, std = curve.series(w, tau)
            first[w, tau], final[w, tau] = float(mean[0]), float(mean[-1])
            first_se[w, tau] = float(std[0]) / math.sqrt(repeats[w, tau, int(sizes[0])])
            final_se[w, tau] = float(std[-1]) / math.sqrt(repeats[w, tau, int(sizes[-1])])
            decreases[w, tau] = float((mean[0] - mean[-1]) / mean[0]) if mean[0] > 0 else 0.0

    tau_ranking = {
        w: tuple(sorted(tau_grid, key=lambda t: (final[w, t], t))) for w in w_grid
    }
    w_ranking = {
        tau: tuple(sorted(w_grid, key=lambda v: (final[v, tau], v))) for tau in tau_grid
    }

    small = [t for t in tau_grid if t < LARGE_TAU]
    large = [t for t in tau_grid if t > LARGE_TAU]
    optimal_tau = _nearest(tau_grid, n_fit / (n_fit + curve.n_totals[-1]))
    balanced_w = _nearest(w_grid, 0.5)

    def decreasing(key: Tuple[float, float]) -> bool:
        slack = z * math.hypot(final_se[key], DECREASE_FACTOR * first_se[key])
        return final[key] <= DECREASE_FACTOR * first[key] + slack

    def fails(w: float) -> bool:
        hi, lo = (w, max(tau_grid)), (w, min(tau_grid))
        return final[hi] > final[lo] - z * math.hypot(final_se[hi], final_se[lo])

    def best_tau(w: float) -> bool:
        finals = {t: final[w, t] for t in tau_grid}
        return _best_within(finals, {t: final_se[w, t] for t in tau_grid}, optimal_tau, z)

    def best_w(tau: float) -> bool:
        finals = {v: final[v, tau] for v in w_grid}
        return _best_within(finals, {v: final_se[v, tau] for v in w_grid}, balanced_w, z)

    flags = {
        "tau_small_decreasing": bool(small)
        and all(decreasing((w, t)) for w in w_grid for t in small),
        "large_tau_fails": bool(large) and len(tau_grid) > 1 and all(fails(w) for w in w_grid),
        "optimal_tau_best": len(tau_grid) > 1 and all(best_tau(w) for w in w_grid),
        "balanced_w_best": bool(small) and len(w_grid) > 1 and all(best_w(t) for t in small),
    }
    logger.debug("curve findings (z = %.3g): %s", z, flags)
    return CurveFindings(decreases, tau_ranking, w_ranking, optimal_tau, balanced_w, flags)


def curve_from_rows(
    rows: Sequence[ConvergenceRow], n_target_fit: int = 100
) -> ConvergenceCurve:
    if any(not math.isfinite(r.mean_discrepancy) for r in rows):
        raise ValidationError("Curve rows must have finite mean discrepancies")
    return ConvergenceCurve(tuple(rows), n_target_fit)
