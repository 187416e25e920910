"""Closed-form generalization bounds for representative domain adaptation.

Every bound has the shape (1 - tau) D^(w) + stochastic term. Precondition
failures never raise: they set ``preconditions_ok`` to False and are described
in ``details``. Restrictions that a formula cannot be evaluated without (for
example the optimal mixture weights) raise ``ContractError``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ContractError, DimensionMismatchError, ValidationError
from .risk import MixtureWeights, optimal_parameters, split_sizes
from .utils import is_nonincreasing

logger = logging.getLogger(__name__)

C1_INTERVAL = (0.0075, 0.4804)
C2_INTERVAL = (0.0075, 0.3863)
X_MAX_ALT_BENNETT = 0.125
OPTIMAL_TOLERANCE = 1e-12
LN8 = math.log(8.0)


@dataclass(frozen=True, eq=False)
class BoundInput:
    """The numbers every bound formula consumes.

    ``sizes`` is (N_T, N_1, ..., N_K). ``ln_uen`` is the log uniform entropy
    number evaluated at ``uen_radius`` (recorded, never iterated on).
    """

    sizes: Tuple[int, ...]
    weights: MixtureWeights
    confidence: float = 0.05
    value_range: Tuple[float, float] = (0.0, 1.0)
    divergence: float = 0.0
    ln_uen: Optional[float] = None
    uen_radius: Optional[float] = None
    rademacher_sources: Optional[Tuple[float, ...]] = None
    rademacher_target: Optional[float] = None
    eta: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    x: Optional[float] = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        n_target, n_sources = split_sizes(sizes)
        if n_target < 1 or any(n < 1 for n in n_sources):
            raise ValidationError(f"Sample sizes must be >= 1, got {sizes}")
        self.weights.check_sources(len(n_sources))
        object.__setattr__(self, "sizes", sizes)
        if not 0.0 < self.confidence < 1.0:
            raise ValidationError(f"Confidence epsilon must lie in (0, 1), got {self.confidence}")
        a, b = (float(v) for v in self.value_range)
        if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
            raise ValidationError(f"Range needs finite a < b, got [{a}, {b}]")
        object.__setattr__(self, "value_range", (a, b))
        if not (math.isfinite(self.divergence) and self.divergence >= 0):
            raise ValidationError(f"Divergence must be finite and >= 0, got {self.divergence}")
        if self.ln_uen is not None and not math.isfinite(self.ln_uen):
            raise ValidationError("ln_uen must be finite")
        if self.eta is not None and not 0.0 < self.eta <= 2.0:
            raise ValidationError(f"eta must lie in (0, 2], got {self.eta}")
        if self.rademacher_sources is not None:
            values = tuple(float(v) for v in self.rademacher_sources)
            if len(values) != len(n_sources):
                raise DimensionMismatchError(
                    f"{len(values)} source Rademacher values for {len(n_sources)} sources"
                )
            object.__setattr__(self, "rademacher_sources", values)

    @property
    def K(self) -> int:
        return len(self.sizes) - 1

    @property
    def span(self) -> float:
        return self.value_range[1] - self.value_range[0]

    @property
    def total(self) -> int:
        """N_T + sum_k N_k."""
        return sum(self.sizes)

    @property
    def source_total(self) -> int:
        return sum(self.sizes[1:])

    @property
    def variance_factor(self) -> float:
        return self.weights.variance_factor(self.sizes)

    @property
    def discrepancy_term(self) -> float:
        return (1.0 - self.weights.tau) * self.divergence

    def require_ln_uen(self) -> float:
        if self.ln_uen is None:
            raise ValidationError("This bound needs ln_uen (the log uniform entropy number)")
        return self.ln_uen

    @property
    def log_term(self) -> float:
        """ln UEN - ln(epsilon / 8)."""
        return self.require_ln_uen() - math.log(self.confidence / 8.0)

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            **self.weights.to_dict(),
            "confidence": self.confidence,
            "range": list(self.value_range),
            "divergence": self.divergence,
            "ln_uen": self.ln_uen,
            "uen_radius": self.uen_radius,
            "rademacher_sources": (
                list(self.rademacher_sources) if self.rademacher_sources else None
            ),
            "rademacher_target": self.rademacher_target,
            "eta": self.eta,
            "c1": self.c1,
            "c2": self.c2,
            "x": self.x,
        }

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "BoundInput":
        """Build from a JSON document; omitted ``tau``/``w`` mean the optimal weights."""
        try:
            sizes = tuple(int(n) for n in document["sizes"])
        except KeyError:
            raise ValidationError("Bound input needs 'sizes' = [N_T, N_1, ..., N_K]") from None
        if "tau" in document or "w" in document:
            weights = MixtureWeights(document.get("tau", 0.0), document["w"])
        else:
            weights = optimal_parameters(sizes)
        rademacher_sources = document.get("rademacher_sources")
        return cls(
            sizes=sizes,
            weights=weights,
            confidence=float(document.get("confidence", 0.05)),
            value_range=tuple(document.get("range", (0.0, 1.0))),  # type: ignore[arg-type]
            divergence=float(document.get("divergence", 0.0)),
            ln_uen=document.get("ln_uen"),
            uen_radius=document.get("uen_radius"),
            rademacher_sources=tuple(rademacher_sources) if rademacher_sources else None,
            rademacher_target=document.get("rademacher_target"),
            eta=document.get("eta"),
            c1=document.get("c1"),
            c2=document.get("c2"),
            x=document.get("x"),
        )


@dataclass(frozen=True)
class BoundResult:
    """A high-probability upper bound on sup_f |E^tau_w f - E^(T) f|."""

    kind: str
    discrepancy_term: float
    stochastic_term: float
    preconditions_ok: bool = True
    details: Dict[str, Any] = field(default_factory=dict)

    @property
    def value(self) -> float:
        return self.discrepancy_term + self.stochastic_term

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "discrepancy_term": self.discrepancy_term,
            "stochastic_term": self.stochastic_term,
            "preconditions_ok": self.preconditions_ok,
            **self.details,
        }


@dataclass(frozen=True)
class TailBound:
    """A probability bound, reported clamped to [0, 1] with the raw value kept."""

    kind: str
    value: float
    raw: float
    log_value: float
    preconditions_ok: bool = True
    details: Dict[str, Any] = field(default_factory=dict)


def gamma_fn(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Gamma(x) = x - (x + 1) ln(x + 1), defined for x >= 0."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ValidationError("Gamma is defined for finite x >= 0")
    small = arr < 1e-4
    with np.errstate(invalid="ignore"):
        direct = arr - (arr + 1.0) * np.log1p(arr)
    # -sum_{n>=2} (-x)^n / (n (n - 1)) avoids cancellation near 0
    series = sum(-((-arr) ** n) / (n * (n - 1)) for n in range(2, 9))
    out = np.where(small, series, direct)
    return float(out) if np.ndim(x) == 0 else out


def eta_fn(c1: float, x: float) -> float:
    """eta(c1; x) = ln(((x + 1) ln(x + 1) - x) / c1) / ln(x), so Gamma(x) = -c1 x^eta."""
    if not c1 > 0:
        raise ValidationError(f"c1 must be > 0, got {c1}")
    if not x > 0:
        raise ValidationError(f"eta(c1; x) needs x > 0, got {x}")
    if x == 1.0:
        raise ValidationError("eta(c1; x) is singular at x = 1 (ln x = 0)")
    if x > 1.0:
        logger.warning("eta(c1; x) evaluated at x = %g outside (0, 1)", x)
    return math.log(-gamma_fn(x) / c1) / math.log(x)


def is_optimal_weights(
    weights: MixtureWeights, sizes: Sequence[int], tol: float = OPTIMAL_TOLERANCE
) -> bool:
    """True when (tau, w) equals (N_T / sum N, N_k / sum_k N_k) within ``tol``."""
    best = optimal_parameters(sizes)
    if weights.K != best.K:
        return False
    return abs(weights.tau - best.tau) <= tol and bool(np.all(np.abs(weights.w - best.w) <= tol))


def _require_optimal(inp: BoundInput, what: str):
    if not is_optimal_weights(inp.weights, inp.sizes):
        raise ContractError(
            f"{what} holds only at w_k = N_k / sum N and tau = N_T / (N_T + sum N); "
            "use optimal_parameters(sizes)"
        )


def _log_term_checked(inp: BoundInput, issues: List[str]) -> float:
    if inp.require_ln_uen() < 0:
        issues.append("ln_uen < 0 (a covering number is at least 1)")
    log_term = inp.log_term
    if log_term < 0:
        issues.append("ln_uen - ln(eps/8) < 0; stochastic term set to 0")
    return max(0.0, log_term)


def hoeffding_bound(inp: BoundInput) -> BoundResult:
    """(1 - tau) D + sqrt((ln UEN - ln(eps/8)) * 32 (b-a)^2 * variance factor)."""
    issues: List[str] = []
    log_term = _log_term_checked(inp, issues)
    variance = inp.variance_factor
    stochastic = math.sqrt(log_term * 32.0 * inp.span**2 * variance)
    condition = inp.span**2 * variance / stochastic**2 if stochastic > 0 else math.inf
    if condition > 0.125:
        issues.append(f"weighted-size condition {condition:.4g} > 1/8")
    return BoundResult(
        "hoeffding",
        inp.discrepancy_term,
        stochastic,
        not issues,
        {
            "log_term": inp.log_term,
            "variance_factor": variance,
            "condition_value": condition,
            "uen_radius": inp.uen_radius,
            "issues": issues,
        },
    )


def optimal_rate_bound(inp: BoundInput) -> BoundResult:
    """The Hoeffding-type bound written at the optimal weights."""
    _require_optimal(inp, "The optimal-rate bound")
    issues: List[str] = []
    log_term = _log_term_checked(inp, issues)
    discrepancy = inp.source_total * inp.divergence / inp.total
    stochastic = math.sqrt(log_term * 32.0 * inp.span**2 / inp.total)
    return BoundResult(
        "optimal_rate",
        discrepancy,
        stochastic,
        not issues,
        {"log_term": inp.log_term, "uen_radius": inp.uen_radius, "issues": issues},
    )


def _safe_exp(value: float) -> float:
    try:
        return math.exp(value)
    except OverflowError:
        return math.inf


def bennett_tail(inp: BoundInput, xi: float, space: str = "log") -> TailBound:
    """8 UEN exp((N_T + sum N) Gamma(xi' / (b - a))) with xi' = xi - (1 - tau) D.

    ``space="log"`` sums the exponent first; ``space="direct"`` multiplies the
    factors as written and can overflow or underflow.
    """
    _require_optimal(inp, "The Bennett-type tail bound")
    if space not in ("log", "direct"):
        raise ValidationError(f"space must be 'log' or 'direct', got {space!r}")
    ln_uen = inp.require_ln_uen()
    issues: List[str] = []
    xi_prime = xi - inp.discrepancy_term
    if xi_prime <= 0:
        issues.append("xi must exceed (1 - tau) D")
        exponent = 0.0
    else:
        exponent = inp.total * gamma_fn(xi_prime / inp.span)
        if inp.total < inp.span**2 / (8.0 * xi_prime**2):
            issues.append("N_T + sum N < (b-a)^2 / (8 xi'^2)")

    log_value = LN8 + ln_uen + exponent
    if space == "log":
        raw = _safe_exp(log_value)
    else:
        uen_factor, decay = _safe_exp(ln_uen), math.exp(exponent)
        if math.isinf(uen_factor) and decay == 0.0:
            issues.append("UEN factor overflows while the exponential underflows; use space='log'")
            raw = math.nan
        else:
            raw = 8.0 * uen_factor * decay
    return TailBound(
        "bennett",
        1.0 if math.isnan(raw) else min(1.0, max(0.0, raw)),
        raw,
        log_value,
        not issues,
        {"xi": xi, "xi_prime": xi_prime, "space": space, "issues": issues},
    )


def bernstein_bound(inp: BoundInput) -> BoundResult:
    """(1 - tau) D + 4 (b-a) L / (3 N) + (b-a) sqrt(2 L) / sqrt(N), L = ln UEN - ln(eps/8)."""
    _require_optimal(inp, "The Bernstein-type bound")
    issues: List[str] = []
    log_term = _log_term_checked(inp, issues)
    n = inp.total
    stochastic = 4.0 * inp.span * log_term / (3.0 * n) + inp.span * math.sqrt(2.0 * log_term / n)
    return BoundResult(
        "bernstein",
        inp.discrepancy_term,
        stochastic,
        not issues,
        {"log_term": inp.log_term, "uen_radius": inp.uen_radius, "issues": issues},
    )


def alt_bennett_bound(inp: BoundInput) -> BoundResult:
    """(1 - tau) D + (b-a) (L / N)^(1/eta) with eta >= eta(c1; x), x in (0, 1/8].

    Without ``eta`` the smallest admissible exponent eta(c1; x) is used. The
    confidence this exponent actually certifies, 8 UEN exp(N Gamma(x)), is
    reported as ``implied_epsilon``.
    """
    _require_optimal(inp, "The alternative Bennett-type bound")
    issues: List[str] = []
    log_term = _log_term_checked(inp, issues)
    details: Dict[str, Any] = {"log_term": inp.log_term, "uen_radius": inp.uen_radius}

    eta = inp.eta
    if inp.c1 is not None and inp.x is not None:
        if not C1_INTERVAL[0] < inp.c1 < C1_INTERVAL[1]:
            issues.append(f"c1 = {inp.c1} outside {C1_INTERVAL}")
        if not 0.0 < inp.x <= X_MAX_ALT_BENNETT:
            issues.append(f"x = {inp.x} outside (0, 1/8]")
        eta_min = eta_fn(inp.c1, inp.x)
        details["eta_min"] = eta_min
        if eta is None:
            eta = eta_min
        elif eta < eta_min - 1e-12:
            issues.append(f"eta = {eta} below eta(c1; x) = {eta_min:.6g}")
        log_eps = LN8 + inp.require_ln_uen() + inp.total * gamma_fn(inp.x)
        details["implied_epsilon"] = min(1.0, _safe_exp(log_eps))
    else:
        issues.append("no (c1, x) provenance for eta")
    if eta is None:
        raise ValidationError("alt_bennett_bound needs eta or (c1, x)")
    if not 0.0 < eta <= 2.0:
        raise ValidationError(f"eta must lie in (0, 2], got {eta}")
    if eta == 2.0:
        issues.append("eta = 2 is the comparison boundary, not a certified exponent")

    stochastic = inp.span * (log_term / inp.total) ** (1.0 / eta)
    details.update({"eta": eta, "issues": issues})
    return BoundResult("alt_bennett", inp.discrepancy_term, stochastic, not issues, details)


def _rademacher_terms(inp: BoundInput) -> Tuple[float, float]:
    if inp.rademacher_sources is None or inp.rademacher_target is None:
        raise ValidationError(
            "Rademacher bounds need rademacher_sources (one per source) and rademacher_target"
        )
    tau = inp.weights.tau
    sources = 2.0 * (1.0 - tau) * math.fsum(
        w_k * r for w_k, r in zip(inp.weights.w, inp.rademacher_sources)
    )
    return sources, 2.0 * tau * inp.rademacher_target


def rademacher_bound_hoeffding(inp: BoundInput) -> BoundResult:
    """Bound from per-source Rademacher complexities and the target empirical one."""
    source_term, target_term = _rademacher_terms(inp)
    tau, eps, span2 = inp.weights.tau, inp.confidence, inp.span**2
    n_target = inp.sizes[0]
    target_deviation = 2.0 * tau * math.sqrt(span2 * math.log(4.0 / eps) / (2.0 * n_target))
    mixed_deviation = math.sqrt(span2 * math.log(2.0 / eps) / 2.0 * inp.variance_factor)
    return BoundResult(
        "rademacher_hoeffding",
        inp.discrepancy_term,
        source_term + target_term + target_deviation + mixed_deviation,
        True,
        {
            "complexity_term": source_term + target_term,
            "target_deviation": target_deviation,
            "mixed_deviation": mixed_deviation,
        },
    )


def rademacher_bound_bennett(inp: BoundInput, allow_out_of_range: bool = False) -> BoundResult:
    """The Rademacher bound with eta-th roots and constant c2 in (0.0075, 0.3863).

    ``allow_out_of_range`` evaluates other c2 values (for shape comparisons)
    and marks the result non-certified.
    """
    if inp.c2 is None:
        raise ValidationError("rademacher_bound_bennett needs c2")
    issues: List[str] = []
    c2 = inp.c2
    if not C2_INTERVAL[0] < c2 < C2_INTERVAL[1]:
        if not allow_out_of_range:
            raise ContractError(f"c2 = {c2} must lie in {C2_INTERVAL}")
        issues.append(f"c2 = {c2} outside {C2_INTERVAL}")

    details: Dict[str, Any] = {}
    eta = inp.eta
    if inp.x is not None:
        if not 0.0 < inp.x <= 1.0:
            issues.append(f"x = {inp.x} outside (0, 1]")
        if inp.x != 1.0:
            eta_min = eta_fn(c2, inp.x)
            details["eta_min"] = eta_min
            if eta is None:
                eta = eta_min
            elif eta < eta_min - 1e-12:
                issues.append(f"eta = {eta} below eta(c2; x) = {eta_min:.6g}")
        details["implied_epsilon"] = min(1.0, _safe_exp(inp.total * gamma_fn(inp.x)))
    if eta is None:
        raise ValidationError("rademacher_bound_bennett needs eta or x")
    if not 0.0 < eta <= 2.0:
        raise ValidationError(f"eta must lie in (0, 2], got {eta}")
    if eta == 2.0:
        issues.append("eta = 2 is the comparison boundary, not a certified exponent")

    source_term, target_term = _rademacher_terms(inp)
    tau, eps = inp.weights.tau, inp.confidence
    root = 1.0 / eta
    target_deviation = 2.0 * tau * (math.log(4.0 / eps) / (c2 * inp.sizes[0])) ** root
    mixed_deviation = (math.log(2.0 / eps) / c2 * inp.variance_factor) ** root
    details.update(
        {
            "eta": eta,
            "complexity_term": source_term + target_term,
            "target_deviation": inp.span * target_deviation,
            "mixed_deviation": inp.span * mixed_deviation,
            "issues": issues,
        }
    )
    stochastic = source_term + target_term + inp.span * (target_deviation + mixed_deviation)
    return BoundResult("rademacher_bennett", inp.discrepancy_term, stochastic, not issues, details)


@dataclass(frozen=True)
class AsymptoticReport:
    """ln UEN * variance factor along a growth sequence.

    ``bounded`` is a finite-limit heuristic: the last quarter of the ratios
    must not increase.
    """

    ratios: Tuple[float, ...]
    running_max: Tuple[float, ...]
    bounded: bool
    heuristic: str = "last-quartile non-increasing trend"


def asymptotic_condition(
    growth: Sequence[Sequence[int]],
    ln_uen: Sequence[float],
    weights: Optional[Union[MixtureWeights, Sequence[MixtureWeights]]] = None,
) -> AsymptoticReport:
    """Track ln UEN / (1 / variance factor) along growing sample sizes.

    ``weights=None`` uses the optimal weights at each step.
    """
    if len(growth) != len(ln_uen):
        raise DimensionMismatchError(f"{len(growth)} size tuples but {len(ln_uen)} ln UEN values")
    if len(growth) < 2:
        raise ValidationError("The asymptotic check needs at least two steps")
    if weights is None:
        per_step = [optimal_parameters(sizes) for sizes in growth]
    elif isinstance(weights, MixtureWeights):
        per_step = [weights] * len(growth)
    else:
        per_step = list(weights)
        if len(per_step) != len(growth):
            raise DimensionMismatchError("One MixtureWeights per step is required")

    ratios = tuple(
        float(u) * w.variance_factor(sizes) for sizes, u, w in zip(growth, ln_uen, per_step)
    )
    running_max = tuple(float(v) for v in np.maximum.accumulate(ratios))
    start = min(3 * len(ratios) // 4, len(ratios) - 2)
    bounded = is_nonincreasing(ratios[start:])
    return AsymptoticReport(ratios, running_max, bounded)
