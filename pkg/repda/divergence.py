"""Between-domain quantities over a finite hypothesis class.

Distributions are either empirical (a ``DomainDataset``, uniform over its rows)
or discrete (a ``DiscreteDomainSpec``). Every supremum is an exact maximum over
the class.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .domains import DiscreteDomainSpec, DomainDataset
from .errors import UnsupportedLossError
from .hypotheses import FiniteHypothesisClass, Hypothesis, LossKind
from .risk import MixtureWeights
from .utils import parallel_map

logger = logging.getLogger(__name__)

Distribution = Union[DomainDataset, DiscreteDomainSpec]

# Rows of the pair scan per worker task.
PAIR_BLOCK = 32


class DivergenceKind(str, Enum):
    IPM = "ipm"
    WEIGHTED_IPM = "weighted_ipm"
    DISCREPANCY = "discrepancy"
    Q_METRIC = "q_metric"
    H_DELTA_H = "h_delta_h"


@dataclass(frozen=True)
class DivergenceValue:
    kind: DivergenceKind
    value: float
    class_size: int
    lam: Optional[float] = None
    argmax: Optional[Tuple[int, ...]] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "class_size": self.class_size,
            "lambda": self.lam,
            "argmax": list(self.argmax) if self.argmax is not None else None,
        }


def support(dist: Distribution) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(inputs, labels, probabilities) of a distribution."""
    if isinstance(dist, DiscreteDomainSpec):
        return dist.inputs, dist.labels, dist.probabilities
    dist.require_nonempty()
    return dist.inputs, dist.labels, np.full(dist.size, 1.0 / dist.size)


def class_expectations(hclass: FiniteHypothesisClass, dist: Distribution) -> np.ndarray:
    """E f for every member f of the loss class."""
    inputs, labels, probs = support(dist)
    return hclass.loss_values(inputs, labels) @ probs


def ipm_from_means(means_s: Sequence[float], means_t: Sequence[float]) -> Tuple[float, int]:
    """max_i |E_S f_i - E_T f_i| and the maximizing index."""
    gaps = np.abs(np.asarray(means_s, dtype=float) - np.asarray(means_t, dtype=float))
    best = int(np.argmax(gaps))
    return float(gaps[best]), best


def ipm(
    hclass: FiniteHypothesisClass, dist_s: Distribution, dist_t: Distribution
) -> DivergenceValue:
    """D_F(S, T) = sup_f |E_S f - E_T f|."""
    value, best = ipm_from_means(
        class_expectations(hclass, dist_s), class_expectations(hclass, dist_t)
    )
    return DivergenceValue(DivergenceKind.IPM, value, hclass.size, argmax=(best,))


def weighted_ipm(
    hclass: FiniteHypothesisClass,
    sources: Sequence[Distribution],
    target: Distribution,
    weights: MixtureWeights,
) -> DivergenceValue:
    """D^(w)_F = sum_k w_k D_F(S_k, T)."""
    weights.check_sources(len(sources))
    target_means = class_expectations(hclass, target)
    total = 0.0
    for w_k, source in zip(weights.w, sources):
        if w_k > 0:
            total += w_k * ipm_from_means(class_expectations(hclass, source), target_means)[0]
    return DivergenceValue(DivergenceKind.WEIGHTED_IPM, float(total), hclass.size)


def _pair_means(
    hclass: FiniteHypothesisClass, dist: Distribution, threads: int
) -> np.ndarray:
    """Matrix of E loss(g_i(x), g_j(x)) over all ordered pairs."""
    inputs, _, probs = support(dist)
    predictions = hclass.predictions(inputs)
    starts = list(range(0, hclass.size, PAIR_BLOCK))

    def block(start: int) -> np.ndarray:
        rows = predictions[start : start + PAIR_BLOCK]
        return hclass.loss(rows[:, None, :], predictions[None, :, :]) @ probs

    return np.vstack(parallel_map(block, starts, threads))


def discrepancy_distance(
    hclass: FiniteHypothesisClass, dist_s: Distribution, dist_t: Distribution, threads: int = 1
) -> DivergenceValue:
    """sup over ordered pairs (g1, g2) of |E_S loss(g1, g2) - E_T loss(g1, g2)|."""
    gaps = np.abs(_pair_means(hclass, dist_s, threads) - _pair_means(hclass, dist_t, threads))
    i, j = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
    return DivergenceValue(
        DivergenceKind.DISCREPANCY, float(gaps[i, j]), hclass.size, argmax=(int(i), int(j))
    )


def q_label_metric(
    hclass: FiniteHypothesisClass,
    target: Distribution,
    g_star_s: Hypothesis,
    g_star_t: Hypothesis,
) -> DivergenceValue:
    """Q_G(g*_S, g*_T) = sup_g |E_T loss(g, g*_T) - E_T loss(g, g*_S)|.

    Only the target inputs are used; labels come from the two labeling functions.
    """
    inputs, _, probs = support(target)
    predictions = hclass.predictions(inputs)
    against_t = hclass.loss(predictions, g_star_t.predict_many(inputs)[None, :]) @ probs
    against_s = hclass.loss(predictions, g_star_s.predict_many(inputs)[None, :]) @ probs
    value, best = ipm_from_means(against_t, against_s)
    return DivergenceValue(DivergenceKind.Q_METRIC, value, hclass.size, argmax=(best,))


def lambda_closeness(
    hclass: FiniteHypothesisClass,
    dist_s: Distribution,
    dist_t: Distribution,
    g_star_s: Hypothesis,
    g_star_t: Hypothesis,
) -> Tuple[float, int]:
    """inf_g [E_S loss(g, g*_S) + E_T loss(g, g*_T)] and the minimizing index."""
    totals = np.zeros(hclass.size)
    for dist, labeling in ((dist_s, g_star_s), (dist_t, g_star_t)):
        inputs, _, probs = support(dist)
        labels = labeling.predict_many(inputs)[None, :]
        totals += hclass.loss(hclass.predictions(inputs), labels) @ probs
    best = int(np.argmin(totals))
    return float(totals[best]), best


def h_delta_h(
    hclass: FiniteHypothesisClass,
    dist_s: Distribution,
    dist_t: Distribution,
    g_star_s: Optional[Hypothesis] = None,
    g_star_t: Optional[Hypothesis] = None,
    threads: int = 1,
) -> DivergenceValue:
    """The pair scan of ``discrepancy_distance`` under absolute loss.

    With both labeling functions supplied, also reports the lambda-closeness value.
    """
    if hclass.loss.kind is not LossKind.ABSOLUTE:
        raise UnsupportedLossError(
            f"HΔH-divergence needs the absolute loss, class uses {hclass.loss.kind.value}"
        )
    scan = discrepancy_distance(hclass, dist_s, dist_t, threads)
    lam = None
    if g_star_s is not None and g_star_t is not None:
        lam = lambda_closeness(hclass, dist_s, dist_t, g_star_s, g_star_t)[0]
    return DivergenceValue(DivergenceKind.H_DELTA_H, scan.value, hclass.size, lam, scan.argmax)
