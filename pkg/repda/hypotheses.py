"""Hypotheses, losses, and the loss-function class F = {z -> loss(g(x), y) : g in G}."""

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Protocol, Sequence, Tuple, Union

import numpy as np

from .config import load_document
from .domains import DomainDataset, LabeledSample
from .errors import (
    DimensionMismatchError,
    EmptyDatasetError,
    EvaluationError,
    ValidationError,
)
from .utils import chunk_sizes, parallel_map

logger = logging.getLogger(__name__)

# Columns per worker task in evaluate_class.
EVAL_CHUNK = 4096


class Hypothesis(Protocol):
    def predict(self, x: Any) -> float: ...

    def predict_many(self, inputs: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class LinearHypothesis:
    """g(x) = <weights, x> + bias."""

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        if weights.ndim != 1:
            raise DimensionMismatchError(f"Weights must be a vector, got shape {weights.shape}")
        if not np.all(np.isfinite(weights)) or not math.isfinite(self.bias):
            raise ValidationError("Hypothesis coordinates must be finite")
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "bias", float(self.bias))

    @property
    def dim(self) -> int:
        return int(self.weights.shape[0])

    def predict(self, x: Any) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != self.weights.shape:
            raise DimensionMismatchError(
                f"Input has shape {x.shape}, hypothesis expects ({self.dim},)"
            )
        return float(np.dot(self.weights, x) + self.bias)

    def predict_many(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.asarray(inputs, dtype=float)
        if inputs.ndim != 2 or inputs.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"Inputs have shape {inputs.shape}, hypothesis expects (N, {self.dim})"
            )
        return inputs @ self.weights + self.bias

    def signature(self) -> Tuple[float, ...]:
        return (*(float(v) for v in self.weights), self.bias)

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "LinearHypothesis":
        try:
            return cls(document["weights"], document.get("bias", 0.0))
        except KeyError:
            raise ValidationError("Linear hypothesis needs a 'weights' list") from None


@dataclass(frozen=True, eq=False)
class TabulatedHypothesis:
    """A hypothesis given by its value at each input it will ever see."""

    table: Mapping[Tuple[float, ...], float]
    name: str = ""

    def __post_init__(self):
        table = {tuple(float(v) for v in k): float(v) for k, v in dict(self.table).items()}
        if not table:
            raise EmptyDatasetError("A tabulated hypothesis needs at least one entry")
        if not all(math.isfinite(v) for v in table.values()):
            raise ValidationError("Tabulated predictions must be finite")
        object.__setattr__(self, "table", table)

    @classmethod
    def from_pairs(
        cls, inputs: Iterable[Any], predictions: Iterable[float], name: str = ""
    ) -> "TabulatedHypothesis":
        return cls({tuple(np.atleast_1d(x).tolist()): p for x, p in zip(inputs, predictions)}, name)

    def predict(self, x: Any) -> float:
        key = tuple(float(v) for v in np.atleast_1d(x))
        try:
            return self.table[key]
        except KeyError:
            name = self.name or "tabulated hypothesis"
            raise EvaluationError(f"{name} has no value at {key}") from None

    def predict_many(self, inputs: np.ndarray) -> np.ndarray:
        return np.array([self.predict(x) for x in np.atleast_2d(inputs)])

    def signature(self) -> Tuple[Tuple[Tuple[float, ...], float], ...]:
        return tuple(sorted(self.table.items()))


def predict(h: Hypothesis, x: Any) -> float:
    return h.predict(x)


class LossKind(str, Enum):
    SQUARED = "squared"
    ABSOLUTE = "absolute"


@dataclass(frozen=True)
class LossFunction:
    """A loss with an optional clamp range [a, b].

    ``clamp_range=None`` leaves values unclamped; the range is then recorded
    after the fact by ``FunctionValueMatrix.value_range``.
    """

    kind: LossKind = LossKind.SQUARED
    clamp_range: Optional[Tuple[float, float]] = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "kind", LossKind(self.kind))
        if self.clamp_range is not None:
            a, b = (float(v) for v in self.clamp_range)
            if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
                raise ValidationError(f"Loss range needs finite a < b, got [{a}, {b}]")
            object.__setattr__(self, "clamp_range", (a, b))

    @classmethod
    def unclamped(cls, kind: Union[LossKind, str] = LossKind.SQUARED) -> "LossFunction":
        return cls(LossKind(kind), None)

    @property
    def a(self) -> float:
        return self.clamp_range[0] if self.clamp_range else 0.0

    @property
    def b(self) -> float:
        return self.clamp_range[1] if self.clamp_range else math.inf

    @property
    def span(self) -> float:
        return self.b - self.a

    def __call__(self, prediction: Any, label: Any) -> np.ndarray:
        diff = np.asarray(prediction, dtype=float) - np.asarray(label, dtype=float)
        raw = diff * diff if self.kind is LossKind.SQUARED else np.abs(diff)
        if self.clamp_range is None:
            return raw
        return np.clip(raw, self.a, self.b)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "clamp": list(self.clamp_range) if self.clamp_range else None,
        }

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "LossFunction":
        kind = document.get("kind", "squared")
        clamp = document.get("clamp", [0.0, 1.0])
        try:
            return cls(LossKind(kind), tuple(clamp) if clamp is not None else None)
        except ValueError as e:
            raise ValidationError(f"Bad loss descriptor: {e}") from None


def loss_eval(loss: LossFunction, prediction: float, label: float) -> float:
    if not (math.isfinite(prediction) and math.isfinite(label)):
        raise ValidationError("loss_eval needs finite prediction and label")
    return float(loss(prediction, label))


@dataclass(frozen=True, eq=False)
class FiniteHypothesisClass:
    """A nonempty list of distinct hypotheses sharing one loss."""

    members: Tuple[Hypothesis, ...]
    loss: LossFunction = LossFunction()

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise EmptyDatasetError("A hypothesis class needs at least one member")
        seen: Dict[Any, int] = {}
        for i, member in enumerate(members):
            key = (type(member).__name__, member.signature())  # type: ignore[attr-defined]
            if key in seen:
                raise ValidationError(f"Members {seen[key]} and {i} are the same hypothesis")
            seen[key] = i
        object.__setattr__(self, "members", members)

    @classmethod
    def linear_grid(
        cls,
        dim: int,
        values: Sequence[float],
        biases: Sequence[float] = (0.0,),
        loss: Optional[LossFunction] = None,
    ) -> "FiniteHypothesisClass":
        """Every linear hypothesis with coordinates in ``values`` and bias in ``biases``."""
        members = [
            LinearHypothesis(np.array(weights), bias)
            for weights in itertools.product(values, repeat=dim)
            for bias in biases
        ]
        return cls(tuple(members), loss or LossFunction())

    @property
    def size(self) -> int:
        return len(self.members)

    def __len__(self) -> int:
        return self.size

    def predictions(self, inputs: np.ndarray) -> np.ndarray:
        """Matrix [|G| x N] of g_i(x_j)."""
        rows = np.stack([np.asarray(m.predict_many(inputs), dtype=float) for m in self.members])
        if not np.all(np.isfinite(rows)):
            raise EvaluationError("A hypothesis produced a non-finite prediction")
        return rows

    def loss_values(self, inputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
        """Matrix [|G| x N] of loss(g_i(x_j), y_j)."""
        labels = np.asarray(labels, dtype=float)
        if labels.ndim != 1:
            raise DimensionMismatchError("Losses are defined for scalar labels only")
        return self.loss(self.predictions(inputs), labels[None, :])

    def to_dict(self) -> dict:
        members = []
        for member in self.members:
            if not isinstance(member, LinearHypothesis):
                raise ValidationError("Only linear classes serialize to JSON")
            members.append(member.to_dict())
        return {"members": members, "loss": self.loss.to_dict()}

    @classmethod
    def from_dict(cls, document: Mapping[str, Any]) -> "FiniteHypothesisClass":
        """Schema: ``{"members": [{"weights": [...], "bias": b}, ...], "loss": {...}}``."""
        if "members" not in document:
            raise ValidationError("Hypothesis class document needs a 'members' list")
        members = tuple(LinearHypothesis.from_dict(m) for m in document["members"])
        return cls(members, LossFunction.from_dict(document.get("loss", {})))


def load_hypothesis_class(path: Path) -> FiniteHypothesisClass:
    return FiniteHypothesisClass.from_dict(load_document(path))


@dataclass(frozen=True, eq=False)
class FunctionValueMatrix:
    """Loss values f_i(z_j) of every class member on every point.

    ``point_tags[j]`` names the domain (and ghost slot) column j came from.
    """

    values: np.ndarray
    point_tags: Tuple[str, ...]
    loss_range: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] == 0:
            raise DimensionMismatchError(f"Values must be a nonempty matrix, got {values.shape}")
        if len(self.point_tags) != values.shape[1]:
            raise DimensionMismatchError(
                f"{len(self.point_tags)} tags for {values.shape[1]} columns"
            )
        if not np.all(np.isfinite(values)):
            raise EvaluationError("Function values must be finite")
        a, b = self.loss_range
        if values.size and (values.min() < a or values.max() > b):
            raise ValidationError(f"Function values fall outside [{a}, {b}]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "point_tags", tuple(self.point_tags))

    @property
    def n_functions(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_points(self) -> int:
        return int(self.values.shape[1])

    @property
    def value_range(self) -> Tuple[float, float]:
        """Observed (min, max) over all entries."""
        return float(self.values.min()), float(self.values.max())

    def columns(self, tag: str) -> np.ndarray:
        return np.array([j for j, t in enumerate(self.point_tags) if t == tag], dtype=int)


PointsLike = Union[DomainDataset, Sequence[LabeledSample]]


def evaluate_class(
    hclass: FiniteHypothesisClass,
    points: PointsLike,
    point_tags: Optional[Sequence[str]] = None,
    threads: int = 1,
) -> FunctionValueMatrix:
    """Evaluate every member's loss on every point.

    Columns are split into fixed chunks that may run on worker threads; the
    result does not depend on the split.
    """
    if isinstance(points, DomainDataset):
        dataset = points
    else:
        dataset = DomainDataset.from_samples(list(points))
    if dataset.size == 0:
        raise EmptyDatasetError("evaluate_class needs at least one point")
    if point_tags is None:
        point_tags = (str(dataset.domain_id),) * dataset.size

    bounds = np.cumsum([0, *chunk_sizes(dataset.size, EVAL_CHUNK)])
    blocks = parallel_map(
        lambda span: hclass.loss_values(
            dataset.inputs[span[0] : span[1]], dataset.labels[span[0] : span[1]]
        ),
        list(zip(bounds[:-1], bounds[1:])),
        threads,
    )
    values = np.hstack(blocks)
    loss_range = hclass.loss.clamp_range or (float(values.min()), float(values.max()))
    logger.debug("evaluated %d members on %d points", hclass.size, dataset.size)
    return FunctionValueMatrix(values, tuple(point_tags), loss_range)
