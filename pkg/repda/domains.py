"""Domains: labeled samples, datasets, and the synthetic/discrete domain specs.

Distribution parameters written ``N(mean, var)`` are always (mean, variance).
"""

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .config import load_document
from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyDatasetError,
    EvaluationError,
    ReportWriteError,
    ValidationError,
)
from .utils import BETA_STREAM, TARGET_CODE, child_rng

logger = logging.getLogger(__name__)

PROBABILITY_TOLERANCE = 1e-12

Label = Union[float, Tuple[float, ...]]


class DomainKind(str, Enum):
    SOURCE = "source"
    TARGET = "target"


@dataclass(frozen=True)
class DomainId:
    """Which domain a dataset belongs to. Sources are numbered from 1."""

    kind: DomainKind
    index: int = 0

    def __post_init__(self):
        if self.kind is DomainKind.SOURCE and self.index < 1:
            raise ValidationError(f"Source index must be >= 1, got {self.index}")
        if self.kind is DomainKind.TARGET and self.index != 0:
            raise ValidationError("Target domain carries no index")

    @classmethod
    def target(cls) -> "DomainId":
        return cls(DomainKind.TARGET)

    @classmethod
    def source(cls, k: int) -> "DomainId":
        return cls(DomainKind.SOURCE, k)

    @classmethod
    def parse(cls, text: str) -> "DomainId":
        """Parse ``"target"`` or ``"source:k"``."""
        text = text.strip().lower()
        if text == "target":
            return cls.target()
        if text.startswith("source:"):
            try:
                return cls.source(int(text.split(":", 1)[1]))
            except ValueError:
                pass
        raise ValidationError(f"Unrecognised domain id {text!r} (use 'target' or 'source:k')")

    @property
    def code(self) -> int:
        """Integer used as the first spawn key of this domain's random streams."""
        return TARGET_CODE if self.kind is DomainKind.TARGET else self.index

    def __str__(self) -> str:
        return "target" if self.kind is DomainKind.TARGET else f"source:{self.index}"


def _finite_array(values: Any, what: str, ndim: Optional[int] = None) -> np.ndarray:
    array = np.array(values, dtype=float)
    if ndim is not None and array.ndim != ndim:
        raise DimensionMismatchError(f"{what} must be {ndim}-dimensional, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{what} contains non-finite values")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class LabeledSample:
    """One pair z = (x, y)."""

    x: np.ndarray
    y: Label

    def __post_init__(self):
        object.__setattr__(self, "x", _finite_array(self.x, "Sample input", ndim=1))
        if np.ndim(self.y) == 0:
            y = float(self.y)  # type: ignore[arg-type]
            if not math.isfinite(y):
                raise ValidationError("Sample label is not finite")
            object.__setattr__(self, "y", y)
        else:
            label = _finite_array(self.y, "Sample label", ndim=1)
            object.__setattr__(self, "y", tuple(float(v) for v in label))

    @property
    def dim(self) -> int:
        return int(self.x.shape[0])

    def key(self) -> Tuple[float, ...]:
        """Hashable form of the input, used by tabulated hypotheses."""
        return tuple(float(v) for v in self.x)


@dataclass(frozen=True, eq=False)
class DomainDataset:
    """Labeled samples from one domain, stored column-wise.

    ``inputs`` has shape (N, I); ``labels`` has shape (N,) for scalar labels or
    (N, J) for vector labels. Arrays are read-only.
    """

    inputs: np.ndarray
    labels: np.ndarray
    domain_id: DomainId = field(default_factory=DomainId.target)

    def __post_init__(self):
        inputs = _finite_array(self.inputs, "Dataset inputs")
        if inputs.ndim == 1 and inputs.size == 0:
            inputs = np.zeros((0, 0))
            inputs.setflags(write=False)
        if inputs.ndim != 2:
            raise DimensionMismatchError(f"Dataset inputs must be (N, I), got {inputs.shape}")
        labels = _finite_array(self.labels, "Dataset labels")
        if labels.ndim not in (1, 2) or labels.shape[0] != inputs.shape[0]:
            raise DimensionMismatchError(
                f"Dataset has {inputs.shape[0]} inputs but labels of shape {labels.shape}"
            )
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_samples(
        cls, samples: Sequence[LabeledSample], domain_id: Optional[DomainId] = None
    ) -> "DomainDataset":
        domain_id = domain_id or DomainId.target()
        if not samples:
            return cls(np.zeros((0, 0)), np.zeros(0), domain_id)
        dims = {s.dim for s in samples}
        if len(dims) != 1:
            raise DimensionMismatchError(f"Samples have mixed input dimensions {sorted(dims)}")
        inputs = np.stack([s.x for s in samples])
        labels = np.array([s.y for s in samples], dtype=float)
        return cls(inputs, labels, domain_id)

    @property
    def size(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])

    @property
    def samples(self) -> List[LabeledSample]:
        return [LabeledSample(x, y) for x, y in zip(self.inputs, self.labels)]

    def __len__(self) -> int:
        return self.size

    def require_nonempty(self):
        if self.size == 0:
            raise EmptyDatasetError(f"Dataset for {self.domain_id} is empty")

    def take(self, indices: Union[Sequence[int], np.ndarray]) -> "DomainDataset":
        """Subset (or resample) rows by index."""
        idx = np.asarray(indices, dtype=int)
        return DomainDataset(self.inputs[idx], self.labels[idx], self.domain_id)

    def split(self, first: int) -> Tuple["DomainDataset", "DomainDataset"]:
        """Split into the first ``first`` rows and the remainder (disjoint)."""
        if not 0 <= first <= self.size:
            raise ValidationError(f"Cannot split {self.size} rows at {first}")
        return self.take(np.arange(first)), self.take(np.arange(first, self.size))

    def repeated(self, times: int) -> "DomainDataset":
        """Every sample repeated ``times`` times (used to check scaling invariance)."""
        return DomainDataset(
            np.repeat(self.inputs, times, axis=0),
            np.repeat(self.labels, times, axis=0),
            self.domain_id,
        )


@dataclass(frozen=True, eq=False)
class MultiSourceBundle:
    """K source datasets and one target dataset sharing an input dimension."""

    sources: Tuple[DomainDataset, ...]
    target: DomainDataset

    def __post_init__(self):
        sources = tuple(self.sources)
        if not sources:
            raise ValidationError("A bundle needs at least one source domain")
        object.__setattr__(self, "sources", sources)
        for k, source in enumerate(sources, 1):
            if source.domain_id.kind is not DomainKind.SOURCE:
                raise ValidationError(f"Source slot {k} holds a {source.domain_id} dataset")
        if self.target.domain_id.kind is not DomainKind.TARGET:
            raise ValidationError("Target slot must hold a target dataset")
        dims = {d.dim for d in (*sources, self.target) if d.size > 0}
        if len(dims) > 1:
            raise DimensionMismatchError(f"Bundle datasets have input dimensions {sorted(dims)}")

    @property
    def K(self) -> int:
        return len(self.sources)

    @property
    def dim(self) -> int:
        for dataset in (self.target, *self.sources):
            if dataset.size > 0:
                return dataset.dim
        return 0

    @property
    def sizes(self) -> Tuple[int, ...]:
        """(N_T, N_1, ..., N_K)."""
        return (self.target.size, *(s.size for s in self.sources))


@dataclass(frozen=True, eq=False)
class DiscreteDomainSpec:
    """A finite distribution over labeled atoms, for exact expectations."""

    atoms: Tuple[Tuple[LabeledSample, float], ...]

    def __post_init__(self):
        atoms = tuple((s, float(p)) for s, p in self.atoms)
        if not atoms:
            raise EmptyDatasetError("A discrete domain needs at least one atom")
        probs = np.array([p for _, p in atoms])
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ValidationError("Atom probabilities must be finite and nonnegative")
        if abs(math.fsum(probs) - 1.0) > PROBABILITY_TOLERANCE:
            raise ValidationError(f"Atom probabilities sum to {math.fsum(probs)!r}, not 1")
        dims = {s.dim for s, _ in atoms}
        if len(dims) != 1:
            raise DimensionMismatchError(f"Atoms have mixed input dimensions {sorted(dims)}")
        object.__setattr__(self, "atoms", atoms)

    @classmethod
    def from_arrays(
        cls, inputs: Any, labels: Any, probabilities: Sequence[float]
    ) -> "DiscreteDomainSpec":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        labels = np.asarray(labels, dtype=float)
        if not (len(inputs) == len(labels) == len(probabilities)):
            raise DimensionMismatchError("inputs, labels and probabilities differ in length")
        return cls(
            tuple((LabeledSample(x, y), p) for x, y, p in zip(inputs, labels, probabilities))
        )

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def dim(self) -> int:
        return self.atoms[0][0].dim

    @property
    def inputs(self) -> np.ndarray:
        return np.stack([s.x for s, _ in self.atoms])

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.y for s, _ in self.atoms], dtype=float)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.atoms])

    def as_dataset(self, domain_id: Optional[DomainId] = None) -> DomainDataset:
        """The atoms as a dataset (one row per atom, probabilities dropped)."""
        return DomainDataset(self.inputs, self.labels, domain_id or DomainId.target())

    def atom_values(self, f: Callable[[LabeledSample], float]) -> np.ndarray:
        """Tabulate ``f`` on every atom; non-finite values raise EvaluationError."""
        values = np.array([float(f(sample)) for sample, _ in self.atoms])
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise EvaluationError(f"Function is not finite at atom {bad}")
        return values

    def draw_indices(self, rng: np.random.Generator, size: Any) -> np.ndarray:
        """Atom indices drawn i.i.d. from the atom distribution."""
        return rng.choice(self.n_atoms, size=size, p=self.probabilities)


@dataclass(frozen=True)
class GaussianDomainSpec:
    """Isotropic Gaussian inputs with y = <x, beta> + R.

    ``beta_mode`` is ``"per_sample"`` (beta redrawn for every sample) or
    ``"shared"`` (one beta per master seed, common to every domain).
    """

    input_mean: float
    input_var: float
    dim: int
    beta_mean: float
    beta_var: float
    noise_mean: float = 0.0
    noise_var: float = 0.5
    beta_mode: str = "per_sample"

    def __post_init__(self):
        for name in ("input_mean", "input_var", "beta_mean", "beta_var", "noise_mean", "noise_var"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"GaussianDomainSpec.{name} is not finite")
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        if self.input_var <= 0 or self.beta_var <= 0:
            raise ValidationError("input_var and beta_var must be > 0")
        if self.noise_var < 0:
            raise ValidationError("noise_var must be >= 0")
        if self.beta_mode not in ("per_sample", "shared"):
            raise ValidationError(
                f"beta_mode must be 'per_sample' or 'shared', got {self.beta_mode!r}"
            )


DomainSpec = Union[GaussianDomainSpec, DiscreteDomainSpec]


def shared_beta(spec: GaussianDomainSpec, seed: int) -> np.ndarray:
    """The beta used by every ``shared``-mode dataset under ``seed``."""
    rng = child_rng(seed, BETA_STREAM)
    return rng.normal(spec.beta_mean, math.sqrt(spec.beta_var), spec.dim)


def synthesize_domain(
    spec: GaussianDomainSpec,
    n: int,
    seed: int,
    domain_id: Optional[DomainId] = None,
    replicate: int = 0,
) -> DomainDataset:
    """Draw ``n`` samples from a Gaussian domain.

    The stream is the child of ``seed`` keyed by (domain code, replicate), so
    the same arguments always produce the same dataset.
    """
    if n < 1:
        raise EmptyDatasetError(f"Cannot synthesize a dataset of {n} samples")
    domain_id = domain_id or DomainId.target()
    rng = child_rng(seed, domain_id.code, replicate)
    beta = shared_beta(spec, seed) if spec.beta_mode == "shared" else None
    inputs, labels = draw_gaussian(spec, n, rng, beta)
    logger.debug("synthesized %d samples for %s (replicate %d)", n, domain_id, replicate)
    return DomainDataset(inputs, labels, domain_id)


def draw_gaussian(
    spec: GaussianDomainSpec, n: int, rng: np.random.Generator, beta: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Draw (inputs, labels) from ``rng``. A given ``beta`` is used for every sample."""
    inputs = rng.normal(spec.input_mean, math.sqrt(spec.input_var), size=(n, spec.dim))
    if beta is not None:
        signal = inputs @ beta
    else:
        betas = rng.normal(spec.beta_mean, math.sqrt(spec.beta_var), size=(n, spec.dim))
        signal = np.einsum("ij,ij->i", inputs, betas)
    noise = rng.normal(spec.noise_mean, math.sqrt(spec.noise_var), size=n)
    return inputs, signal + noise


def sample_discrete(
    spec: DiscreteDomainSpec,
    n: int,
    seed: int,
    domain_id: Optional[DomainId] = None,
    replicate: int = 0,
) -> DomainDataset:
    """Draw ``n`` i.i.d. samples from a discrete domain."""
    if n < 1:
        raise EmptyDatasetError(f"Cannot sample a dataset of {n} samples")
    domain_id = domain_id or DomainId.target()
    idx = spec.draw_indices(child_rng(seed, domain_id.code, replicate), n)
    return DomainDataset(spec.inputs[idx], spec.labels[idx], domain_id)


def draw_from(
    spec: DomainSpec,
    n: int,
    rng: np.random.Generator,
    domain_id: Optional[DomainId] = None,
    seed: int = 0,
) -> DomainDataset:
    """Draw ``n`` samples of either spec kind from an explicit generator.

    ``seed`` only selects the shared beta of ``shared``-mode Gaussian specs.
    """
    domain_id = domain_id or DomainId.target()
    if isinstance(spec, DiscreteDomainSpec):
        idx = spec.draw_indices(rng, n)
        return DomainDataset(spec.inputs[idx], spec.labels[idx], domain_id)
    beta = shared_beta(spec, seed) if spec.beta_mode == "shared" else None
    inputs, labels = draw_gaussian(spec, n, rng, beta)
    return DomainDataset(inputs, labels, domain_id)


def enumerate_expectation(spec: DiscreteDomainSpec, f: Callable[[LabeledSample], float]) -> float:
    """E f = sum over atoms of p * f(z), summed with ``math.fsum``."""
    values = spec.atom_values(f)
    return math.fsum(p * v for (_, p), v in zip(spec.atoms, values))


def experiment_target_spec(dim: int = 100, noise_var: float = 0.5) -> GaussianDomainSpec:
    """Target domain of the least-squares experiment: x ~ N(0, 1), beta ~ N(1, 5)."""
    return GaussianDomainSpec(0.0, 1.0, dim, 1.0, 5.0, 0.0, noise_var)


def experiment_source_specs(
    dim: int = 100, noise_var: float = 0.5
) -> Tuple[GaussianDomainSpec, ...]:
    """Two sources: x ~ N(0.2, 0.9) and x ~ N(-0.2, 1.2)."""
    return (
        GaussianDomainSpec(0.2, 0.9, dim, 1.0, 5.0, 0.0, noise_var),
        GaussianDomainSpec(-0.2, 1.2, dim, 1.0, 5.0, 0.0, noise_var),
    )


def domain_spec_from_dict(document: Mapping[str, Any]) -> DomainSpec:
    """Build a spec from its JSON form.

    Gaussian: ``{"kind": "gaussian", "input_mean": .., "input_var": .., "dim": ..,
    "beta_mean": .., "beta_var": .., "noise_mean": .., "noise_var": .., "beta_mode": ..}``.
    Discrete: ``{"kind": "discrete", "atoms": [{"x": [..], "y": .., "p": ..}, ...]}``.
    """
    kind = document.get("kind")
    if kind == "gaussian":
        fields = {k: v for k, v in document.items() if k != "kind"}
        try:
            return GaussianDomainSpec(**fields)
        except TypeError as e:
            raise ValidationError(f"Bad gaussian spec: {e}") from None
    if kind == "discrete":
        try:
            atoms = tuple(
                (LabeledSample(atom["x"], atom["y"]), float(atom["p"]))
                for atom in document["atoms"]
            )
        except (KeyError, TypeError) as e:
            raise ValidationError(f"Bad discrete spec: missing {e}") from None
        return DiscreteDomainSpec(atoms)
    raise ValidationError(f"Domain spec kind must be 'gaussian' or 'discrete', got {kind!r}")


def domain_spec_to_dict(spec: DomainSpec) -> dict:
    if isinstance(spec, GaussianDomainSpec):
        return {"kind": "gaussian", **asdict(spec)}
    return {
        "kind": "discrete",
        "atoms": [
            {"x": sample.x.tolist(), "y": sample.y, "p": p} for sample, p in spec.atoms
        ],
    }


def load_domain_spec(path: Path) -> DomainSpec:
    return domain_spec_from_dict(load_document(path))


def write_dataset_csv(dataset: DomainDataset, path: Path) -> Path:
    """Write ``x_0,...,x_{I-1},y`` rows (vector labels as ``y_0..y_{J-1}``)."""
    labels = dataset.labels
    label_cols = ["y"] if labels.ndim == 1 else [f"y_{j}" for j in range(labels.shape[1])]
    header = ",".join([f"x_{i}" for i in range(dataset.dim)] + label_cols)
    table = np.column_stack([dataset.inputs, labels]) if dataset.size else np.zeros((0, 0))
    try:
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
    except OSError as e:
        raise ReportWriteError(Path(path), e) from e
    return Path(path)


def read_dataset_csv(path: Path, domain_id: Optional[DomainId] = None) -> DomainDataset:
    """Read a dataset written by ``write_dataset_csv``."""
    try:
        with open(path) as f:
            header = f.readline().strip().split(",")
    except OSError as e:
        raise ConfigError(f"Could not read dataset {path}: {e}") from None
    n_inputs = sum(1 for name in header if name.startswith("x_"))
    with warnings.catch_warnings():
        # header-only files are valid empty datasets
        warnings.simplefilter("ignore", UserWarning)
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.size == 0:
        return DomainDataset(np.zeros((0, n_inputs)), np.zeros(0), domain_id or DomainId.target())
    labels = table[:, n_inputs:]
    if labels.shape[1] == 1:
        labels = labels[:, 0]
    return DomainDataset(table[:, :n_inputs], labels, domain_id or DomainId.target())

