"""Pytest configuration and fixtures."""

import numpy as np
import pytest

import repda.config
from repda.domains import DiscreteDomainSpec, DomainId, MultiSourceBundle, sample_discrete
from repda.hypotheses import FiniteHypothesisClass, LossFunction, LossKind


@pytest.fixture
def coin_domains():
    """Target and two sources on the inputs {0, 1}, with different atom weights and labels."""
    target = DiscreteDomainSpec.from_arrays([[0.0], [1.0]], [0.0, 1.0], (0.5, 0.5))
    source1 = DiscreteDomainSpec.from_arrays([[0.0], [1.0]], [0.0, 1.0], (0.3, 0.7))
    source2 = DiscreteDomainSpec.from_arrays([[0.0], [1.0]], [0.0, 0.5], (0.6, 0.4))
    return target, source1, source2


@pytest.fixture
def absolute_class():
    """Three constant-slope lines under the absolute loss clamped to [0, 1]."""
    return FiniteHypothesisClass.linear_grid(
        1, (0.0, 0.5, 1.0), loss=LossFunction(LossKind.ABSOLUTE, (0.0, 1.0))
    )


@pytest.fixture
def coin_bundle(coin_domains):
    """A small sampled bundle from the coin domains."""
    target, source1, source2 = coin_domains
    return MultiSourceBundle(
        (
            sample_discrete(source1, 6, seed=11, domain_id=DomainId.source(1)),
            sample_discrete(source2, 5, seed=11, domain_id=DomainId.source(2)),
        ),
        sample_discrete(target, 4, seed=11, domain_id=DomainId.target()),
    )


@pytest.fixture
def rng():
    """A fixed numpy generator for building test data."""
    return np.random.default_rng(1234)


@pytest.fixture
def isolated_config(monkeypatch, tmp_path):
    """Point the settings file at a temp path and clear REPDA_* environment variables."""
    for key in ("REPDA_SEED", "REPDA_THREADS", "REPDA_OUT_DIR", "REPDA_FORMAT", "REPDA_VERBOSE"):
        monkeypatch.delenv(key, raising=False)
    config_file = tmp_path / "settings" / "config.json"
    monkeypatch.setattr(repda.config, "REPDA_DIR", config_file.parent)
    monkeypatch.setattr(repda.config, "CONFIG_FILE", config_file)
    monkeypatch.setattr(repda.config, "VERBOSE", False)
    return config_file
