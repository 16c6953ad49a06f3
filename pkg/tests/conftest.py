import numpy as np
import pytest

from lengthwise.model import ModelConfig


@pytest.fixture
def tiny_config() -> ModelConfig:
    """Smallest architecture the shape rules accept quickly; minimum input 73."""
    return ModelConfig(channels=3, samples=80, trunk_filters=2,
                       word_filters=(2, 3, 3), temporal_kernel=8, word_kernel=2)


@pytest.fixture
def reduced_config() -> ModelConfig:
    """Down-scaled architecture for finite-difference checks; minimum input 120."""
    return ModelConfig(channels=8, samples=128, trunk_filters=4,
                       word_filters=(6, 8, 10), temporal_kernel=16, word_kernel=3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
