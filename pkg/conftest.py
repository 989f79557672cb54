"""Shared fixtures: seeded generators, stable filters and the fixture models."""

from pathlib import Path

import numpy as np
import pytest
from scipy.signal import lfilter

FIXTURE_MODELS = Path(__file__).parent / "data" / "model" / "fixtures"


def random_stable_lpc(rng, order=16, max_radius=0.9, min_radius=0.3):
    """A(z) coefficients from random conjugate pole pairs inside the given radius."""
    radii = rng.uniform(min_radius, max_radius, order // 2)
    angles = rng.uniform(0.05, np.pi - 0.05, order // 2)
    poles = radii * np.exp(1j * angles)
    return np.poly(np.concatenate([poles, poles.conj()])).real[1:]


def ar_noise(rng, num_samples, coefficients=(-1.3, 0.8), scale=0.1):
    """AR(2) noise, a crude voiced-speech stand-in with a resonance."""
    return lfilter([1.0], [1.0, *coefficients], rng.standard_normal(num_samples) * scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def uniform_model_path():
    return FIXTURE_MODELS / "uniform_k1.json"


@pytest.fixture
def two_equal_model_path():
    return FIXTURE_MODELS / "two_equal_k1.json"


@pytest.fixture
def flat_k2_model_path():
    return FIXTURE_MODELS / "flat_k2.json"
