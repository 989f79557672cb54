"""Minimum bit rate of LSF vector quantization from a Dirichlet mixture model."""

__version__ = "1.0.0"

from .config import BoundConfig, EmConfig, FrameConfig, LsdPolynomial, RateGrid, SpectrumGrid
from .dmm_em import DirichletMixtureModel, fit_em, load_model
from .rate_bound import lsd_rate_curve, min_transparent_rate

__all__ = [
    "BoundConfig",
    "DirichletMixtureModel",
    "EmConfig",
    "FrameConfig",
    "LsdPolynomial",
    "RateGrid",
    "SpectrumGrid",
    "fit_em",
    "load_model",
    "lsd_rate_curve",
    "min_transparent_rate",
]
