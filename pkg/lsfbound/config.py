"""Validated configuration records for every pipeline stage."""

from typing import Literal, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import MonotonicityError

# Third-order MSE -> LSD mapping, entries as printed (header "in x10^5").
LSD_POLY_COEFFICIENTS = (0.0000, 0.0023, -0.1291, 3.7704)


class FrameConfig(BaseModel):
    """Analysis framing for the LPC front end."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    window_ms: float = Field(25.0, gt=0)
    step_ms: float = Field(20.0, gt=0)
    lpc_order: int = Field(16, ge=1)
    silence_threshold_db: float = -60.0
    # relative white-noise term added to r_0 before the recursion; 0 disables
    lpc_guard: float = Field(1e-9, ge=0)
    downmix: bool = False

    @model_validator(mode="after")
    def _window_covers_step(self):
        if self.window_ms < self.step_ms:
            raise ValueError(f"window_ms ({self.window_ms}) must be >= step_ms ({self.step_ms})")
        return self

    def frame_length(self, sample_rate_hz: int) -> int:
        return int(round(self.window_ms * sample_rate_hz / 1000.0))

    def hop_length(self, sample_rate_hz: int) -> int:
        return max(1, int(round(self.step_ms * sample_rate_hz / 1000.0)))


class SpectrumGrid(BaseModel):
    """Uniform frequency grid over [0, F_s) for LPC power spectra."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_points: int = Field(512, ge=2)
    sample_rate_hz: int = Field(16000, gt=0)


class EmConfig(BaseModel):
    """Settings for fitting a Dirichlet mixture by EM."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    num_components: int = Field(..., ge=1)
    max_iterations: int = Field(200, ge=1)
    rel_tol: float = Field(1e-6, gt=0)
    seed: int = Field(0, ge=0)
    min_weight: float = Field(1e-8, gt=0, lt=1)
    kmeans_iterations: int = Field(20, ge=1)
    n_jobs: int = 1

    @model_validator(mode="after")
    def _floor_fits(self):
        if self.min_weight * self.num_components >= 1.0:
            raise ValueError("min_weight * num_components must be < 1")
        return self


class RateGrid(BaseModel):
    """Rates in bits/vector: min, min + step, ... up to max inclusive."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    min: float = 16.0
    max: float = 56.0
    step: float = Field(0.25, gt=0)


class BoundConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    coefficient_mode: Literal["paper_formula", "sphere_bound"] = "paper_formula"
    transform_mode: Literal["isotropic_cell", "jacobian_only"] = "isotropic_cell"
    lsd_target_db: float = Field(1.0, gt=0)
    rate_grid: RateGrid = RateGrid()
    reference_rate_bits: Optional[float] = None


class LsdPolynomial(BaseModel):
    """Cubic map from per-dimension LSF-domain MSE (rad^2) to LSD (dB).

    Effective coefficients are ``c_j * 10**scale_exponent``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    coefficients: Tuple[float, float, float, float] = LSD_POLY_COEFFICIENTS
    scale_exponent: int = 5
    mse_unit: Literal["lsf_rad2_per_dim"] = "lsf_rad2_per_dim"
    mse_max: float = Field(0.01, gt=0)

    @model_validator(mode="after")
    def _strictly_increasing(self):
        where = self.monotone_violation()
        if where is not None:
            raise ValueError(f"polynomial is not strictly increasing on [0, {self.mse_max}] (near {where:.6g})")
        return self

    def effective_coefficients(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float) * 10.0 ** self.scale_exponent

    def monotone_violation(self) -> Optional[float]:
        """Location where the derivative vanishes or is negative, None if monotone."""
        derivative = Polynomial(self.effective_coefficients()).deriv()
        if not np.any(derivative.coef):
            return 0.0
        for root in np.atleast_1d(derivative.roots()):
            if abs(root.imag) < 1e-12 and 0.0 <= root.real <= self.mse_max:
                return float(root.real)
        midpoint = 0.5 * self.mse_max
        if not float(derivative(midpoint)) > 0:
            return midpoint
        return None

    def check_monotone(self) -> None:
        where = self.monotone_violation()
        if where is not None:
            raise MonotonicityError(
                f"MSE->LSD polynomial is not strictly increasing on [0, {self.mse_max}] (near {where:.6g})"
            )
