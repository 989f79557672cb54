"""High-rate distortion-rate bound for a Dirichlet mixture VQ and its LSD mapping.

The distortion of the constrained-entropy mixture quantizer, per dimension in
the delta-LSF domain, is

    D_x(R) = C(K) * 2 ** (-(2 / K) * (R - log2(I) - sum_i pi_i h_i))

with h_i the component differential entropies in bits. D_x is moved to the
LSF domain (rad^2) and mapped to log spectral distortion by a cubic.
"""

import math
from dataclasses import dataclass
from typing import List, NamedTuple, Sequence

import numpy as np
import structlog
from numpy.polynomial import Polynomial
from scipy.optimize import bisect
from scipy.special import gammaln

from .config import BoundConfig, LsdPolynomial, RateGrid
from .dmm_em import DirichletMixtureModel, mixture_entropy_terms
from .errors import BracketingError, DomainError, InsufficientRateError, MonotonicityError, NumericError

logger = structlog.get_logger(__name__)

TARGET_TOLERANCE_DB = 1e-9
BISECT_XTOL = 1e-12


@dataclass(frozen=True)
class DistortionRatePoint:
    rate_bits: float
    mse_delta: float
    mse_lsf: float
    lsd_db: float
    in_domain: bool = True

    def __post_init__(self):
        values = (self.rate_bits, self.mse_delta, self.mse_lsf, self.lsd_db)
        if not all(np.isfinite(v) and v >= 0.0 for v in values):
            raise DomainError(f"distortion-rate point must be finite and nonnegative, got {values}")


class LsdEstimate(NamedTuple):
    lsd_db: float
    in_domain: bool


class TransparentRate(NamedTuple):
    rate_bits: float
    rate_ceil: int
    lsd_db: float


def quantization_coefficient(dim: int, mode: str = "paper_formula") -> float:
    """Coefficient of quantization C for K-dimensional cells.

    ``paper_formula`` is (1/pi)(K/(K+2))((K/2) Gamma(K/2))^(2/K);
    ``sphere_bound`` is Gamma(K/2+1)^(2/K) / ((K+2) pi), smaller by a factor K.
    """
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    # (K/2) Gamma(K/2) = Gamma(K/2 + 1)
    gamma_term = math.exp((2.0 / dim) * gammaln(dim / 2.0 + 1.0))
    if mode == "paper_formula":
        return (1.0 / math.pi) * (dim / (dim + 2.0)) * gamma_term
    if mode == "sphere_bound":
        return gamma_term / ((dim + 2.0) * math.pi)
    raise DomainError(f"unknown coefficient mode {mode!r}")


def _quantizer_rate(model: DirichletMixtureModel, rate_bits) -> np.ndarray:
    rates = np.asarray(rate_bits, dtype=float)
    index_bits = math.log2(model.num_components)
    if np.any(~(rates > index_bits)):
        raise InsufficientRateError(
            f"rate {float(np.min(rates)):.6g} bits does not exceed log2(I) = {index_bits:.6g} for I={model.num_components}"
        )
    return rates - index_bits


def component_rates(model: DirichletMixtureModel, rate_bits: float) -> np.ndarray:
    """Bits per component, R_i = R_q + h_i - sum_j pi_j h_j with R_q = R - log2(I)."""
    quantizer_rate = float(_quantizer_rate(model, rate_bits))
    entropies, mean_entropy = mixture_entropy_terms(model)
    return quantizer_rate + entropies - mean_entropy


def _distortions(model: DirichletMixtureModel, rate_bits, coefficient_mode: str) -> np.ndarray:
    quantizer_rate = _quantizer_rate(model, rate_bits)
    _, mean_entropy = mixture_entropy_terms(model)
    coefficient = quantization_coefficient(model.dim, coefficient_mode)
    return coefficient * np.exp2(-(2.0 / model.dim) * (quantizer_rate - mean_entropy))


def distortion_rate(model: DirichletMixtureModel, rate_bits: float, cfg: BoundConfig = BoundConfig()) -> float:
    """Per-dimension delta-LSF MSE at rate R (bits/vector)."""
    return float(_distortions(model, rate_bits, cfg.coefficient_mode))


def transform_distortion(mse_delta, dim: int, mode: str = "isotropic_cell"):
    """Move a per-dimension delta-LSF MSE into the LSF domain (rad^2).

    s = pi * cumsum(x); with an isotropic cell error the per-dimension LSF
    error picks up pi^2 (K+1)/2. ``jacobian_only`` keeps the pi^2 scale alone.
    """
    values = np.asarray(mse_delta, dtype=float)
    if np.any(~(values >= 0.0)):
        raise DomainError("distortion must be nonnegative")
    if dim < 1:
        raise DomainError(f"dimension must be >= 1, got {dim}")
    if mode == "isotropic_cell":
        scale = math.pi ** 2 * (dim + 1) / 2.0
    elif mode == "jacobian_only":
        scale = math.pi ** 2
    else:
        raise DomainError(f"unknown transform mode {mode!r}")
    out = scale * values
    return float(out) if np.ndim(out) == 0 else out


def _lsd_values(mse_lsf, poly: LsdPolynomial) -> np.ndarray:
    return Polynomial(poly.effective_coefficients())(np.asarray(mse_lsf, dtype=float))


def mse_to_lsd(mse_lsf: float, poly: LsdPolynomial = LsdPolynomial()) -> LsdEstimate:
    if not mse_lsf >= 0.0:
        raise DomainError(f"MSE must be nonnegative, got {mse_lsf}")
    in_domain = mse_lsf <= poly.mse_max
    if not in_domain:
        logger.warning("MSE outside the polynomial's fitted domain", mse=mse_lsf, mse_max=poly.mse_max)
    return LsdEstimate(lsd_db=float(_lsd_values(mse_lsf, poly)), in_domain=in_domain)


def rate_grid_points(grid: RateGrid) -> np.ndarray:
    """min, min + step, ... while <= max (with a 1e-9 step slack)."""
    if grid.max < grid.min:
        raise DomainError(f"empty rate grid: max {grid.max} < min {grid.min}")
    count = int(math.floor((grid.max - grid.min) / grid.step + 1e-9)) + 1
    return grid.min + grid.step * np.arange(count)


def lsd_rate_curve(
    model: DirichletMixtureModel,
    cfg: BoundConfig = BoundConfig(),
    poly: LsdPolynomial = LsdPolynomial(),
) -> List[DistortionRatePoint]:
    rates = rate_grid_points(cfg.rate_grid)
    mse_delta = _distortions(model, rates, cfg.coefficient_mode)
    mse_lsf = transform_distortion(mse_delta, model.dim, cfg.transform_mode)
    mse_lsf = np.atleast_1d(mse_lsf)
    lsd = np.atleast_1d(_lsd_values(mse_lsf, poly))
    in_domain = mse_lsf <= poly.mse_max

    if not in_domain.all():
        logger.warning(
            "curve points outside the polynomial's fitted domain",
            count=int((~in_domain).sum()),
            points=len(rates),
            mse_max=poly.mse_max,
        )
    if np.any(np.diff(lsd) >= 0.0):
        bad = int(np.argmax(np.diff(lsd) >= 0.0))
        raise MonotonicityError(f"LSD does not decrease between {rates[bad]:.6g} and {rates[bad + 1]:.6g} bits")

    return [
        DistortionRatePoint(
            rate_bits=float(r),
            mse_delta=float(dx),
            mse_lsf=float(ds),
            lsd_db=float(value),
            in_domain=bool(ok),
        )
        for r, dx, ds, value, ok in zip(rates, mse_delta, mse_lsf, lsd, in_domain)
    ]


def _lsd_at(model: DirichletMixtureModel, rate_bits: float, cfg: BoundConfig, poly: LsdPolynomial) -> float:
    mse_delta = _distortions(model, rate_bits, cfg.coefficient_mode)
    return float(_lsd_values(transform_distortion(mse_delta, model.dim, cfg.transform_mode), poly))


def min_transparent_rate(
    model: DirichletMixtureModel,
    cfg: BoundConfig = BoundConfig(),
    poly: LsdPolynomial = LsdPolynomial(),
) -> TransparentRate:
    """Smallest rate on [rate_grid.min, rate_grid.max] whose LSD reaches the target."""
    poly.check_monotone()
    rate_grid_points(cfg.rate_grid)
    target = cfg.lsd_target_db
    low, high = cfg.rate_grid.min, cfg.rate_grid.max
    lsd_low = _lsd_at(model, low, cfg, poly)
    lsd_high = _lsd_at(model, high, cfg, poly)

    if lsd_low == target:
        rate = low
    elif lsd_high == target:
        rate = high
    elif lsd_low > target > lsd_high:
        rate = bisect(
            lambda r: _lsd_at(model, r, cfg, poly) - target,
            low,
            high,
            xtol=BISECT_XTOL,
            maxiter=500,
        )
    else:
        raise BracketingError(
            f"target {target} dB is not bracketed by LSD {lsd_low:.6g} dB at {low} bits "
            f"and {lsd_high:.6g} dB at {high} bits",
            lsd_at_min=lsd_low,
            lsd_at_max=lsd_high,
        )

    lsd = _lsd_at(model, rate, cfg, poly)
    if abs(lsd - target) >= TARGET_TOLERANCE_DB:
        raise NumericError(f"bisection stopped at {rate:.12g} bits with LSD {lsd:.12g} dB, target {target} dB")
    logger.info("minimum transparent rate", rate_bits=rate, target_db=target, components=model.num_components)
    return TransparentRate(rate_bits=float(rate), rate_ceil=int(math.ceil(rate - 1e-9)), lsd_db=lsd)


def max_curve_gap(curve_a: Sequence[DistortionRatePoint], curve_b: Sequence[DistortionRatePoint]) -> float:
    """Largest absolute LSD difference between two curves on the same rate grid."""
    if len(curve_a) == 0 or len(curve_a) != len(curve_b):
        raise DomainError(f"curves must be non-empty and equally long, got {len(curve_a)} and {len(curve_b)}")
    rates_a = np.array([p.rate_bits for p in curve_a])
    rates_b = np.array([p.rate_bits for p in curve_b])
    if not np.allclose(rates_a, rates_b, rtol=0.0, atol=1e-12):
        raise DomainError("curves are evaluated on different rate grids")
    lsd_a = np.array([p.lsd_db for p in curve_a])
    lsd_b = np.array([p.lsd_db for p in curve_b])
    return float(np.max(np.abs(lsd_a - lsd_b)))
