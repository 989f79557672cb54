"""LPC <-> LSF conversion, the delta-LSF simplex map and log spectral distortion.

LSFs are the unit-circle root angles of the symmetric and antisymmetric
polynomials built from A(z):

    P(z) = A(z) + z^-(K+1) A(z^-1)
    Q(z) = A(z) - z^-(K+1) A(z^-1)

For even K, P has a fixed root at z = -1 and Q one at z = +1. The K
remaining angles interleave, p_1 < q_1 < p_2 < ... < q_{K/2}.
"""

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import structlog
from numpy.polynomial import chebyshev
from numpy.polynomial import polynomial as poly
from scipy.optimize import bisect

from .config import SpectrumGrid
from .errors import DomainError, InstabilityError, OrderError
from .signal_frontend import LpcFrame

logger = structlog.get_logger(__name__)

MIN_LSF_GAP = 1e-9
SCAN_POINTS_PER_ORDER = 32
MAX_SCAN_REFINEMENTS = 4


def _frozen(values) -> np.ndarray:
    out = np.array(values, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LsfVector:
    """Line spectral frequencies s_1 < ... < s_K in (0, pi), radians."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        s = self.values
        if s.ndim != 1 or len(s) == 0 or not np.all(np.isfinite(s)):
            raise DomainError("LSF vector must be a non-empty finite vector")
        if not (s[0] > 0.0 and s[-1] < np.pi):
            raise DomainError(f"LSFs must lie in (0, pi), got [{s[0]:.6g}, {s[-1]:.6g}]")
        gaps = np.diff(s)
        if np.any(gaps < MIN_LSF_GAP):
            k = int(np.argmin(gaps))
            raise DomainError(f"LSFs not strictly ordered at positions {k + 1},{k + 2} (gap {gaps[k]:.3g} rad)")

    @property
    def order(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DeltaLsfVector:
    """Normalized LSF differences x_1..x_K; x_{K+1} = 1 - sum(x) completes the simplex."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        x = self.values
        if x.ndim != 1 or len(x) == 0 or not np.all(np.isfinite(x)):
            raise DomainError("delta-LSF vector must be a non-empty finite vector")
        if np.any(x <= 0.0):
            raise DomainError("delta-LSF coordinates must be positive")
        if not x.sum() < 1.0:
            raise DomainError(f"delta-LSF coordinates sum to {x.sum():.12g}, must be < 1")

    @property
    def completion(self) -> float:
        return 1.0 - float(self.values.sum())


def _as_lsf(s: Union[LsfVector, Sequence[float]]) -> LsfVector:
    return s if isinstance(s, LsfVector) else LsfVector(np.asarray(s, dtype=float))


def _as_coefficients(frame: Union[LpcFrame, Sequence[float]]) -> np.ndarray:
    if isinstance(frame, LpcFrame):
        return np.asarray(frame.coefficients)
    return np.asarray(frame, dtype=float)


def lpc_to_reflection(a) -> np.ndarray:
    """Reflection coefficients k_1..k_K by the step-down recursion."""
    current = np.array(_as_coefficients(a), dtype=float)
    order = len(current)
    k = np.zeros(order)
    for m in range(order, 0, -1):
        km = current[m - 1]
        k[m - 1] = km
        if not abs(km) < 1.0:
            raise InstabilityError(f"reflection coefficient k_{m} = {km:.6g} is not inside (-1, 1)")
        inner = current[: m - 1]
        current = (inner - km * inner[::-1]) / (1.0 - km * km)
    return k


def is_minimum_phase(a) -> bool:
    try:
        lpc_to_reflection(a)
    except InstabilityError:
        return False
    return True


def _symmetric_to_chebyshev(c: np.ndarray) -> np.ndarray:
    """Chebyshev series in cos(w) of a symmetric polynomial on the unit circle.

    For c_j = c_{K-j}, sum_j c_j e^{-jwj} = e^{-jwK/2} (c_{K/2} + 2 sum_m c_{K/2-m} cos(mw)).
    """
    half = (len(c) - 1) // 2
    series = np.empty(half + 1)
    series[0] = c[half]
    series[1:] = 2.0 * c[half - 1 :: -1]
    return series


def _unit_circle_roots(series: np.ndarray, scan_points: int) -> np.ndarray:
    def value(w):
        return chebyshev.chebval(np.cos(w), series)

    grid = np.linspace(0.0, np.pi, scan_points)
    values = value(grid)
    roots = []
    for i in range(len(grid) - 1):
        if values[i] == 0.0 and i > 0:
            roots.append(grid[i])
        elif values[i] * values[i + 1] < 0.0:
            roots.append(bisect(value, grid[i], grid[i + 1], xtol=1e-14, maxiter=200))
    return np.array(roots)


def _half_roots(series: np.ndarray, half: int) -> np.ndarray:
    scan_points = SCAN_POINTS_PER_ORDER * 2 * half
    for _ in range(MAX_SCAN_REFINEMENTS + 1):
        roots = _unit_circle_roots(series, scan_points)
        if len(roots) == half:
            return roots
        logger.debug("refining LSF root scan", found=len(roots), expected=half, scan_points=2 * scan_points)
        scan_points *= 2
    raise InstabilityError(f"found {len(roots)} unit-circle roots, expected {half}")


def lpc_to_lsf(frame: Union[LpcFrame, Sequence[float]]) -> LsfVector:
    """LSFs of a minimum-phase LPC filter of even order."""
    a = _as_coefficients(frame)
    order = len(a)
    if order % 2:
        raise OrderError(f"LSF conversion needs an even order, got K={order}")
    if not is_minimum_phase(a):
        raise InstabilityError("filter is not minimum-phase")

    g = np.concatenate(([1.0], a, [0.0]))
    p_full = g + g[::-1]
    q_full = g - g[::-1]
    p_reduced, _ = poly.polydiv(p_full, [1.0, 1.0])
    q_reduced, _ = poly.polydiv(q_full, [1.0, -1.0])

    half = order // 2
    p_roots = _half_roots(_symmetric_to_chebyshev(p_reduced), half)
    q_roots = _half_roots(_symmetric_to_chebyshev(q_reduced), half)

    s = np.empty(order)
    s[0::2] = np.sort(p_roots)
    s[1::2] = np.sort(q_roots)
    if np.any(np.diff(s) <= 0.0):
        raise InstabilityError("P and Q roots do not interleave")
    try:
        return LsfVector(s)
    except DomainError as e:
        raise InstabilityError(f"LSFs violate ordering: {e}") from e


def lsf_to_lpc(s: Union[LsfVector, Sequence[float]]) -> LpcFrame:
    """Rebuild A(z) = (P(z) + Q(z)) / 2 from the root angles."""
    lsf = _as_lsf(s)
    if lsf.order % 2:
        raise OrderError(f"LSF conversion needs an even order, got K={lsf.order}")
    p = np.array([1.0, 1.0])
    q = np.array([1.0, -1.0])
    for w in lsf.values[0::2]:
        p = np.convolve(p, [1.0, -2.0 * np.cos(w), 1.0])
    for w in lsf.values[1::2]:
        q = np.convolve(q, [1.0, -2.0 * np.cos(w), 1.0])
    g = 0.5 * (p + q)
    return LpcFrame(coefficients=g[1 : lsf.order + 1])


def delta_matrix(order: int) -> np.ndarray:
    """The K x K map x = A s: first differences scaled by 1/pi."""
    return (np.eye(order) - np.eye(order, k=-1)) / np.pi


def lsf_to_delta(s: Union[LsfVector, Sequence[float]]) -> DeltaLsfVector:
    lsf = _as_lsf(s)
    return DeltaLsfVector(np.diff(lsf.values, prepend=0.0) / np.pi)


def delta_to_lsf(x: Union[DeltaLsfVector, Sequence[float]]) -> LsfVector:
    delta = x if isinstance(x, DeltaLsfVector) else DeltaLsfVector(np.asarray(x, dtype=float))
    return LsfVector(np.pi * np.cumsum(delta.values))


def lpc_power_spectrum(frame: Union[LpcFrame, Sequence[float]], grid: SpectrumGrid = SpectrumGrid()) -> np.ndarray:
    """1 / |A(e^{j 2 pi f / F_s})|^2 at f = n F_s / N, n = 0..N-1."""
    a = _as_coefficients(frame)
    if grid.num_points < 2 * len(a):
        raise DomainError(f"spectrum grid of {grid.num_points} points is too coarse for K={len(a)}")
    response = np.fft.fft(np.concatenate(([1.0], a)), n=grid.num_points)
    return 1.0 / np.abs(response) ** 2


def _log_power_db(a: np.ndarray, num_points: int) -> np.ndarray:
    response = np.fft.fft(np.concatenate(([1.0], a)), n=num_points)
    return -10.0 * np.log10(np.abs(response) ** 2)


def log_spectral_distortion(
    frame: Union[LpcFrame, Sequence[float]],
    frame_hat: Union[LpcFrame, Sequence[float]],
    grid: SpectrumGrid = SpectrumGrid(),
) -> float:
    """RMS dB difference of two LPC power spectra over the full [0, F_s) range."""
    a, a_hat = _as_coefficients(frame), _as_coefficients(frame_hat)
    if len(a) != len(a_hat):
        raise DomainError(f"filter orders differ: {len(a)} vs {len(a_hat)}")
    if grid.num_points < 2 * len(a):
        raise DomainError(f"spectrum grid of {grid.num_points} points is too coarse for K={len(a)}")
    diff = _log_power_db(a, grid.num_points) - _log_power_db(a_hat, grid.num_points)
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass(frozen=True)
class LsdSummary:
    mean_db: float
    pct_outliers_2_4: float
    pct_outliers_over_4: float
    transparent: bool
    count: int


def lsd_statistics(lsd_values) -> LsdSummary:
    """Mean LSD and outlier percentages against the transparent-coding criteria.

    Transparent means: mean <= 1 dB, fewer than 2% of values in (2, 4] dB,
    and none above 4 dB.
    """
    values = np.asarray(lsd_values, dtype=float)
    if values.size == 0:
        raise DomainError("no LSD values to summarize")
    mean = float(values.mean())
    pct_2_4 = 100.0 * float(np.mean((values > 2.0) & (values <= 4.0)))
    pct_over_4 = 100.0 * float(np.mean(values > 4.0))
    transparent = mean <= 1.0 and pct_2_4 < 2.0 and pct_over_4 == 0.0
    return LsdSummary(
        mean_db=mean,
        pct_outliers_2_4=pct_2_4,
        pct_outliers_over_4=pct_over_4,
        transparent=transparent,
        count=int(values.size),
    )
