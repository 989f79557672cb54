"""Dirichlet density primitives on the open simplex.

Points are stored by their K free coordinates; the completion
x_{K+1} = 1 - sum(x) is appended internally. Parameters have K+1 entries.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import structlog
from scipy.special import digamma as _digamma
from scipy.special import gammaln, polygamma

from .errors import DomainError, NumericError

logger = structlog.get_logger(__name__)

SIMPLEX_FLOOR = 1e-12
ALPHA_MIN = 1e-6
ALPHA_MAX = 1e6
MAX_STEP_HALVINGS = 30
LN2 = np.log(2.0)


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.array(self.alpha, dtype=float)
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        if alpha.ndim != 1 or len(alpha) < 2:
            raise DomainError("Dirichlet parameters need at least two concentrations")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0.0):
            raise DomainError(f"Dirichlet concentrations must be positive and finite, got {alpha}")

    @property
    def dim(self) -> int:
        """K, the number of free simplex coordinates."""
        return len(self.alpha) - 1

    @property
    def alpha0(self) -> float:
        return float(self.alpha.sum())


class MomentFit(NamedTuple):
    params: DirichletParams
    degenerate: bool


class MleFit(NamedTuple):
    params: DirichletParams
    iterations: int
    gradient_norm: float
    loglik: float
    converged: bool


def _positive(z, name: str) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if np.any(~(z > 0.0)):
        raise DomainError(f"{name} is defined for z > 0 only")
    return z


def _scalar_or_array(values: np.ndarray):
    return float(values) if np.ndim(values) == 0 else values


def log_gamma(z):
    return _scalar_or_array(gammaln(_positive(z, "log_gamma")))


def digamma(z):
    return _scalar_or_array(_digamma(_positive(z, "digamma")))


def trigamma(z):
    return _scalar_or_array(polygamma(1, _positive(z, "trigamma")))


def with_completion(x) -> np.ndarray:
    """Rows of x with x_{K+1} = 1 - sum(x) appended; always 2-D."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.hstack([x, 1.0 - x.sum(axis=1, keepdims=True)])


def _strict_simplex(x) -> np.ndarray:
    full = with_completion(x)
    if not np.all(np.isfinite(full)):
        raise DomainError("simplex points must be finite")
    bad = np.flatnonzero(np.any(full <= 0.0, axis=1))
    if len(bad):
        raise DomainError(f"point {bad[0]} is not in the open simplex")
    return full


def clip_to_simplex(data, floor: float = SIMPLEX_FLOOR) -> Tuple[np.ndarray, int]:
    """Clip coordinates (and completion) below floor and renormalize those rows.

    Returns the cleaned free coordinates and the number of rows touched.
    """
    full = with_completion(data)
    if not np.all(np.isfinite(full)):
        raise DomainError("simplex points must be finite")
    bad = np.any(full < floor, axis=1)
    count = int(bad.sum())
    if count:
        fixed = np.maximum(full[bad], floor)
        full[bad] = fixed / fixed.sum(axis=1, keepdims=True)
    return full[:, :-1], count


def _check_dims(params: DirichletParams, full: np.ndarray) -> None:
    if full.shape[1] != len(params.alpha):
        raise DomainError(f"points have K={full.shape[1] - 1} but parameters have K={params.dim}")


def log_normalizer(alpha: np.ndarray) -> np.ndarray:
    """log Gamma(alpha_0) - sum_k log Gamma(alpha_k), along the last axis."""
    return gammaln(alpha.sum(axis=-1)) - gammaln(alpha).sum(axis=-1)


def dirichlet_log_pdf(params: DirichletParams, x):
    """Log density at x (one point or an N x K batch)."""
    full = _strict_simplex(x)
    _check_dims(params, full)
    values = log_normalizer(params.alpha) + np.log(full) @ (params.alpha - 1.0)
    return float(values[0]) if np.ndim(x) <= 1 else values


def dirichlet_sample(params: DirichletParams, seed=None, size: Optional[int] = None) -> np.ndarray:
    """Gamma-normalized draws; returns the K free coordinates."""
    rng = np.random.default_rng(seed)
    draws = rng.dirichlet(params.alpha, size=size)
    return draws[..., :-1]


def dirichlet_entropy_bits(params: DirichletParams) -> float:
    """Differential entropy of the K-dimensional density, in bits."""
    alpha, alpha0 = params.alpha, params.alpha0
    nats = (
        gammaln(alpha).sum()
        - gammaln(alpha0)
        + (alpha0 - len(alpha)) * _digamma(alpha0)
        - np.dot(alpha - 1.0, _digamma(alpha))
    )
    return float(nats / LN2)


def _normalized_weights(weights, n: int, min_positive: int) -> np.ndarray:
    if weights is None:
        weights = np.ones(n)
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise DomainError(f"expected {n} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise DomainError("weights must be finite and nonnegative")
    if np.count_nonzero(w) < min_positive:
        raise DomainError(f"need at least {min_positive} samples with positive weight")
    return w / w.sum()


def dirichlet_fit_moments(data, weights=None) -> MomentFit:
    """Method-of-moments estimate from the weighted mean and pooled variance.

    Zero variance falls back to alpha = 10 * mean and sets the degenerate flag.
    """
    full = with_completion(data)
    w = _normalized_weights(weights, len(full), min_positive=2)
    mean = w @ full
    variance = w @ (full - mean) ** 2
    pooled = variance.sum()
    # sum_k (m_k - E[x_k^2]) / sum_k var_k
    precision = ((mean * (1.0 - mean)).sum() - pooled) / pooled if pooled > 0 else np.nan

    usable = np.isfinite(precision) and precision > 0 and np.all(variance > 0)
    if not (usable and precision * mean.min() <= ALPHA_MAX):
        logger.warning("degenerate data in moment fit, using 10 * mean", pooled_variance=float(pooled))
        alpha = np.clip(10.0 * mean, ALPHA_MIN, ALPHA_MAX)
        return MomentFit(DirichletParams(alpha), degenerate=True)
    alpha = np.clip(precision * mean, ALPHA_MIN, ALPHA_MAX)
    return MomentFit(DirichletParams(alpha), degenerate=False)


def mean_loglik(alpha: np.ndarray, mean_log: np.ndarray) -> float:
    """Weight-normalized log-likelihood given E_w[log x] (completion included)."""
    return float(log_normalizer(alpha) + np.dot(alpha - 1.0, mean_log))


def mle_gradient(alpha, mean_log) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    return _digamma(alpha.sum()) - _digamma(alpha) + np.asarray(mean_log, dtype=float)


def newton_direction(alpha: np.ndarray, gradient: np.ndarray) -> np.ndarray:
    """H^-1 g for H = diag(-psi'(alpha)) + psi'(alpha_0) 11^T (Sherman-Morrison)."""
    q = -polygamma(1, alpha)
    z = polygamma(1, alpha.sum())
    b = np.sum(gradient / q) / (1.0 / z + np.sum(1.0 / q))
    return (gradient - b) / q


def dirichlet_fit_mle_stats(
    mean_log: np.ndarray,
    init: DirichletParams,
    tol: float = 1e-8,
    max_iterations: int = 100,
) -> MleFit:
    """Newton ascent on the weighted Dirichlet log-likelihood from its sufficient statistic."""
    mean_log = np.asarray(mean_log, dtype=float)
    if len(mean_log) != len(init.alpha):
        raise DomainError(f"statistic has {len(mean_log)} entries, parameters {len(init.alpha)}")
    if not np.all(np.isfinite(mean_log)):
        raise NumericError("non-finite mean log statistic", index=int(np.argmin(np.isfinite(mean_log))))

    alpha = np.clip(np.array(init.alpha), ALPHA_MIN, ALPHA_MAX)
    ll = mean_loglik(alpha, mean_log)
    if not np.isfinite(ll):
        raise NumericError("non-finite log-likelihood at the initial parameters")

    iterations = 0
    converged = False
    while True:
        gradient = mle_gradient(alpha, mean_log)
        if np.max(np.abs(gradient)) < tol:
            converged = True
            break
        if iterations >= max_iterations:
            break
        step = newton_direction(alpha, gradient)
        scale = 1.0
        for _ in range(MAX_STEP_HALVINGS + 1):
            candidate = np.clip(alpha - scale * step, ALPHA_MIN, ALPHA_MAX)
            candidate_ll = mean_loglik(candidate, mean_log)
            if np.isfinite(candidate_ll) and candidate_ll >= ll:
                break
            scale *= 0.5
        else:
            logger.debug("Newton step stalled", iterations=iterations, gradient_norm=float(np.max(np.abs(gradient))))
            break
        if np.array_equal(candidate, alpha):
            break
        alpha, ll = candidate, candidate_ll
        iterations += 1

    if not converged:
        at_bound = bool(np.any(alpha <= ALPHA_MIN) or np.any(alpha >= ALPHA_MAX))
        logger.warning(
            "Dirichlet MLE did not reach tolerance",
            iterations=iterations,
            gradient_norm=float(np.max(np.abs(gradient))),
            clamped=at_bound,
        )
    return MleFit(
        params=DirichletParams(alpha),
        iterations=iterations,
        gradient_norm=float(np.max(np.abs(gradient))),
        loglik=ll,
        converged=converged,
    )


def log_simplex(data) -> np.ndarray:
    """log of the completed points after clipping; raises on non-finite rows."""
    clean, clipped = clip_to_simplex(data)
    if clipped:
        logger.info("clipped points to the simplex interior", count=clipped, floor=SIMPLEX_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_x = np.log(with_completion(clean))
    bad = np.flatnonzero(~np.all(np.isfinite(log_x), axis=1))
    if len(bad):
        raise NumericError(f"non-finite log at sample {bad[0]}", index=int(bad[0]))
    return log_x


def dirichlet_fit_mle(
    data,
    weights=None,
    init: Optional[DirichletParams] = None,
    tol: float = 1e-8,
    max_iterations: int = 100,
) -> MleFit:
    """Weighted maximum-likelihood Dirichlet fit (the EM M-step inner solver).

    Stops when the gradient infinity-norm of the weight-normalized
    log-likelihood drops below tol. Steps are halved until the likelihood
    does not decrease; concentrations are clamped to [1e-6, 1e6].
    """
    log_x = log_simplex(data)
    w = _normalized_weights(weights, len(log_x), min_positive=1)
    if init is None:
        init = dirichlet_fit_moments(data, weights).params
    return dirichlet_fit_mle_stats(w @ log_x, init, tol=tol, max_iterations=max_iterations)
