"""Dirichlet mixture model: EM fitting, entropy terms and the JSON model file."""

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, ValidationError, model_validator
from scipy.special import logsumexp
from sklearn.cluster import KMeans

from .config import EmConfig
from .dirichlet_core import (
    DirichletParams,
    clip_to_simplex,
    dirichlet_entropy_bits,
    dirichlet_fit_mle_stats,
    dirichlet_fit_moments,
    log_normalizer,
    with_completion,
)
from .errors import DomainError, FormatError, InputError, ModelInvariantError, NumericError

logger = structlog.get_logger(__name__)

MODEL_FORMAT_VERSION = 1
MONOTONE_SLACK = 1e-9


@dataclass(frozen=True)
class TrainingMeta:
    num_samples: int = 0
    loglik: Optional[float] = None
    iterations: int = 0
    seed: int = 0


@dataclass(frozen=True)
class DirichletMixtureModel:
    """I weighted Dirichlet components over the K-simplex; immutable once built."""

    weights: np.ndarray
    alphas: np.ndarray
    training_meta: TrainingMeta = TrainingMeta()

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        alphas = np.array(self.alphas, dtype=float)
        weights.setflags(write=False)
        alphas.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "alphas", alphas)

        if weights.ndim != 1 or len(weights) < 1:
            raise ModelInvariantError("a mixture needs at least one component weight")
        if alphas.ndim != 2 or alphas.shape[0] != len(weights) or alphas.shape[1] < 2:
            raise ModelInvariantError(
                f"alphas must be an I x (K+1) array matching {len(weights)} weights, got shape {alphas.shape}"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights < 0.0):
            raise ModelInvariantError("mixture weights must be finite and nonnegative")
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ModelInvariantError(f"mixture weights sum to {weights.sum():.17g}, not 1")
        if not np.all(np.isfinite(alphas)) or np.any(alphas <= 0.0):
            raise ModelInvariantError("component concentrations must be positive and finite")

    @classmethod
    def from_components(
        cls,
        components: Sequence[Tuple[float, DirichletParams]],
        training_meta: TrainingMeta = TrainingMeta(),
    ) -> "DirichletMixtureModel":
        dims = {params.dim for _, params in components}
        if len(dims) > 1:
            raise ModelInvariantError(f"components disagree on dimension: K in {sorted(dims)}")
        weights = [weight for weight, _ in components]
        alphas = [params.alpha for _, params in components]
        return cls(weights=weights, alphas=alphas, training_meta=training_meta)

    @property
    def num_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.alphas.shape[1] - 1

    def components(self) -> List[Tuple[float, DirichletParams]]:
        return [(float(w), DirichletParams(a)) for w, a in zip(self.weights, self.alphas)]

    def save(self, path) -> Path:
        path = Path(path)
        meta = self.training_meta
        document = ModelFile(
            format_version=MODEL_FORMAT_VERSION,
            K=self.dim,
            I=self.num_components,
            weights=self.weights.tolist(),
            alphas=self.alphas.tolist(),
            trained_on=TrainedOn(
                num_vectors=meta.num_samples,
                loglik=meta.loglik,
                iterations=meta.iterations,
                seed=meta.seed,
            ),
        )
        path.write_text(json.dumps(document.model_dump(), indent=2) + "\n", encoding="utf-8")
        return path


class TrainedOn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_vectors: int
    loglik: Optional[float] = None
    iterations: int
    seed: int


class ModelFile(BaseModel):
    """Schema of the JSON model file exchanged between `fit` and `bound`."""

    model_config = ConfigDict(extra="forbid")

    format_version: int
    K: int
    I: int
    weights: List[float]
    alphas: List[List[float]]
    trained_on: TrainedOn

    @model_validator(mode="after")
    def _shapes_agree(self):
        if self.format_version != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {self.format_version}")
        if len(self.weights) != self.I or len(self.alphas) != self.I:
            raise ValueError(f"expected {self.I} weights and alpha vectors")
        if any(len(alpha) != self.K + 1 for alpha in self.alphas):
            raise ValueError(f"every alpha vector must have K+1 = {self.K + 1} entries")
        return self


def load_model(path) -> DirichletMixtureModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(path, e.strerror or str(e)) from e
    try:
        document = ModelFile.model_validate_json(text)
    except ValidationError as e:
        raise FormatError(f"{path}: invalid model file ({e.error_count()} errors: {e.errors()[0]['msg']})") from e
    trained = document.trained_on
    return DirichletMixtureModel(
        weights=document.weights,
        alphas=document.alphas,
        training_meta=TrainingMeta(
            num_samples=trained.num_vectors,
            loglik=trained.loglik,
            iterations=trained.iterations,
            seed=trained.seed,
        ),
    )


def _log_data(data) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        log_x = np.log(with_completion(data))
    bad = np.flatnonzero(~np.all(np.isfinite(log_x), axis=1))
    if len(bad):
        raise NumericError(f"sample {bad[0]} is outside the open simplex", index=int(bad[0]))
    return log_x


def _split_clusters(data: np.ndarray, labels: np.ndarray, num_clusters: int, rng) -> np.ndarray:
    """Give every cluster at least two members by splitting the largest one."""
    labels = labels.copy()
    for _ in range(num_clusters):
        counts = np.bincount(labels, minlength=num_clusters)
        small = np.flatnonzero(counts < 2)
        if len(small) == 0:
            return labels
        target = small[0]
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        seed_point = data[members[rng.integers(len(members))]]
        centroid = data[members].mean(axis=0)
        to_seed = np.linalg.norm(data[members] - seed_point, axis=1)
        to_centroid = np.linalg.norm(data[members] - centroid, axis=1)
        moved = members[to_seed < to_centroid]
        if len(moved) < 2:
            moved = members[np.argsort(to_seed, kind="stable")[:2]]
        labels[moved] = target
        logger.debug("re-seeded cluster from the largest one", cluster=int(target), source=largest, moved=len(moved))
    return labels


def _kmeans_seed(seed: int) -> int:
    # scikit-learn wants a 32-bit seed; the CLI accepts any u64
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


def init_model(data, cfg: EmConfig) -> DirichletMixtureModel:
    """k-means++ partition of the points, one moment fit per cluster."""
    data = np.asarray(data, dtype=float)
    num_samples, num_components = len(data), cfg.num_components
    if num_samples < 10 * num_components:
        raise DomainError(f"{num_samples} samples are too few for {num_components} components (need >= 10 per component)")

    if num_components == 1:
        labels = np.zeros(num_samples, dtype=int)
    else:
        kmeans = KMeans(
            n_clusters=num_components,
            init="k-means++",
            n_init=1,
            max_iter=cfg.kmeans_iterations,
            random_state=_kmeans_seed(cfg.seed),
        )
        labels = kmeans.fit_predict(data)
        labels = _split_clusters(data, labels, num_components, np.random.default_rng(cfg.seed))

    components = []
    degenerate = 0
    for i in range(num_components):
        members = data[labels == i]
        fit = dirichlet_fit_moments(members)
        degenerate += fit.degenerate
        components.append((len(members) / num_samples, fit.params))
    if degenerate:
        logger.warning("degenerate clusters at initialization", count=degenerate)
    weights = np.array([w for w, _ in components])
    weights /= weights.sum()
    return DirichletMixtureModel(weights=weights, alphas=[p.alpha for _, p in components])


def _responsibilities(model: DirichletMixtureModel, log_x: np.ndarray) -> Tuple[np.ndarray, float]:
    if log_x.shape[1] != model.dim + 1:
        raise DomainError(f"data has K={log_x.shape[1] - 1}, model has K={model.dim}")
    with np.errstate(divide="ignore"):
        log_weights = np.log(model.weights)
    log_joint = log_x @ (model.alphas - 1.0).T + log_normalizer(model.alphas) + log_weights
    log_marginal = logsumexp(log_joint, axis=1)
    bad = np.flatnonzero(~np.isfinite(log_marginal))
    if len(bad):
        raise NumericError(f"all components underflow at sample {bad[0]}", index=int(bad[0]))
    responsibilities = np.exp(log_joint - log_marginal[:, None])
    return responsibilities, float(log_marginal.sum())


def e_step(model: DirichletMixtureModel, data) -> Tuple[np.ndarray, float]:
    """Posterior component probabilities (N x I) and the exact log-likelihood."""
    return _responsibilities(model, _log_data(data))


def floor_weights(raw: np.ndarray, min_weight: float) -> np.ndarray:
    """Raise weights below min_weight to it and rescale the rest to keep sum 1."""
    raw = np.asarray(raw, dtype=float)
    weights = raw.copy()
    floored = np.zeros(len(weights), dtype=bool)
    for _ in range(len(weights)):
        low = (weights < min_weight) & ~floored
        if not low.any():
            break
        floored |= low
        free = ~floored
        weights[floored] = min_weight
        weights[free] = raw[free] * (1.0 - min_weight * floored.sum()) / raw[free].sum()
    return weights


def _m_step_log(
    log_x: np.ndarray,
    responsibilities: np.ndarray,
    prev: DirichletMixtureModel,
    min_weight: float,
    n_jobs: int,
) -> DirichletMixtureModel:
    num_samples = len(log_x)
    mass = responsibilities.sum(axis=0)
    weights = floor_weights(mass / num_samples, min_weight)
    if np.any(mass / num_samples < min_weight):
        logger.debug("floored component weights", count=int(np.sum(mass / num_samples < min_weight)))

    alive = mass > 0.0
    mean_log = np.zeros_like(prev.alphas)
    mean_log[alive] = (responsibilities[:, alive].T @ log_x) / mass[alive, None]

    fits = Parallel(n_jobs=n_jobs)(
        delayed(dirichlet_fit_mle_stats)(mean_log[i], DirichletParams(prev.alphas[i]))
        for i in np.flatnonzero(alive)
    )
    alphas = np.array(prev.alphas)
    for i, fit in zip(np.flatnonzero(alive), fits):
        alphas[i] = fit.params.alpha
    return DirichletMixtureModel(weights=weights, alphas=alphas, training_meta=prev.training_meta)


def m_step(
    data,
    responsibilities,
    prev: DirichletMixtureModel,
    min_weight: float = 1e-8,
    n_jobs: int = 1,
) -> DirichletMixtureModel:
    """Weights from responsibility mass, concentrations by weighted MLE from the previous ones."""
    responsibilities = np.asarray(responsibilities, dtype=float)
    row_sums = responsibilities.sum(axis=1)
    if responsibilities.shape[1] != prev.num_components or np.any(np.abs(row_sums - 1.0) > 1e-9):
        raise DomainError("responsibilities must be N x I with rows summing to 1")
    return _m_step_log(_log_data(data), responsibilities, prev, min_weight, n_jobs)


def fit_em(data, cfg: EmConfig) -> Tuple[DirichletMixtureModel, List[float]]:
    """Alternate E and M steps until the relative log-likelihood change drops below rel_tol."""
    clean, clipped = clip_to_simplex(data)
    if clipped:
        logger.info("clipped training vectors to the simplex interior", count=clipped)
    log_x = _log_data(clean)

    model = init_model(clean, cfg)
    responsibilities, loglik = _responsibilities(model, log_x)
    history = [loglik]
    logger.info("EM start", components=cfg.num_components, samples=len(clean), loglik=loglik)

    iterations = 0
    for iteration in range(1, cfg.max_iterations + 1):
        model = _m_step_log(log_x, responsibilities, model, cfg.min_weight, cfg.n_jobs)
        responsibilities, new_loglik = _responsibilities(model, log_x)
        if not np.isfinite(new_loglik):
            raise NumericError(f"non-finite log-likelihood at EM iteration {iteration}", index=iteration)
        history.append(new_loglik)
        iterations = iteration
        if new_loglik < loglik - MONOTONE_SLACK:
            logger.warning("log-likelihood decreased", iteration=iteration, delta=new_loglik - loglik)
        logger.debug("EM iteration", iteration=iteration, loglik=new_loglik)
        converged = abs(new_loglik - loglik) < cfg.rel_tol * abs(loglik)
        loglik = new_loglik
        if converged:
            break

    logger.info("EM done", components=cfg.num_components, iterations=iterations, loglik=loglik)
    meta = TrainingMeta(num_samples=len(clean), loglik=loglik, iterations=iterations, seed=cfg.seed)
    return replace(model, training_meta=meta), history


def mixture_entropy_terms(model: DirichletMixtureModel) -> Tuple[np.ndarray, float]:
    """Per-component differential entropies (bits) and their weighted mean."""
    entropies = np.array([dirichlet_entropy_bits(DirichletParams(alpha)) for alpha in model.alphas])
    return entropies, float(np.dot(model.weights, entropies))
