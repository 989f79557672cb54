"""Tests for the Dirichlet density, entropy and parameter estimators."""

import math

import numpy as np
import pytest
from scipy import stats

from lsfbound.dirichlet_core import (
    SIMPLEX_FLOOR,
    DirichletParams,
    clip_to_simplex,
    digamma,
    dirichlet_entropy_bits,
    dirichlet_fit_mle,
    dirichlet_fit_moments,
    dirichlet_log_pdf,
    dirichlet_sample,
    log_gamma,
    mle_gradient,
    trigamma,
    with_completion,
)
from lsfbound.errors import DomainError


# --- special functions -----------------------------------------------------


def test_special_function_values():
    assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-14)
    assert digamma(1.0) == pytest.approx(-np.euler_gamma, rel=1e-14)
    assert trigamma(1.0) == pytest.approx(np.pi ** 2 / 6, rel=1e-14)


@pytest.mark.parametrize("fn", [log_gamma, digamma, trigamma])
def test_special_functions_need_positive_arguments(fn):
    with pytest.raises(DomainError):
        fn(0.0)


# --- parameters and density ------------------------------------------------


def test_params_validate_concentrations():
    with pytest.raises(DomainError):
        DirichletParams([1.0, 0.0])
    with pytest.raises(DomainError):
        DirichletParams([1.0])
    params = DirichletParams([2.0, 5.0, 3.0])
    assert params.dim == 2
    assert params.alpha0 == 10.0


def test_beta_2_2_density_at_half():
    assert dirichlet_log_pdf(DirichletParams([2.0, 2.0]), [0.5]) == pytest.approx(math.log(1.5), rel=1e-13)


def test_log_pdf_matches_scipy(rng):
    alpha = np.array([2.0, 5.0, 3.0, 0.7])
    points = rng.dirichlet(alpha, size=20)
    expected = [stats.dirichlet.logpdf(p, alpha) for p in points]
    np.testing.assert_allclose(dirichlet_log_pdf(DirichletParams(alpha), points[:, :-1]), expected, rtol=1e-10)


def test_log_pdf_outside_simplex():
    with pytest.raises(DomainError):
        dirichlet_log_pdf(DirichletParams([2.0, 2.0, 2.0]), [0.7, 0.4])


def test_samples_lie_in_the_simplex():
    draws = dirichlet_sample(DirichletParams([2.0, 5.0, 3.0]), seed=3, size=1000)
    assert draws.shape == (1000, 2)
    assert np.all(with_completion(draws) > 0.0)


# --- entropy ---------------------------------------------------------------


def test_uniform_entropies():
    assert dirichlet_entropy_bits(DirichletParams([1.0, 1.0])) == 0.0
    # flat density on the 2-simplex has height 2
    assert dirichlet_entropy_bits(DirichletParams([1.0, 1.0, 1.0])) == pytest.approx(-1.0, abs=1e-14)


@pytest.mark.parametrize("alpha", [[2.0, 2.0], [2.0, 5.0, 3.0], [0.5, 0.8, 4.0, 1.5]])
def test_entropy_matches_scipy(alpha):
    expected = stats.dirichlet(alpha).entropy() / math.log(2.0)
    assert dirichlet_entropy_bits(DirichletParams(alpha)) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@pytest.mark.slow
@pytest.mark.parametrize(
    "alpha",
    [
        [1.0, 1.0],
        [2.0, 2.0],
        [1.0, 1.0, 1.0],
        [2.0, 5.0, 3.0],
        list(np.random.default_rng(16).uniform(2.0, 20.0, 17)),
    ],
)
def test_entropy_matches_monte_carlo(alpha):
    params = DirichletParams(alpha)
    draws = dirichlet_sample(params, seed=11, size=1_000_000)
    log2_density = dirichlet_log_pdf(params, draws) / math.log(2.0)
    estimate = -log2_density.mean()
    sigma = log2_density.std() / math.sqrt(len(draws))
    assert abs(estimate - dirichlet_entropy_bits(params)) <= 3.0 * sigma + 1e-12


# --- data hygiene ----------------------------------------------------------


def test_clip_to_simplex_repairs_boundary_rows():
    data = np.array([[0.0, 0.5], [0.3, 0.3]])
    clean, count = clip_to_simplex(data)
    assert count == 1
    full = with_completion(clean)
    assert np.all(full >= SIMPLEX_FLOOR * 0.5)
    np.testing.assert_allclose(full.sum(axis=1), 1.0)
    np.testing.assert_array_equal(clean[1], [0.3, 0.3])


# --- estimators ------------------------------------------------------------


def test_moment_fit_is_close_to_truth():
    alpha = np.array([2.0, 5.0, 3.0])
    draws = dirichlet_sample(DirichletParams(alpha), seed=5, size=50_000)
    fit = dirichlet_fit_moments(draws)
    assert not fit.degenerate
    np.testing.assert_allclose(fit.params.alpha, alpha, rtol=0.1)


def test_moment_fit_on_identical_points_is_degenerate():
    fit = dirichlet_fit_moments(np.tile([0.2, 0.3], (5, 1)))
    assert fit.degenerate
    np.testing.assert_allclose(fit.params.alpha, [2.0, 3.0, 5.0])


def test_moment_fit_needs_two_weighted_points():
    with pytest.raises(DomainError):
        dirichlet_fit_moments([[0.2, 0.3], [0.3, 0.3]], weights=[1.0, 0.0])


def test_mle_recovers_parameters():
    alpha = np.array([2.0, 5.0, 3.0])
    draws = dirichlet_sample(DirichletParams(alpha), seed=7, size=50_000)
    fit = dirichlet_fit_mle(draws)
    assert fit.converged
    assert fit.gradient_norm < 1e-8
    np.testing.assert_allclose(fit.params.alpha, alpha, rtol=0.02)


def test_mle_gradient_vanishes_at_the_estimate():
    draws = dirichlet_sample(DirichletParams([3.0, 1.5, 4.0]), seed=9, size=5000)
    fit = dirichlet_fit_mle(draws)
    mean_log = np.log(with_completion(draws)).mean(axis=0)
    assert np.max(np.abs(mle_gradient(fit.params.alpha, mean_log))) < 1e-8


def test_mle_beats_moment_fit_likelihood():
    draws = dirichlet_sample(DirichletParams([0.8, 2.0, 6.0]), seed=13, size=5000)
    moments = dirichlet_fit_moments(draws).params
    mle = dirichlet_fit_mle(draws).params
    assert dirichlet_log_pdf(mle, draws).sum() >= dirichlet_log_pdf(moments, draws).sum()


def test_integer_weights_equal_repeated_rows():
    draws = dirichlet_sample(DirichletParams([2.0, 4.0, 3.0]), seed=17, size=400)
    weights = np.where(np.arange(400) % 2 == 0, 2.0, 1.0)
    repeated = np.vstack([draws, draws[::2]])
    weighted = dirichlet_fit_mle(draws, weights=weights)
    expanded = dirichlet_fit_mle(repeated)
    np.testing.assert_allclose(weighted.params.alpha, expanded.params.alpha, rtol=1e-6)


def test_mle_rejects_all_zero_weights():
    with pytest.raises(DomainError):
        dirichlet_fit_mle([[0.2, 0.3], [0.3, 0.3]], weights=[0.0, 0.0])


# --- sampling and density properties ---------------------------------------


def test_sample_moments_match_closed_form():
    alpha = np.array([2.0, 5.0, 3.0])
    alpha0 = alpha.sum()
    draws = with_completion(dirichlet_sample(DirichletParams(alpha), seed=19, size=200_000))
    n = len(draws)

    mean = alpha / alpha0
    variance = alpha * (alpha0 - alpha) / (alpha0 ** 2 * (alpha0 + 1))
    sample_mean = draws.mean(axis=0)
    sample_var = draws.var(axis=0)
    # standard errors of the sample mean and of the sample variance
    mean_se = np.sqrt(variance / n)
    var_se = np.sqrt((((draws - sample_mean) ** 4).mean(axis=0) - sample_var ** 2) / n)
    assert np.all(np.abs(sample_mean - mean) <= 4 * mean_se)
    assert np.all(np.abs(sample_var - variance) <= 4 * var_se)


def test_same_seed_gives_the_same_draws():
    params = DirichletParams([2.0, 5.0, 3.0])
    np.testing.assert_array_equal(dirichlet_sample(params, seed=4, size=50), dirichlet_sample(params, seed=4, size=50))


def test_density_integrates_to_one():
    # uniform points on the 2-simplex, whose area is 1/2
    points = dirichlet_sample(DirichletParams([1.0, 1.0, 1.0]), seed=29, size=400_000)
    density = np.exp(dirichlet_log_pdf(DirichletParams([2.0, 5.0, 3.0]), points))
    estimate = 0.5 * density.mean()
    sigma = 0.5 * density.std() / math.sqrt(len(points))
    assert abs(estimate - 1.0) <= 4 * sigma


def test_digamma_and_trigamma_recurrences():
    z = np.geomspace(0.1, 100.0, 200)
    np.testing.assert_allclose(digamma(z + 1.0), digamma(z) + 1.0 / z, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(trigamma(z + 1.0), trigamma(z) - 1.0 / z ** 2, rtol=1e-12, atol=1e-12)


def test_equal_weights_match_unweighted_moment_fit():
    draws = dirichlet_sample(DirichletParams([2.0, 4.0, 3.0]), seed=31, size=500)
    plain = dirichlet_fit_moments(draws).params.alpha
    weighted = dirichlet_fit_moments(draws, weights=np.full(500, 3.0)).params.alpha
    np.testing.assert_allclose(weighted, plain, rtol=1e-12)


def dense_newton_mle(mean_log, alpha, iterations=50):
    """Plain Newton with the full Hessian matrix."""
    alpha = np.array(alpha, dtype=float)
    for _ in range(iterations):
        hessian = trigamma(alpha.sum()) * np.ones((len(alpha), len(alpha))) - np.diag(trigamma(alpha))
        alpha = alpha - np.linalg.solve(hessian, mle_gradient(alpha, mean_log))
    return alpha


def test_mle_from_the_true_parameters_converges_fast():
    alpha = np.array([2.0, 5.0, 3.0])
    draws = dirichlet_sample(DirichletParams(alpha), seed=37, size=50_000)
    fit = dirichlet_fit_mle(draws, init=DirichletParams(alpha))
    assert fit.converged
    assert fit.iterations <= 3

    mean_log = np.log(with_completion(draws)).mean(axis=0)
    np.testing.assert_allclose(fit.params.alpha, dense_newton_mle(mean_log, alpha), rtol=1e-6)
