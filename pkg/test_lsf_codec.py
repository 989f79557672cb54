"""Tests for LPC/LSF conversion, the delta-LSF map and log spectral distortion."""

import numpy as np
import pytest

from conftest import random_stable_lpc
from lsfbound.config import SpectrumGrid
from lsfbound.errors import DomainError, InstabilityError, OrderError
from lsfbound.lsf_codec import (
    DeltaLsfVector,
    LsfVector,
    delta_matrix,
    delta_to_lsf,
    is_minimum_phase,
    lpc_power_spectrum,
    lpc_to_lsf,
    lpc_to_reflection,
    log_spectral_distortion,
    lsd_statistics,
    lsf_to_delta,
    lsf_to_lpc,
)
from lsfbound.signal_frontend import LpcFrame, levinson_durbin


def dense_lsd(a, a_hat, num_points=65536):
    """Reference LSD on a very fine grid."""
    spectrum = np.fft.fft(np.concatenate(([1.0], a)), n=num_points)
    spectrum_hat = np.fft.fft(np.concatenate(([1.0], a_hat)), n=num_points)
    diff = 10.0 * np.log10(np.abs(spectrum_hat) ** 2 / np.abs(spectrum) ** 2)
    return np.sqrt(np.mean(diff ** 2))


# --- LPC <-> LSF -----------------------------------------------------------


def test_flat_filter_has_equally_spaced_lsfs():
    lsf = lpc_to_lsf(np.zeros(16))
    np.testing.assert_allclose(lsf.values, np.arange(1, 17) * np.pi / 17, atol=1e-10)


def test_second_order_flat_filter():
    np.testing.assert_allclose(lpc_to_lsf([0.0, 0.0]).values, [np.pi / 3, 2 * np.pi / 3], atol=1e-12)


def test_odd_order_is_rejected():
    with pytest.raises(OrderError):
        lpc_to_lsf([0.1, 0.0, 0.0])


def test_unstable_filter_is_rejected():
    with pytest.raises(InstabilityError):
        lpc_to_lsf([0.0, 1.5])


def test_accepts_lpc_frames(rng):
    a = random_stable_lpc(rng, order=10)
    np.testing.assert_allclose(lpc_to_lsf(LpcFrame(a)).values, lpc_to_lsf(a).values)


@pytest.mark.slow
def test_round_trip_on_random_stable_filters(rng):
    worst = 0.0
    for _ in range(1000):
        a = random_stable_lpc(rng, order=16, max_radius=0.95)
        lsf = lpc_to_lsf(a)
        assert np.all(np.diff(lsf.values) > 0.0)
        assert 0.0 < lsf.values[0] and lsf.values[-1] < np.pi
        worst = max(worst, np.max(np.abs(lsf_to_lpc(lsf).coefficients - a)))
    assert worst < 1e-6


def test_reconstructed_filter_is_minimum_phase(rng):
    s = np.pi * np.cumsum(rng.dirichlet(np.full(17, 4.0)))[:-1]
    a = lsf_to_lpc(s).coefficients
    assert is_minimum_phase(a)
    np.testing.assert_allclose(lpc_to_lsf(a).values, s, atol=1e-9)


def unit_circle_values(coefficients, w):
    """sum_j c_j e^{-j w j} for every angle in w."""
    return np.exp(-1j * np.outer(w, np.arange(len(coefficients)))) @ coefficients


def test_lsfs_alternate_between_p_and_q_roots(rng):
    for _ in range(50):
        a = random_stable_lpc(rng)
        s = lpc_to_lsf(a).values
        g = np.concatenate(([1.0], a, [0.0]))
        p, q = g + g[::-1], g - g[::-1]
        np.testing.assert_allclose(unit_circle_values(p, s[0::2]), 0.0, atol=1e-8)
        np.testing.assert_allclose(unit_circle_values(q, s[1::2]), 0.0, atol=1e-8)


def test_reflection_coefficients_match_levinson():
    r = np.array([1.0, 0.6, 0.2, -0.1])
    k = lpc_to_reflection(levinson_durbin(r).coefficients)
    # the last reflection coefficient is a_K itself
    assert k[-1] == pytest.approx(levinson_durbin(r).coefficients[-1])
    assert np.all(np.abs(k) < 1.0)
    np.testing.assert_allclose(k, [-0.6, 0.25, 1.0 / 6.0], rtol=1e-12)


def test_is_minimum_phase():
    assert is_minimum_phase([-0.5])
    assert not is_minimum_phase([0.0, 1.5])


def test_lsf_vector_must_be_ordered():
    with pytest.raises(DomainError):
        LsfVector([0.5, 0.4])
    with pytest.raises(DomainError):
        LsfVector([0.0, 1.0])


# --- delta-LSF map ---------------------------------------------------------


def test_delta_of_quarter_points():
    delta = lsf_to_delta([np.pi / 4, np.pi / 2, 3 * np.pi / 4])
    np.testing.assert_allclose(delta.values, [0.25, 0.25, 0.25], atol=1e-15)
    assert delta.completion == pytest.approx(0.25)


def test_delta_round_trip(rng):
    s = np.sort(rng.uniform(0.05, 3.1, 16))
    np.testing.assert_allclose(delta_to_lsf(lsf_to_delta(s)).values, s, atol=1e-12)


def test_delta_matrix_agrees_with_map(rng):
    s = np.sort(rng.uniform(0.05, 3.1, 8))
    np.testing.assert_allclose(delta_matrix(8) @ s, lsf_to_delta(s).values, atol=1e-15)


def test_delta_vector_outside_simplex():
    with pytest.raises(DomainError):
        DeltaLsfVector([0.6, 0.5])
    with pytest.raises(DomainError):
        DeltaLsfVector([0.2, -0.1])


# --- spectra and LSD -------------------------------------------------------


def test_flat_filter_power_spectrum():
    np.testing.assert_allclose(lpc_power_spectrum([0.0, 0.0]), np.ones(512))


def test_single_pole_power_spectrum_at_dc():
    assert lpc_power_spectrum([-0.5])[0] == pytest.approx(4.0, rel=1e-14)


def test_power_spectrum_is_even_about_half_the_sample_rate(rng):
    spectrum = lpc_power_spectrum(random_stable_lpc(rng))
    np.testing.assert_allclose(spectrum[1:], spectrum[1:][::-1], rtol=1e-10)


def test_lsd_is_symmetric(rng):
    for _ in range(20):
        a, a_hat = random_stable_lpc(rng), random_stable_lpc(rng)
        assert log_spectral_distortion(a, a_hat) == pytest.approx(log_spectral_distortion(a_hat, a), rel=1e-12)


def test_lsd_of_identical_filters_is_exactly_zero(rng):
    a = random_stable_lpc(rng)
    assert log_spectral_distortion(a, a) == 0.0


def test_lsd_single_pole_against_series():
    # mean of (ln|1 - 0.5 e^-jw|^2)^2 is 2 Li2(0.25)
    n = np.arange(1, 200)
    dilog = np.sum(0.25 ** n / n ** 2)
    expected = 10.0 / np.log(10.0) * np.sqrt(2.0 * dilog)
    assert log_spectral_distortion([0.0], [-0.5]) == pytest.approx(expected, abs=1e-3)
    assert log_spectral_distortion([0.0], [-0.5]) == pytest.approx(dense_lsd([0.0], [-0.5]), abs=1e-3)


def test_lsd_512_points_matches_dense_grid(rng):
    for _ in range(100):
        a = random_stable_lpc(rng)
        a_hat = random_stable_lpc(rng)
        assert log_spectral_distortion(a, a_hat) == pytest.approx(dense_lsd(a, a_hat), abs=1e-3)


def test_lsd_needs_matching_orders():
    with pytest.raises(DomainError):
        log_spectral_distortion([0.0], [0.0, 0.0])


def test_lsd_grid_too_coarse():
    with pytest.raises(DomainError):
        log_spectral_distortion(np.zeros(16), np.zeros(16), SpectrumGrid(num_points=16))


# --- transparency statistics -----------------------------------------------


def test_all_zero_lsd_is_transparent():
    summary = lsd_statistics(np.zeros(10))
    assert summary.mean_db == 0.0
    assert summary.transparent


def test_outlier_percentages():
    summary = lsd_statistics([0.5, 1.0, 3.0, 5.0])
    assert summary.pct_outliers_2_4 == pytest.approx(25.0)
    assert summary.pct_outliers_over_4 == pytest.approx(25.0)
    assert not summary.transparent
    assert summary.count == 4


def test_low_mean_with_one_large_outlier_is_not_transparent():
    values = np.full(200, 0.5)
    values[0] = 4.5
    assert not lsd_statistics(values).transparent


def test_empty_lsd_list():
    with pytest.raises(DomainError):
        lsd_statistics([])
