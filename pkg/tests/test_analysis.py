import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import poisson

from photon_holes.analysis import (
    UndefinedVisibilityError,
    fit_sinusoid,
    g2_zero,
    peak_uniformity_pvalue,
    side_peaks,
    visibility_from_peaks,
)
from photon_holes.fock import ModeLabel, number_state
from photon_holes.sources import coherent_pulse

M = ModeLabel("m")


def test_visibility_example():
    assert visibility_from_peaks(1000, 81).visibility == pytest.approx(0.850, abs=5e-4)


def test_visibility_limits():
    assert visibility_from_peaks(10, 0).visibility == 1
    assert visibility_from_peaks(10, 10).visibility == 0


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1e-3, 1e3))
def test_visibility_scale_invariant(c0, cpi, k):
    if c0 + cpi < 1e-6:
        return
    v = visibility_from_peaks(c0, cpi).visibility
    assert -1 <= v <= 1
    assert visibility_from_peaks(k * c0, k * cpi).visibility == pytest.approx(v, abs=1e-12)


def test_visibility_both_zero():
    with pytest.raises(UndefinedVisibilityError):
        visibility_from_peaks(0, 0)


def test_visibility_negative_rejected():
    with pytest.raises(ValueError):
        visibility_from_peaks(-1, 3)


@given(st.floats(0.01, 10), st.floats(0, 1), st.floats(-math.pi, math.pi))
def test_sinusoid_fit_recovers_parameters(mean, vis, phi0):
    phis = 2 * math.pi * np.arange(12) / 12
    values = mean * (1 + vis * np.cos(phis + phi0))
    fit = fit_sinusoid(phis, values)
    assert fit.mean == pytest.approx(mean, rel=1e-9)
    assert fit.visibility == pytest.approx(vis, abs=1e-9)
    if vis > 1e-3:
        d = (fit.phi0 - phi0 + math.pi) % (2 * math.pi) - math.pi
        assert abs(d) < 1e-6
    assert fit.max_residual < 1e-9
    np.testing.assert_allclose(fit.model(phis), values, rtol=1e-9, atol=1e-12)


def test_sinusoid_fit_needs_three_points():
    with pytest.raises(ValueError):
        fit_sinusoid([0, 1], [1, 2])


def test_g2_coherent():
    assert g2_zero(coherent_pulse(0.3, M, truncation=10), M) == pytest.approx(1.0, abs=1e-6)


def test_g2_single_photon():
    assert g2_zero(number_state({M: 1}), M) == 0


def test_g2_from_counts_record(rng):
    counts = rng.poisson(0.5, 200_000)
    assert g2_zero(counts) == pytest.approx(1.0, abs=0.02)


def test_g2_from_distribution():
    assert g2_zero(poisson.pmf(np.arange(30), 2.0)) == pytest.approx(1.0, abs=1e-9)


def test_g2_empty_beam():
    with pytest.raises(ValueError):
        g2_zero(np.array([1.0, 0.0]))


def test_g2_state_needs_mode():
    with pytest.raises(ValueError):
        g2_zero(number_state({M: 1}))


def test_peak_uniformity():
    assert peak_uniformity_pvalue({k: 400 for k in range(-3, 4)}) == pytest.approx(1.0)
    assert peak_uniformity_pvalue({-1: 400, 0: 100, 1: 400}) < 1e-6


def test_side_peaks_excludes_centre():
    assert side_peaks({-1: 2, 0: 9, 1: 3}) == [2, 3]
