import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chi2

from photon_holes.apparatus import PORT_A, PORT_B, hole_state
from photon_holes.detection import (
    IDEAL_DETECTOR,
    ClickRecord,
    DetectorConfig,
    GeometryMismatchError,
    TacHistogram,
    accumulate_coincidences,
    expected_histogram,
    sample_from_click_probabilities,
    sample_pulse_clicks,
)
from photon_holes.fock import ModeLabel, joint_click_probabilities, make_vacuum, number_state
from photon_holes.sources import PulseTrainConfig, SourceParams

A = ModeLabel("a")
B = ModeLabel("b")
TRAIN = PulseTrainConfig()
NO_JITTER = DetectorConfig(1.0, 0.0, 0.0)


def test_vacuum_never_clicks(rng):
    a, b = sample_pulse_clicks(make_vacuum([A, B]), A, B, NO_JITTER, rng, size=1000)
    assert not a.any() and not b.any()


def test_pair_always_clicks(rng):
    assert sample_pulse_clicks(number_state({A: 1, B: 1}), A, B, NO_JITTER, rng) == (True, True)


def test_fig3c_sampling_matches_exact():
    rng = np.random.default_rng(11)
    state = hole_state(SourceParams.matched(0.04, math.pi, 0.85))
    exact = joint_click_probabilities(state, PORT_A, PORT_B, NO_JITTER).p_both
    n = 1_000_000
    a, b = sample_pulse_clicks(state, PORT_A, PORT_B, NO_JITTER, rng, size=n)
    sigma = math.sqrt(n * exact * (1 - exact))
    assert abs((a & b).sum() - n * exact) < 5 * sigma


def test_marginals_converge():
    rng = np.random.default_rng(12)
    state = hole_state(SourceParams.matched(0.04, 0.0, 1.0))
    det = DetectorConfig(0.6, 1e-3, 0.0)
    exact = joint_click_probabilities(state, PORT_A, PORT_B, det)
    n = 400_000
    a, b = sample_pulse_clicks(state, PORT_A, PORT_B, det, rng, size=n)
    for seen, p in ((a, exact.singles_a), (b, exact.singles_b)):
        assert abs(seen.sum() - n * p) < 5 * math.sqrt(n * p * (1 - p))


def test_table_sampler_per_pulse_rows(rng):
    probs = np.tile([0.1, 0.2, 0.3, 0.4], (200_000, 1))
    a, b = sample_from_click_probabilities(probs, rng)
    assert np.mean(a & b) == pytest.approx(0.1, abs=0.005)
    assert np.mean(a) == pytest.approx(0.3, abs=0.005)
    assert np.mean(b) == pytest.approx(0.4, abs=0.005)


# -- histogram -----------------------------------------------------------------


def test_bins_tile_window():
    h = TacHistogram(0.5e-9, 45e-9)
    assert h.n_bins == 180
    assert h.edges[0] == pytest.approx(-45e-9) and h.edges[-1] == pytest.approx(45e-9)
    np.testing.assert_allclose(np.diff(h.edges), 0.5e-9)


def test_bin_width_must_tile():
    with pytest.raises(ValueError):
        TacHistogram(0.7e-9, 45e-9)


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        TacHistogram(1e-9, 2e-9, np.array([0, -1, 0, 0]))


def test_merge_geometry_mismatch():
    with pytest.raises(GeometryMismatchError):
        TacHistogram(0.5e-9, 45e-9).merge(TacHistogram(1e-9, 45e-9))


def random_record(rng, n=400, p=0.2, guard=3):
    return ClickRecord(rng.random(n) < p, rng.random(n) < p, guard)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30)
def test_merge_is_accumulate_over_concatenated_streams(seed):
    rng = np.random.default_rng(seed)
    r1, r2 = random_record(rng), random_record(rng)
    empty = TacHistogram()
    h1 = accumulate_coincidences(r1, TRAIN, empty, NO_JITTER)
    h2 = accumulate_coincidences(r2, TRAIN, empty, NO_JITTER)
    both = accumulate_coincidences([r1, r2], TRAIN, empty, NO_JITTER)
    assert h1.merge(h2) == both
    assert h2.merge(h1) == both
    assert empty.merge(h1) == h1


def test_total_counts_equal_pairs_in_window(rng):
    rec = random_record(rng, n=300, p=0.3)
    h = accumulate_coincidences(rec, TRAIN, TacHistogram(), NO_JITTER)
    lag = int(45e-9 // TRAIN.period)
    starts = np.nonzero(rec.click_a[rec.guard:len(rec) - rec.guard])[0] + rec.guard
    stops = np.nonzero(rec.click_b)[0]
    pairs = sum(int(np.sum(np.abs(stops - i) <= lag)) for i in starts)
    assert h.total() == pairs
    assert h.n_starts == len(starts)


def test_jitter_requires_rng(rng):
    with pytest.raises(ValueError):
        accumulate_coincidences(random_record(rng), TRAIN, TacHistogram(), DetectorConfig(1, 0, 3e-10))


def test_jitter_is_deterministic_given_stream():
    rec = random_record(np.random.default_rng(1))
    det = DetectorConfig(1.0, 0.0, 3e-10)
    h1 = accumulate_coincidences(rec, TRAIN, TacHistogram(), det, np.random.default_rng(5))
    h2 = accumulate_coincidences(rec, TRAIN, TacHistogram(), det, np.random.default_rng(5))
    assert h1 == h2


def _sampled_histogram(state, det, n, seed):
    rng = np.random.default_rng(seed)
    guard = int(45e-9 // TRAIN.period)
    a, b = sample_pulse_clicks(state, PORT_A, PORT_B, det, rng, size=n + 2 * guard)
    return accumulate_coincidences(ClickRecord(a, b, guard), TRAIN, TacHistogram(), det, rng)


def test_coherent_only_peaks_equal():
    state = hole_state(SourceParams.matched(0.04, math.pi, 0.85), block_pdc=True)
    peaks = _sampled_histogram(state, DetectorConfig(), 1_000_000, 3).peak_counts(TRAIN.period)
    assert sorted(peaks) == [-3, -2, -1, 0, 1, 2, 3]
    c = np.array(list(peaks.values()), float)
    stat = ((c - c.mean()) ** 2 / c.mean()).sum()
    assert chi2.sf(stat, len(c) - 1) > 0.01


def test_pdc_only_single_peak():
    xi = 0.04
    state = hole_state(SourceParams.matched(xi, math.pi, 1.0), block_coherent=True)
    peaks = _sampled_histogram(state, NO_JITTER, 1_000_000, 4).peak_counts(TRAIN.period)
    side = max(v for k, v in peaks.items() if k)
    assert peaks[0] > 100 and peaks[0] > 20 * max(side, 1)


def test_pdc_only_side_to_centre_ratio():
    # accidentals go as (pair probability)^2, true coincidences as the pair probability
    xi = 0.04
    state = hole_state(SourceParams.matched(xi, math.pi, 1.0), block_coherent=True)
    c = joint_click_probabilities(state, PORT_A, PORT_B, NO_JITTER)
    peaks = expected_histogram(c.p_both, c.singles_a, c.singles_b, 10**6, TRAIN, NO_JITTER).peak_counts(
        TRAIN.period)
    ratio = peaks[1] / peaks[0]
    assert xi**2 / 2 <= ratio <= 2 * xi**2


def test_dark_count_floor():
    d, n = 0.01, 200_000
    state = make_vacuum(list(PORT_A + PORT_B))
    h = _sampled_histogram(state, DetectorConfig(0.0, d, 0.0), n, 6)
    mu = n * d * d
    for v in h.peak_counts(TRAIN.period).values():
        assert abs(v - mu) < 5 * math.sqrt(mu)


def test_expected_histogram_peaks():
    h = expected_histogram(0.01, 0.1, 0.2, 1000, TRAIN, IDEAL_DETECTOR)
    peaks = h.peak_counts(TRAIN.period)
    assert peaks[0] == pytest.approx(10.0)
    assert peaks[2] == pytest.approx(20.0)
    assert h.n_starts == pytest.approx(100.0)


def test_expected_histogram_jitter_conserves_peak_mass():
    h = expected_histogram(0.01, 0.1, 0.2, 1000, TRAIN, DetectorConfig(1, 0, 3e-10))
    assert h.peak_counts(TRAIN.period)[0] == pytest.approx(10.0, rel=1e-9)
    assert h.counts.max() < 10.0
