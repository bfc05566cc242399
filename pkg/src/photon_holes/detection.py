"""Threshold detectors and the start-stop coincidence histogram."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Union

import numpy as np
from scipy.special import ndtr

if TYPE_CHECKING:
    from photon_holes.sources import PulseTrainConfig

from photon_holes.fock import (
    FockState,
    ModeGroup,
    click_probability_matrix,
    joint_number_distribution,
)

DEFAULT_BIN_WIDTH = 0.5e-9
DEFAULT_WINDOW = 45e-9
DEFAULT_JITTER = 300e-12


@dataclass(frozen=True)
class DetectorConfig:
    """Avalanche photodiode model: efficiency, dark clicks per pulse window, timing jitter (s)."""

    efficiency: float = 1.0
    dark_prob: float = 0.0
    jitter_sigma: float = DEFAULT_JITTER

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if not 0.0 <= self.dark_prob <= 1.0:
            raise ValueError(f"dark_prob must lie in [0, 1], got {self.dark_prob}")
        if self.jitter_sigma < 0:
            raise ValueError(f"jitter_sigma must be >= 0, got {self.jitter_sigma}")


IDEAL_DETECTOR = DetectorConfig(efficiency=1.0, dark_prob=0.0, jitter_sigma=0.0)


class GeometryMismatchError(ValueError):
    pass


@dataclass(eq=False)
class TacHistogram:
    """Coincidence counts versus stop-minus-start delay.

    Bins tile ``[-window, +window]`` exactly. ``counts`` is integer for
    sampled data and float for expected (exact-mode) histograms.
    """

    bin_width: float = DEFAULT_BIN_WIDTH
    window: float = DEFAULT_WINDOW
    counts: np.ndarray = None
    n_starts: Union[int, float] = 0

    def __post_init__(self):
        if self.bin_width <= 0 or self.window <= 0:
            raise ValueError("bin_width and window must be positive")
        ratio = 2 * self.window / self.bin_width
        n = int(round(ratio))
        if n < 1 or abs(ratio - n) > 1e-9 * max(1.0, ratio):
            raise ValueError(
                f"bin width {self.bin_width:g} s does not tile [-{self.window:g}, {self.window:g}] s"
            )
        if self.counts is None:
            self.counts = np.zeros(n, dtype=np.int64)
        else:
            self.counts = np.asarray(self.counts)
            if self.counts.shape != (n,):
                raise ValueError(f"expected {n} bins, got shape {self.counts.shape}")
            if np.any(self.counts < 0):
                raise ValueError("histogram counts must be non-negative")

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @property
    def edges(self) -> np.ndarray:
        return -self.window + self.bin_width * np.arange(self.n_bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[1:] + e[:-1])

    def same_geometry(self, other: "TacHistogram") -> bool:
        return self.bin_width == other.bin_width and self.window == other.window

    def empty_like(self) -> "TacHistogram":
        return TacHistogram(self.bin_width, self.window)

    def merge(self, other: "TacHistogram") -> "TacHistogram":
        if not self.same_geometry(other):
            raise GeometryMismatchError(
                f"cannot merge histograms: ({self.bin_width}, {self.window}) vs "
                f"({other.bin_width}, {other.window})"
            )
        return TacHistogram(self.bin_width, self.window, self.counts + other.counts,
                            self.n_starts + other.n_starts)

    __add__ = merge

    def __eq__(self, other):
        if not isinstance(other, TacHistogram):
            return NotImplemented
        return (self.same_geometry(other) and self.n_starts == other.n_starts
                and self.counts.dtype.kind == other.counts.dtype.kind
                and np.array_equal(self.counts, other.counts))

    def total(self):
        return self.counts.sum()

    def peak_counts(self, period: float) -> dict:
        """Counts integrated over +-period/2 around each multiple of the period.

        Peaks whose centre lies inside the window are kept; for the outermost
        ones the integration range is clipped by the window edge.
        """
        lags = np.floor(self.centers / period + 0.5).astype(int)
        out = {}
        for k in range(lags.min(), lags.max() + 1):
            if abs(k) * period > self.window:
                continue
            out[k] = self.counts[lags == k].sum()
        return out


@dataclass
class ClickRecord:
    """Per-pulse click flags for the two detectors.

    Only pulses in ``[guard, n - guard)`` act as coincidence starts, so every
    start has a full window of stop candidates on both sides.
    """

    click_a: np.ndarray
    click_b: np.ndarray
    guard: int = 0

    def __post_init__(self):
        self.click_a = np.asarray(self.click_a, dtype=bool)
        self.click_b = np.asarray(self.click_b, dtype=bool)
        if self.click_a.shape != self.click_b.shape or self.click_a.ndim != 1:
            raise ValueError("click arrays must be 1-D and of equal length")
        if 2 * self.guard > len(self.click_a):
            raise ValueError("guard longer than half the record")

    def __len__(self):
        return len(self.click_a)

    @property
    def n_starts_pulses(self) -> int:
        return len(self) - 2 * self.guard

    def both_fraction(self) -> float:
        sl = slice(self.guard, len(self) - self.guard)
        return float(np.mean(self.click_a[sl] & self.click_b[sl]))


def sample_pulse_clicks(
    state: FockState,
    out_a: ModeGroup,
    out_b: ModeGroup,
    det: DetectorConfig,
    rng: np.random.Generator,
    size: int = None,
):
    """Draw photon numbers, thin them by the efficiency, OR in dark clicks.

    Returns a pair of bools, or of bool arrays when ``size`` is given.
    """
    joint = joint_number_distribution(state, out_a, out_b)
    flat = joint.ravel() / joint.sum()
    n = 1 if size is None else size
    idx = rng.choice(flat.size, size=n, p=flat)
    na, nb = np.divmod(idx, joint.shape[1])
    seen_a = rng.binomial(na, det.efficiency) > 0
    seen_b = rng.binomial(nb, det.efficiency) > 0
    if det.dark_prob > 0:
        seen_a |= rng.random(n) < det.dark_prob
        seen_b |= rng.random(n) < det.dark_prob
    if size is None:
        return bool(seen_a[0]), bool(seen_b[0])
    return seen_a, seen_b


def sample_from_click_probabilities(probs: np.ndarray, rng: np.random.Generator, size: int = None):
    """Sample clicks from (both, a_only, b_only, none) tables.

    ``probs`` is either one table of shape (4,) shared by ``size`` pulses or
    one row per pulse, shape (n, 4).
    """
    probs = np.asarray(probs, float)
    if probs.ndim == 1:
        outcome = rng.choice(4, size=size, p=probs / probs.sum())
    else:
        cdf = np.cumsum(probs, axis=1)
        cdf /= cdf[:, -1:]
        u = rng.random(len(probs))
        outcome = (u[:, None] >= cdf).sum(axis=1)
    click_a = (outcome == 0) | (outcome == 1)
    click_b = (outcome == 0) | (outcome == 2)
    return click_a, click_b


def _records(events) -> list:
    if isinstance(events, ClickRecord):
        return [events]
    return list(events)


def accumulate_coincidences(
    events: Union[ClickRecord, Iterable[ClickRecord]],
    train: "PulseTrainConfig",
    hist: TacHistogram,
    det: DetectorConfig,
    rng: np.random.Generator = None,
) -> TacHistogram:
    """Add every (A start, B stop) pair within the window to ``hist``.

    Each record is an independent segment; pairs never span records. Click
    times get Gaussian jitter of ``det.jitter_sigma`` per detector.
    """
    if det.jitter_sigma > 0 and rng is None:
        raise ValueError("an rng is required when jitter_sigma > 0")
    period = train.period
    counts = np.zeros(hist.n_bins, dtype=np.int64)
    n_starts = 0
    max_lag = int(math.floor(hist.window / period + 1e-12))
    edges = hist.edges
    for rec in _records(events):
        n = len(rec)
        lo, hi = rec.guard, n - rec.guard
        a, b = rec.click_a, rec.click_b
        n_starts += int(a[lo:hi].sum())
        jit_a = np.zeros(n)
        jit_b = np.zeros(n)
        if det.jitter_sigma > 0:
            jit_a[a] = rng.normal(0.0, det.jitter_sigma, int(a.sum()))
            jit_b[b] = rng.normal(0.0, det.jitter_sigma, int(b.sum()))
        delays = []
        for k in range(-max_lag, max_lag + 1):
            i0, i1 = max(lo, -k), min(hi, n - k)
            if i1 <= i0:
                continue
            i = np.nonzero(a[i0:i1] & b[i0 + k:i1 + k])[0] + i0
            delays.append(k * period + jit_b[i + k] - jit_a[i])
        if delays:
            d = np.concatenate(delays)
            c, _ = np.histogram(d, bins=edges)
            counts += c
    return hist.merge(TacHistogram(hist.bin_width, hist.window, counts, n_starts))


def expected_histogram(
    p_both: float,
    singles_a: float,
    singles_b: float,
    n_starts_pulses: int,
    train: "PulseTrainConfig",
    det: DetectorConfig,
    bin_width: float = DEFAULT_BIN_WIDTH,
    window: float = DEFAULT_WINDOW,
) -> TacHistogram:
    """Expected counts per bin for i.i.d. pulses (float counts)."""
    period = train.period
    hist = TacHistogram(bin_width, window)
    edges = hist.edges
    counts = np.zeros(hist.n_bins)
    max_lag = int(math.floor(window / period + 1e-12))
    sigma = math.sqrt(2.0) * det.jitter_sigma
    for k in range(-max_lag, max_lag + 1):
        mass = n_starts_pulses * (p_both if k == 0 else singles_a * singles_b)
        centre = k * period
        if sigma > 0:
            cdf = ndtr((edges - centre) / sigma)
            counts += mass * np.diff(cdf)
        else:
            j = np.searchsorted(edges, centre, side="right") - 1
            if 0 <= j < hist.n_bins:
                counts[j] += mass
    return TacHistogram(bin_width, window, counts, n_starts_pulses * singles_a)


def click_table(joint: np.ndarray, det: DetectorConfig) -> np.ndarray:
    """(both, a_only, b_only, none) from a joint photon-number distribution."""
    w = click_probability_matrix(joint.shape[0] - 1, joint.shape[1] - 1, det.efficiency, det.dark_prob)
    return np.einsum("jk,jkc->c", joint, w)
