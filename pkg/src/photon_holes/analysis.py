"""Statistics extracted from simulated or measured coincidence data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence, Union

import numpy as np
from scipy.stats import chi2

from photon_holes.fock import FockState, ModeGroup, group_number_distribution


class VisibilityMethod(str, Enum):
    PEAK_RATIO = "peak_ratio"
    FRINGE_FIT = "fringe_fit"


class UndefinedVisibilityError(ValueError):
    pass


@dataclass(frozen=True)
class VisibilityReport:
    c_constructive: float
    c_destructive: float
    visibility: float
    method: VisibilityMethod = VisibilityMethod.PEAK_RATIO


def visibility_from_peaks(c0: float, cpi: float) -> VisibilityReport:
    """Interference visibility from the constructive (phi=0) and destructive (phi=pi) peaks."""
    if c0 < 0 or cpi < 0:
        raise ValueError(f"peak heights must be non-negative, got {c0}, {cpi}")
    if c0 + cpi == 0:
        raise UndefinedVisibilityError("visibility undefined when both peaks are empty")
    return VisibilityReport(c0, cpi, (c0 - cpi) / (c0 + cpi))


@dataclass(frozen=True)
class SinusoidFit:
    mean: float
    visibility: float
    phi0: float
    max_residual: float

    def model(self, phi):
        return self.mean * (1 + self.visibility * np.cos(np.asarray(phi) + self.phi0))

    @property
    def minimum_at(self) -> float:
        return float(np.mod(math.pi - self.phi0, 2 * math.pi))


def fit_sinusoid(phis: Sequence[float], values: Sequence[float]) -> SinusoidFit:
    """Linear least squares for p(phi) = mean [1 + V cos(phi + phi0)].

    ``max_residual`` is relative to the mean.
    """
    phis = np.asarray(phis, float)
    values = np.asarray(values, float)
    if len(phis) < 3:
        raise ValueError("need at least three phase points for a sinusoid fit")
    design = np.column_stack([np.ones_like(phis), np.cos(phis), np.sin(phis)])
    (c, a, b), *_ = np.linalg.lstsq(design, values, rcond=None)
    amp = math.hypot(a, b)
    # a cos + b sin = amp cos(phi + phi0) with phi0 = atan2(-b, a)
    phi0 = math.atan2(-b, a)
    resid = float(np.max(np.abs(design @ np.array([c, a, b]) - values)) / c) if c else math.inf
    return SinusoidFit(float(c), amp / c if c else math.nan, phi0, resid)


def g2_zero(source: Union[FockState, Sequence[float], np.ndarray], mode: ModeGroup = None) -> float:
    """<n(n-1)> / <n>^2 of a single beam.

    ``source`` is a state (with the beam's ``mode`` or mode group), a photon
    number distribution, or a record of per-pulse photon counts (integers).
    """
    if isinstance(source, FockState):
        if mode is None:
            raise ValueError("a mode is required when passing a state")
        p = group_number_distribution(source, mode)
    else:
        arr = np.asarray(source)
        if arr.dtype.kind in "iu":
            p = np.bincount(arr) / len(arr)
        else:
            p = arr.astype(float)
    n = np.arange(len(p))
    mean = float((n * p).sum())
    if mean == 0:
        raise ValueError("g2 undefined for an empty beam")
    return float((n * (n - 1) * p).sum()) / mean**2


def peak_uniformity_pvalue(peaks: Mapping[int, float]) -> float:
    """Chi-square test that all peaks share one expected height (Poisson counts)."""
    counts = np.array([peaks[k] for k in sorted(peaks)], float)
    expected = counts.mean()
    if expected == 0:
        return 1.0
    stat = float(((counts - expected) ** 2 / expected).sum())
    return float(chi2.sf(stat, len(counts) - 1))


def side_peaks(peaks: Mapping[int, float]) -> list:
    return [v for k, v in sorted(peaks.items()) if k != 0]
