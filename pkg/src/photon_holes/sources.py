"""Input states: the weak coherent pulse and the HOM-bunched PDC pairs."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import poisson

from photon_holes.fock import (
    DEFAULT_TRUNCATION,
    FockError,
    FockState,
    ModeLabel,
    apply_beam_splitter,
)

TAIL_TOLERANCE = 1e-8
MAX_XI = 0.1
MAX_MEAN_PHOTONS = 0.25
REP_RATE_HZ = 76e6

SIGNAL = ModeLabel("pdc_signal")
IDLER = ModeLabel("pdc_idler")


@dataclass(frozen=True)
class SourceParams:
    """Per-pulse source settings.

    ``phi`` is the relative phase between the coherent and PDC two-photon
    amplitudes; ``overlap`` is the mode overlap of those two amplitudes.
    """

    alpha: complex = 0.2
    xi: float = 0.04
    phi: float = math.pi
    overlap: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", complex(self.alpha))
        if abs(self.alpha) ** 2 > MAX_MEAN_PHOTONS:
            raise ValueError(f"|alpha|^2 = {abs(self.alpha) ** 2:.3g} exceeds weak-field limit {MAX_MEAN_PHOTONS}")
        if not 0.0 <= self.xi <= MAX_XI:
            raise ValueError(f"xi must lie in [0, {MAX_XI}], got {self.xi}")
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap}")

    @classmethod
    def matched(cls, xi: float = 0.04, phi: float = math.pi, overlap: float = 1.0) -> "SourceParams":
        return cls(alpha=matched_alpha(xi), xi=xi, phi=phi, overlap=overlap)


@dataclass(frozen=True)
class PulseTrainConfig:
    rep_rate: float = REP_RATE_HZ
    n_pulses: int = 1_000_000
    locked_phase_jitter: float = 0.0

    def __post_init__(self):
        if not self.rep_rate > 0:
            raise ValueError(f"rep_rate must be positive, got {self.rep_rate}")
        if self.n_pulses < 1:
            raise ValueError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if self.locked_phase_jitter < 0:
            raise ValueError(f"locked_phase_jitter must be >= 0, got {self.locked_phase_jitter}")

    @property
    def period(self) -> float:
        return 1.0 / self.rep_rate


def coherent_pulse(alpha: complex, m: ModeLabel, truncation: int = DEFAULT_TRUNCATION) -> FockState:
    """Truncated coherent state; refuses cutoffs that lose more than 1e-8."""
    alpha = complex(alpha)
    mean = abs(alpha) ** 2
    tail = float(poisson.sf(truncation, mean)) if mean > 0 else 0.0
    if tail > TAIL_TOLERANCE:
        raise FockError(
            f"coherent state |alpha|^2={mean:.3g} loses {tail:.2e} above N={truncation}; "
            "use a larger truncation"
        )
    pref = math.exp(-mean / 2)
    amps = {(n,): pref * alpha**n / math.sqrt(math.factorial(n)) for n in range(truncation + 1)}
    return FockState.from_amplitudes((m,), truncation, amps)


def pdc_pair_state(
    xi: float,
    signal: ModeLabel = SIGNAL,
    idler: ModeLabel = IDLER,
    truncation: int = DEFAULT_TRUNCATION,
) -> FockState:
    """Weak two-mode squeezed vacuum kept to second order in xi."""
    if signal == idler:
        raise FockError("signal and idler must be distinct modes")
    if not 0.0 <= xi <= MAX_XI:
        raise ValueError(f"xi must lie in [0, {MAX_XI}], got {xi}")
    if truncation < 2:
        raise FockError("pair state needs truncation >= 2")
    amps = {(n, n): xi**n for n in range(3)}
    return FockState.from_amplitudes((signal, idler), truncation, amps)


def hom_bunch(state: FockState, signal: ModeLabel = SIGNAL, idler: ModeLabel = IDLER) -> FockState:
    """50/50 Hong-Ou-Mandel stage; pairs leave together through one port."""
    return apply_beam_splitter(state, signal, idler, 0.5)


def pair_probability(xi: float) -> float:
    return xi**2 / (1 + xi**2 + xi**4)


@lru_cache(maxsize=64)
def lock_phase(xi: float, truncation: int = DEFAULT_TRUNCATION) -> float:
    """Carrier phase of alpha that makes phi = pi the destructive setting.

    Found from the two equal-time |1,1> output amplitudes of each source alone,
    so it follows whatever beam-splitter convention the mixer uses.
    """
    from photon_holes.apparatus import single_source_coincidence_amplitude

    if xi == 0:
        return 0.0
    a_pdc = single_source_coincidence_amplitude(xi=xi, alpha=0j, truncation=truncation)
    a_coh = single_source_coincidence_amplitude(xi=0.0, alpha=math.sqrt(xi), truncation=truncation)
    # coherent |1,1> amplitude scales as alpha^2, so half the phase mismatch
    return float(np.mod((cmath.phase(a_pdc) - cmath.phase(a_coh)) / 2, math.pi))


def required_truncation(mean: float, minimum: int = DEFAULT_TRUNCATION) -> int:
    """Smallest cutoff >= ``minimum`` keeping a coherent state of this mean within the tail tolerance."""
    n = minimum
    while mean > 0 and poisson.sf(n, mean) > TAIL_TOLERANCE:
        n += 1
    return n


# search bracket for |alpha| in units of sqrt(xi)
_MATCH_BRACKET = (0.8, 1.25)


@lru_cache(maxsize=64)
def matched_alpha(xi: float, truncation: Optional[int] = None) -> complex:
    """Coherent amplitude whose two-photon term cancels the bunched PDC pair.

    The magnitude minimizes the exact equal-time coincidence probability at
    phi = pi with full overlap; to leading order |alpha|^2 = xi. The cutoff
    defaults to the smallest one that holds every trial amplitude.
    """
    from photon_holes.apparatus import both_click_probability

    if xi == 0:
        return 0j
    if truncation is None:
        truncation = required_truncation(_MATCH_BRACKET[1] ** 2 * xi)
    theta = lock_phase(xi, truncation)

    def p_both(mag):
        src = SourceParams(alpha=mag * cmath.exp(1j * theta), xi=xi, phi=math.pi, overlap=1.0)
        return both_click_probability(src, truncation=truncation)

    root = math.sqrt(xi)
    lo, hi = _MATCH_BRACKET
    res = minimize_scalar(p_both, bounds=(lo * root, hi * root), method="bounded",
                          options={"xatol": 1e-10})
    return complex(res.x * cmath.exp(1j * theta))


def pulse_train_phases(cfg: PulseTrainConfig, rng: np.random.Generator, base: float = 0.0) -> np.ndarray:
    """Per-pulse relative phase: ``base`` plus Gaussian lock error."""
    if cfg.locked_phase_jitter == 0:
        return np.full(cfg.n_pulses, float(base))
    return base + cfg.locked_phase_jitter * rng.standard_normal(cfg.n_pulses)
