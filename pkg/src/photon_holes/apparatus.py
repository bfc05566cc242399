"""Optical stages of the experiment: primary mixer, attenuator, idealized
two-photon absorber and the pair of unbalanced (Franson) interferometers."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from photon_holes.detection import IDEAL_DETECTOR, DetectorConfig
from photon_holes.fock import (
    DEFAULT_TRUNCATION,
    FockError,
    FockState,
    ModeLabel,
    _beam_splitter_amplitudes,
    apply_beam_splitter,
    apply_phase,
    click_probability_matrix,
    joint_click_probabilities,
    make_vacuum,
    measure_mode,
)
from photon_holes.sources import (
    IDLER,
    SIGNAL,
    PulseTrainConfig,
    SourceParams,
    coherent_pulse,
    hom_bunch,
    pdc_pair_state,
)

UPPER = ModeLabel("upper")
SPARE = ModeLabel("hom_spare")
LOWER = ModeLabel("lower")
UPPER_ORTH = ModeLabel("upper_orth")
LOWER_ORTH = ModeLabel("lower_orth")

# mixer output ports; each physical port carries a matched and an orthogonal sub-mode
OUT_A = ModeLabel("out_a")
OUT_B = ModeLabel("out_b")
OUT_A_ORTH = ModeLabel("out_a_orth")
OUT_B_ORTH = ModeLabel("out_b_orth")
PORT_A = (OUT_A, OUT_A_ORTH)
PORT_B = (OUT_B, OUT_B_ORTH)


@dataclass(frozen=True)
class MixerConfig:
    phi: float = math.pi
    overlap: float = 1.0
    transmissivity: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError(f"overlap must lie in [0, 1], got {self.overlap}")
        if self.transmissivity != 0.5:
            raise ValueError("the primary mixer is a 3 dB coupler (transmissivity 0.5)")


@dataclass(frozen=True)
class FransonConfig:
    delay_pulses: int = 1
    phase_a: float = 0.0
    phase_b: float = 0.0
    arm_transmissivity: float = 0.5

    def __post_init__(self):
        if self.delay_pulses < 1:
            raise ValueError(f"delay_pulses must be >= 1, got {self.delay_pulses}")
        if not 0.0 < self.arm_transmissivity < 1.0:
            raise ValueError("arm_transmissivity must lie strictly between 0 and 1")


# -- inputs ------------------------------------------------------------------


def upper_input(xi: float, truncation: int = DEFAULT_TRUNCATION) -> FockState:
    """Bunched PDC pairs on UPPER; the other HOM output port is kept as SPARE."""
    pairs = hom_bunch(pdc_pair_state(xi, SIGNAL, IDLER, truncation))
    return pairs.relabel({SIGNAL: UPPER, IDLER: SPARE})


def lower_input(alpha: complex, truncation: int = DEFAULT_TRUNCATION) -> FockState:
    return coherent_pulse(alpha, LOWER, truncation)


# -- primary mixer ---------------------------------------------------------


def primary_mix(
    upper: FockState,
    lower: FockState,
    cfg: MixerConfig,
    upper_mode: ModeLabel = UPPER,
    lower_mode: ModeLabel = LOWER,
) -> FockState:
    """Mix the two sources on the 3 dB coupler.

    The relative phase acts on the two-photon amplitude of the lower input,
    i.e. the lower field is shifted by phi/2. The lower field is then split
    into a component matched to the PDC mode (amplitude sqrt(overlap)) and an
    orthogonal one, and each is mixed with the corresponding upper sub-mode.
    Output ports: ``PORT_A`` (from upper) and ``PORT_B`` (from lower); the
    output cutoff is the sum of the input cutoffs.
    """
    if set(upper.modes) & set(lower.modes):
        raise FockError("upper and lower inputs must use distinct mode labels")
    upper.index(upper_mode)
    lower.index(lower_mode)
    # outputs can hold every input photon, so widen the cutoff instead of clipping
    cutoff = upper.truncation + lower.truncation
    state = upper.tensor(lower).with_truncation(cutoff).with_vacuum(UPPER_ORTH, LOWER_ORTH)
    state = apply_phase(state, lower_mode, cfg.phi / 2)
    state = apply_beam_splitter(state, lower_mode, LOWER_ORTH, cfg.overlap)
    state = apply_beam_splitter(state, upper_mode, lower_mode, cfg.transmissivity)
    state = apply_beam_splitter(state, UPPER_ORTH, LOWER_ORTH, cfg.transmissivity)
    return state.relabel({upper_mode: OUT_A, lower_mode: OUT_B,
                          UPPER_ORTH: OUT_A_ORTH, LOWER_ORTH: OUT_B_ORTH})


def hole_state(src: SourceParams, truncation: int = DEFAULT_TRUNCATION,
               block_pdc: bool = False, block_coherent: bool = False) -> FockState:
    """Single-pulse output of the mixer for the given sources.

    Blocking a source replaces it with vacuum on the same modes.
    """
    upper = make_vacuum([UPPER, SPARE], truncation) if block_pdc else upper_input(src.xi, truncation)
    lower = make_vacuum([LOWER], truncation) if block_coherent else lower_input(src.alpha, truncation)
    return primary_mix(upper, lower, MixerConfig(src.phi, src.overlap))


def both_click_probability(src: SourceParams, det: DetectorConfig = IDEAL_DETECTOR,
                           truncation: int = DEFAULT_TRUNCATION) -> float:
    state = hole_state(src, truncation)
    return joint_click_probabilities(state, PORT_A, PORT_B, det).p_both


def incoherent_both_click(src: SourceParams, det: DetectorConfig = IDEAL_DETECTOR,
                          truncation: int = DEFAULT_TRUNCATION) -> float:
    """Coincidence probability with the relative phase averaged over a full cycle.

    Averaging the lower field phase over truncation+1 equally spaced values
    removes every cross term between its number components exactly, which is
    the incoherent sum of the two sources.
    """
    m = truncation + 1
    total = 0.0
    for j in range(m):
        shifted = SourceParams(alpha=src.alpha * cmath.exp(2j * math.pi * j / m),
                               xi=src.xi, phi=src.phi, overlap=src.overlap)
        total += both_click_probability(shifted, det, truncation)
    return total / m


def single_source_coincidence_amplitude(xi: float, alpha: complex,
                                        truncation: int = DEFAULT_TRUNCATION) -> complex:
    """Amplitude of one photon in each matched output, everything else empty, at phi=0."""
    src = SourceParams(alpha=alpha, xi=xi, phi=0.0, overlap=1.0)
    state = hole_state(src, truncation, block_pdc=(xi == 0), block_coherent=(alpha == 0))
    return state.amplitude({OUT_A: 1, OUT_B: 1})


# -- attenuation and absorption ------------------------------------------


def attenuate(state: FockState, m: ModeLabel, transmission: float, rng: np.random.Generator) -> FockState:
    """Scalar loss as a beam splitter to an ancilla that is then measured (one trajectory)."""
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must lie in [0, 1], got {transmission}")
    state.index(m)
    if transmission == 1.0:
        return state
    anc = ModeLabel(f"ancilla:{m.path}", m.pulse_index)
    # theta = -pi/2 makes the loss-port reflection real, so real coherent
    # inputs come out without an outcome-dependent global phase
    joint = apply_beam_splitter(state.with_vacuum(anc), m, anc, transmission, -math.pi / 2)
    _, collapsed, _ = measure_mode(joint, anc, rng)
    return collapsed.remove_mode(anc)


def idealized_tpa(joint: FockState, a: ModeLabel, b: ModeLabel):
    """Strong two-photon absorber: remove every term with photons in both beams.

    Returns ``(state, removed_mass)``.
    """
    i, j = joint.index(a), joint.index(b)
    kept = {k: v for k, v in joint.amplitudes.items() if not (k[i] >= 1 and k[j] >= 1)}
    remaining = sum(abs(v) ** 2 for v in kept.values())
    removed = max(0.0, 1.0 - remaining)
    if remaining <= 1e-15:
        raise FockError("two-photon absorption annihilated the whole state")
    state = FockState.from_amplitudes(joint.modes, joint.truncation, kept, prune=joint.prune)
    return state, removed


# -- Franson interferometers ---------------------------------------------


class FransonFringe:
    """Exact far-detector coincidence rate for one time slot.

    The slot sees the short path of pulse ``k`` and the long path of pulse 0.
    The local phases only multiply the long-arm amplitudes by
    exp(i n phase), so the state is split into sectors of fixed long-arm
    photon numbers and propagated once; the rate at any phase pair is then a
    Hermitian form ``e^H G e`` over the sector phasors.
    """

    def __init__(self, src: SourceParams, delay_pulses: int = 1, det: DetectorConfig = IDEAL_DETECTOR,
                 arm_transmissivity: float = 0.5, truncation: int = DEFAULT_TRUNCATION,
                 prune: float = 1e-7):
        k = delay_pulses
        pulse = hole_state(src, truncation).pruned(prune)
        long_, short = pulse.at_pulse(0), pulse.at_pulse(k)
        state = long_.tensor(short)
        t = arm_transmissivity
        path_gain = t**2 + (1 - t) ** 2
        mix_t = t**2 / path_gain
        eff = det.efficiency * path_gain

        long_a = [state.index(m.at_pulse(0)) for m in PORT_A]
        long_b = [state.index(m.at_pulse(0)) for m in PORT_B]
        pairs = [(state.index(m.at_pulse(0)), state.index(m.at_pulse(k))) for m in PORT_A + PORT_B]
        det_a = [state.index(m.at_pulse(k)) for m in PORT_A]
        det_b = [state.index(m.at_pulse(k)) for m in PORT_B]

        sectors = {}
        for occ, amp in state.amplitudes.items():
            key = (sum(occ[i] for i in long_a), sum(occ[i] for i in long_b))
            sectors.setdefault(key, {})[occ] = amp
        self.sector_keys = sorted(sectors)
        columns = []
        for key in self.sector_keys:
            amps = sectors[key]
            for i, j in pairs:
                amps = _beam_splitter_amplitudes(amps, i, j, mix_t, 0.0)
            columns.append(amps)

        basis = {}
        for amps in columns:
            for occ in amps:
                if occ not in basis:
                    basis[occ] = len(basis)
        psi = np.zeros((len(basis), len(columns)), dtype=complex)
        for c, amps in enumerate(columns):
            for occ, v in amps.items():
                psi[basis[occ], c] = v
        occs = np.array(list(basis), dtype=int)
        na = occs[:, det_a].sum(axis=1)
        nb = occs[:, det_b].sum(axis=1)
        w = click_probability_matrix(na.max(), nb.max(), eff, det.dark_prob)[na, nb, 0]
        self.gram = psi.conj().T @ (w[:, None] * psi)
        self.norm = float(np.real(np.trace(psi.conj().T @ psi)))
        self._ja = np.array([s[0] for s in self.sector_keys])
        self._jb = np.array([s[1] for s in self.sector_keys])

    def rate(self, phase_a: float, phase_b: float) -> float:
        e = np.exp(1j * (self._ja * phase_a + self._jb * phase_b))
        return float(np.real(e.conj() @ self.gram @ e))

    def fourier_coefficient(self, m_a: int, m_b: int) -> complex:
        """Coefficient of exp(i (m_a phase_a + m_b phase_b)) in the rate."""
        da = self._ja[None, :] - self._ja[:, None]
        db = self._jb[None, :] - self._jb[:, None]
        return complex(self.gram[(da == m_a) & (db == m_b)].sum())

    def fit(self):
        """Least-squares fit of R0 [1 - V cos(phase_a - phase_b + phi0)] over all phase pairs.

        On the full torus the fit is the projection onto the constant and the
        exp(+-i(phase_a - phase_b)) harmonics. Returns ``(R0, V, phi0)``.
        """
        r0 = self.fourier_coefficient(0, 0).real
        c = self.fourier_coefficient(1, -1)
        v = 2 * abs(c) / r0
        phi0 = float(np.angle(-c))
        if phi0 <= -math.pi:
            phi0 += 2 * math.pi
        return r0, v, phi0


@lru_cache(maxsize=32)
def franson_fringe(src: SourceParams, delay_pulses: int = 1, det: DetectorConfig = IDEAL_DETECTOR,
                   arm_transmissivity: float = 0.5, truncation: int = DEFAULT_TRUNCATION,
                   prune: float = 1e-7) -> FransonFringe:
    return FransonFringe(src, delay_pulses, det, arm_transmissivity, truncation, prune)


def _check_train(f: FransonConfig, train: PulseTrainConfig):
    if train.n_pulses < f.delay_pulses + 1:
        raise ValueError(f"need at least {f.delay_pulses + 1} pulses for a delay of {f.delay_pulses}")
    if train.locked_phase_jitter != 0:
        raise ValueError("the Franson calculation assumes a phase-stable pulse train (jitter 0)")


def franson_coincidence_rate(sources: SourceParams, f: FransonConfig, train: PulseTrainConfig,
                             det: DetectorConfig = IDEAL_DETECTOR) -> float:
    """Equal-time both-click probability per slot behind the two unbalanced interferometers."""
    _check_train(f, train)
    fringe = franson_fringe(sources, f.delay_pulses, det, f.arm_transmissivity)
    return fringe.rate(f.phase_a, f.phase_b)


def optimal_chsh_settings(phi0: float) -> list:
    """Phase pairs (a,b), (a,b'), (a',b), (a',b') maximizing S for E = -V cos(a - b + phi0)."""
    a, a2 = 0.0, math.pi / 2
    b, b2 = math.pi / 4 + phi0, 3 * math.pi / 4 + phi0
    return [(a, b), (a, b2), (a2, b), (a2, b2)]


def _chsh(correlations: Sequence[float]) -> float:
    e1, e2, e3, e4 = correlations
    return abs(e1 - e2 + e3 + e4)


def chsh_S(sources: SourceParams, f_base: FransonConfig, train: PulseTrainConfig,
           settings: Sequence = None, det: DetectorConfig = IDEAL_DETECTOR) -> float:
    """CHSH value with correlations taken from the fitted fringe.

    ``settings`` defaults to the optimal angles for the calibrated offset.
    """
    _check_train(f_base, train)
    fringe = franson_fringe(sources, f_base.delay_pulses, det, f_base.arm_transmissivity)
    _, v, phi0 = fringe.fit()
    if settings is None:
        settings = optimal_chsh_settings(phi0)
    return _chsh([-v * math.cos(a - b + phi0) for a, b in settings])


def correlation_direct(fringe: FransonFringe, a: float, b: float) -> float:
    """E(a, b) from the four output-port combinations (a port swap is a pi shift)."""
    pp = fringe.rate(a, b)
    mm = fringe.rate(a + math.pi, b + math.pi)
    pm = fringe.rate(a, b + math.pi)
    mp = fringe.rate(a + math.pi, b)
    return (pp + mm - pm - mp) / (pp + mm + pm + mp)


def chsh_S_direct(sources: SourceParams, f_base: FransonConfig, train: PulseTrainConfig,
                  settings: Sequence = None, det: DetectorConfig = IDEAL_DETECTOR) -> float:
    """CHSH value from port-resolved coincidence rates, no fringe model."""
    _check_train(f_base, train)
    fringe = franson_fringe(sources, f_base.delay_pulses, det, f_base.arm_transmissivity)
    if settings is None:
        settings = optimal_chsh_settings(fringe.fit()[2])
    return _chsh([correlation_direct(fringe, a, b) for a, b in settings])
