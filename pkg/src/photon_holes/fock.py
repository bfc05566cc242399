"""Sparse pure states on a truncated multimode bosonic Fock space.

States are immutable: every operation returns a new :class:`FockState`.
Amplitudes live in a dict keyed by occupation tuples, one integer per mode,
so joint spaces over many weakly-populated modes stay small.

Beam splitter convention (used everywhere in the package): the input
creation operators transform as

    a+  ->  sqrt(t) a+  +  i sqrt(1-t) e^{+i theta} b+
    b+  ->  i sqrt(1-t) e^{-i theta} a+  +  sqrt(t) b+

so a single photon picks up a factor ``i`` on reflection.
"""

from __future__ import annotations

import cmath
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence, Union

import numpy as np
from scipy.stats import poisson

if TYPE_CHECKING:
    from photon_holes.detection import DetectorConfig

DEFAULT_TRUNCATION = 4
PRUNE_THRESHOLD = 1e-14
OVERFLOW_TOLERANCE = 1e-9

Occupation = tuple


class FockError(ValueError):
    """Base class for invalid Fock-space operations."""


class DuplicateModeError(FockError):
    pass


class UnknownModeError(FockError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown mode"


class TruncationOverflowError(FockError):
    """Raised when an operation would push real probability past the cutoff."""


@dataclass(frozen=True, order=True)
class ModeLabel:
    """One optical mode: a path name plus the pulse of the train it belongs to."""

    path: str
    pulse_index: int = 0

    def __post_init__(self):
        if self.pulse_index < 0:
            raise ValueError(f"pulse_index must be >= 0, got {self.pulse_index}")

    def at_pulse(self, k: int) -> "ModeLabel":
        return ModeLabel(self.path, k)

    def __str__(self):
        return f"{self.path}[{self.pulse_index}]"


ModeGroup = Union[ModeLabel, Sequence[ModeLabel]]


def _as_group(m: ModeGroup) -> tuple:
    if isinstance(m, ModeLabel):
        return (m,)
    return tuple(m)


@dataclass(frozen=True, eq=False)
class FockState:
    """Normalized pure state with a per-mode photon-number cutoff.

    ``amplitudes`` maps occupation tuples (ordered like ``modes``) to complex
    amplitudes. Missing keys mean zero. Treat the mapping as read-only.
    """

    modes: tuple
    truncation: int
    amplitudes: Mapping[Occupation, complex]
    prune: float = PRUNE_THRESHOLD
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.truncation < 1:
            raise FockError(f"truncation must be >= 1, got {self.truncation}")
        if not self.modes:
            raise FockError("a state needs at least one mode")
        index = {}
        for i, m in enumerate(self.modes):
            if not isinstance(m, ModeLabel):
                raise TypeError(f"mode labels must be ModeLabel, got {m!r}")
            if m in index:
                raise DuplicateModeError(f"duplicate mode label {m}")
            index[m] = i
        object.__setattr__(self, "_index", index)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_amplitudes(
        cls,
        modes: Sequence[ModeLabel],
        truncation: int,
        amplitudes: Mapping[Occupation, complex],
        *,
        normalize: bool = True,
        prune: float = PRUNE_THRESHOLD,
    ) -> "FockState":
        modes = tuple(modes)
        amps = {}
        for occ, a in amplitudes.items():
            occ = tuple(int(n) for n in occ)
            if len(occ) != len(modes):
                raise FockError(f"occupation {occ} does not match {len(modes)} modes")
            if any(n < 0 or n > truncation for n in occ):
                raise TruncationOverflowError(
                    f"occupation {occ} outside [0, {truncation}]"
                )
            if abs(a) > prune:
                amps[occ] = complex(a)
        if normalize:
            norm = math.sqrt(sum(abs(a) ** 2 for a in amps.values()))
            if norm == 0.0:
                raise FockError("cannot normalize the zero vector")
            amps = {k: v / norm for k, v in amps.items()}
        return cls(modes, truncation, amps, prune)

    # -- inspection -------------------------------------------------------

    def index(self, m: ModeLabel) -> int:
        try:
            return self._index[m]
        except KeyError:
            raise UnknownModeError(f"mode {m} not in state {list(map(str, self.modes))}")

    def __contains__(self, m) -> bool:
        return m in self._index

    def __len__(self):
        return len(self.amplitudes)

    def amplitude(self, occupation: Union[Occupation, Mapping[ModeLabel, int]]) -> complex:
        if isinstance(occupation, Mapping):
            occ = [0] * len(self.modes)
            for m, n in occupation.items():
                occ[self.index(m)] = n
            occupation = tuple(occ)
        return self.amplitudes.get(tuple(occupation), 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def inner(self, other: "FockState") -> complex:
        """<self|other>, after aligning mode order."""
        if set(self.modes) != set(other.modes):
            raise FockError("inner product needs states over the same modes")
        other = other.reordered(self.modes)
        return sum(a.conjugate() * other.amplitudes.get(k, 0j) for k, a in self.amplitudes.items())

    def distance(self, other: "FockState") -> float:
        """Euclidean distance between amplitude vectors (phase-sensitive)."""
        other = other.reordered(self.modes)
        keys = set(self.amplitudes) | set(other.amplitudes)
        return math.sqrt(
            sum(abs(self.amplitudes.get(k, 0j) - other.amplitudes.get(k, 0j)) ** 2 for k in keys)
        )

    def total_photons(self) -> float:
        return sum(abs(a) ** 2 * sum(k) for k, a in self.amplitudes.items())

    # -- structural helpers -----------------------------------------------

    def reordered(self, modes: Sequence[ModeLabel]) -> "FockState":
        modes = tuple(modes)
        if modes == self.modes:
            return self
        if set(modes) != set(self.modes) or len(modes) != len(self.modes):
            raise FockError("reordering must be a permutation of the modes")
        perm = [self.index(m) for m in modes]
        amps = {tuple(k[i] for i in perm): a for k, a in self.amplitudes.items()}
        return FockState(modes, self.truncation, amps, self.prune)

    def relabel(self, mapping: Mapping[ModeLabel, ModeLabel]) -> "FockState":
        for m in mapping:
            self.index(m)
        modes = tuple(mapping.get(m, m) for m in self.modes)
        return FockState(modes, self.truncation, dict(self.amplitudes), self.prune)

    def at_pulse(self, k: int) -> "FockState":
        """Same state with every mode moved to pulse ``k``."""
        return self.relabel({m: m.at_pulse(k) for m in self.modes})

    def tensor(self, other: "FockState") -> "FockState":
        overlap = set(self.modes) & set(other.modes)
        if overlap:
            raise DuplicateModeError(f"modes shared by both factors: {sorted(map(str, overlap))}")
        trunc = max(self.truncation, other.truncation)
        amps = {}
        for k1, a1 in self.amplitudes.items():
            for k2, a2 in other.amplitudes.items():
                a = a1 * a2
                if abs(a) > self.prune:
                    amps[k1 + k2] = a
        return FockState(self.modes + other.modes, trunc, amps, min(self.prune, other.prune))

    def with_vacuum(self, *modes: ModeLabel) -> "FockState":
        return self.tensor(make_vacuum(list(modes), self.truncation))

    def remove_mode(self, m: ModeLabel) -> "FockState":
        """Drop a mode that holds a definite photon number (e.g. after measurement)."""
        i = self.index(m)
        values = {k[i] for k in self.amplitudes}
        if len(values) > 1:
            raise FockError(f"mode {m} is not in a definite number state")
        modes = self.modes[:i] + self.modes[i + 1 :]
        amps = {k[:i] + k[i + 1 :]: a for k, a in self.amplitudes.items()}
        return FockState(modes, self.truncation, amps, self.prune)

    def pruned(self, threshold: float) -> "FockState":
        """Drop amplitudes with magnitude below ``threshold`` and renormalize."""
        return FockState.from_amplitudes(
            self.modes, self.truncation, self.amplitudes, prune=max(threshold, self.prune)
        )

    def with_truncation(self, truncation: int) -> "FockState":
        return FockState.from_amplitudes(
            self.modes, truncation, self.amplitudes, normalize=False, prune=self.prune
        )

    def to_dense(self) -> np.ndarray:
        """Dense tensor of shape (N+1,)*n_modes. Only for small states."""
        out = np.zeros((self.truncation + 1,) * len(self.modes), dtype=complex)
        for k, a in self.amplitudes.items():
            out[k] = a
        return out


def make_vacuum(modes: Sequence[ModeLabel], truncation: int = DEFAULT_TRUNCATION) -> FockState:
    modes = tuple(modes)
    return FockState(modes, truncation, {(0,) * len(modes): 1.0 + 0j})


def number_state(
    occupations: Mapping[ModeLabel, int], truncation: int = DEFAULT_TRUNCATION
) -> FockState:
    modes = tuple(occupations)
    return FockState.from_amplitudes(modes, truncation, {tuple(occupations.values()): 1.0})


# -- passive linear optics --------------------------------------------------


@lru_cache(maxsize=4096)
def _bs_expansion(na: int, nb: int, t: float, theta: float) -> tuple:
    """Output (ma, mb, coeff) terms for input |na, nb> through the beam splitter."""
    st = math.sqrt(t)
    r_ab = 1j * math.sqrt(1.0 - t) * complex(math.cos(theta), math.sin(theta))
    r_ba = 1j * math.sqrt(1.0 - t) * complex(math.cos(theta), -math.sin(theta))
    acc = defaultdict(complex)
    # (st a+ + r_ab b+)^na (r_ba a+ + st b+)^nb
    for p in range(na + 1):
        c1 = math.comb(na, p) * st**p * r_ab ** (na - p)
        for q in range(nb + 1):
            c2 = math.comb(nb, q) * r_ba**q * st ** (nb - q)
            ma = p + q
            acc[ma] += c1 * c2
    n = na + nb
    norm_in = math.sqrt(math.factorial(na) * math.factorial(nb))
    terms = []
    for ma, c in acc.items():
        mb = n - ma
        c = c * math.sqrt(math.factorial(ma) * math.factorial(mb)) / norm_in
        if c != 0:
            terms.append((ma, mb, c))
    return tuple(terms)


def _finish(state: FockState, amps: dict, overflow_mass: float, where: str) -> FockState:
    if overflow_mass > OVERFLOW_TOLERANCE:
        raise TruncationOverflowError(
            f"{where}: {overflow_mass:.3e} probability above cutoff N={state.truncation}; "
            "increase the truncation"
        )
    amps = {k: v for k, v in amps.items() if abs(v) > state.prune}
    if overflow_mass > 0.0:
        norm = math.sqrt(sum(abs(v) ** 2 for v in amps.values()))
        amps = {k: v / norm for k, v in amps.items()}
    return FockState(state.modes, state.truncation, amps, state.prune)


def _beam_splitter_amplitudes(
    amplitudes: Mapping[Occupation, complex], i: int, j: int, t: float, theta: float
) -> dict:
    """Linear map on a raw amplitude dict; occupations may exceed any cutoff."""
    out = defaultdict(complex)
    for occ, amp in amplitudes.items():
        na, nb = occ[i], occ[j]
        if na == 0 and nb == 0:
            out[occ] += amp
            continue
        base = list(occ)
        for ma, mb, c in _bs_expansion(na, nb, t, theta):
            base[i] = ma
            base[j] = mb
            out[tuple(base)] += amp * c
    return out


def apply_beam_splitter(
    state: FockState,
    a: ModeLabel,
    b: ModeLabel,
    transmissivity: float,
    extra_phase: float = 0.0,
) -> FockState:
    """Mix modes ``a`` and ``b``; output ports keep the input labels.

    Probability pushed past the cutoff raises :class:`TruncationOverflowError`
    unless it is below ``OVERFLOW_TOLERANCE``, in which case it is dropped and
    the state renormalized.
    """
    if not 0.0 <= transmissivity <= 1.0:
        raise FockError(f"transmissivity must lie in [0, 1], got {transmissivity}")
    i, j = state.index(a), state.index(b)
    if i == j:
        raise FockError("beam splitter needs two distinct modes")
    out = _beam_splitter_amplitudes(state.amplitudes, i, j, float(transmissivity), float(extra_phase))
    cutoff = state.truncation
    kept, overflow = {}, 0.0
    for occ, v in out.items():
        if occ[i] > cutoff or occ[j] > cutoff:
            overflow += abs(v) ** 2
        else:
            kept[occ] = v
    return _finish(state, kept, overflow, "apply_beam_splitter")


def apply_phase(state: FockState, m: ModeLabel, phi: float) -> FockState:
    i = state.index(m)
    if phi == 0.0:
        return state
    phases = [cmath.exp(1j * n * phi) for n in range(state.truncation + 1)]
    amps = {k: a * phases[k[i]] for k, a in state.amplitudes.items()}
    return FockState(state.modes, state.truncation, amps, state.prune)


# -- measurement and statistics -------------------------------------------


def number_distribution(state: FockState, m: ModeLabel) -> np.ndarray:
    """P(n_m = k) for k = 0..truncation."""
    i = state.index(m)
    p = np.zeros(state.truncation + 1)
    for k, a in state.amplitudes.items():
        p[k[i]] += abs(a) ** 2
    return p


def group_number_distribution(state: FockState, group: ModeGroup) -> np.ndarray:
    """Distribution of the summed photon number over a group of modes."""
    idx = [state.index(m) for m in _as_group(group)]
    p = np.zeros(state.truncation * len(idx) + 1)
    for k, a in state.amplitudes.items():
        p[sum(k[i] for i in idx)] += abs(a) ** 2
    return p


def joint_number_distribution(state: FockState, group_a: ModeGroup, group_b: ModeGroup) -> np.ndarray:
    """P(n_A = j, n_B = k) where n_X sums the photon numbers of a mode group."""
    ia = [state.index(m) for m in _as_group(group_a)]
    ib = [state.index(m) for m in _as_group(group_b)]
    if set(ia) & set(ib):
        raise FockError("mode groups must be disjoint")
    p = np.zeros((state.truncation * len(ia) + 1, state.truncation * len(ib) + 1))
    for k, a in state.amplitudes.items():
        p[sum(k[i] for i in ia), sum(k[i] for i in ib)] += abs(a) ** 2
    return p


def measure_mode(state: FockState, m: ModeLabel, rng: np.random.Generator):
    """Projectively count photons in ``m``.

    Returns ``(outcome, collapsed_state, probability)``; the collapsed state
    keeps mode ``m`` in the number state ``outcome``.
    """
    p = number_distribution(state, m)
    p = p / p.sum()
    cdf = np.cumsum(p)
    outcome = min(int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right")), len(p) - 1)
    i = state.index(m)
    amps = {k: a for k, a in state.amplitudes.items() if k[i] == outcome}
    norm = math.sqrt(p[outcome])
    collapsed = FockState(state.modes, state.truncation, {k: a / norm for k, a in amps.items()}, state.prune)
    return outcome, collapsed, float(p[outcome])


def click_probability_matrix(n_max_a: int, n_max_b: int, efficiency: float, dark_prob: float) -> np.ndarray:
    """Threshold-detector response: w[j, k, c] for photon numbers (j, k).

    ``c`` indexes (both, a_only, b_only, none).
    """
    ja = 1.0 - (1.0 - dark_prob) * (1.0 - efficiency) ** np.arange(n_max_a + 1)
    kb = 1.0 - (1.0 - dark_prob) * (1.0 - efficiency) ** np.arange(n_max_b + 1)
    pa, pb = ja[:, None], kb[None, :]
    return np.stack([pa * pb, pa * (1 - pb), (1 - pa) * pb, (1 - pa) * (1 - pb)], axis=-1)


@dataclass(frozen=True)
class ClickProbabilities:
    p_both: float
    p_a_only: float
    p_b_only: float
    p_none: float

    @property
    def singles_a(self) -> float:
        return self.p_both + self.p_a_only

    @property
    def singles_b(self) -> float:
        return self.p_both + self.p_b_only

    def as_array(self) -> np.ndarray:
        return np.array([self.p_both, self.p_a_only, self.p_b_only, self.p_none])


def click_probabilities_from_joint(joint: np.ndarray, efficiency: float, dark_prob: float) -> ClickProbabilities:
    if not (0.0 <= efficiency <= 1.0 and 0.0 <= dark_prob <= 1.0):
        raise ValueError(f"efficiency and dark_prob must lie in [0, 1], got {efficiency}, {dark_prob}")
    w = click_probability_matrix(joint.shape[0] - 1, joint.shape[1] - 1, efficiency, dark_prob)
    probs = np.einsum("jk,jkc->c", joint, w)
    return ClickProbabilities(*(float(x) for x in probs))


def joint_click_probabilities(
    state: FockState, mode_a: ModeGroup, mode_b: ModeGroup, det: "DetectorConfig"
) -> ClickProbabilities:
    """Exact joint response of two threshold detectors.

    Each detector sees the summed photon number of its mode group; a photon
    is registered with probability ``det.efficiency`` and a dark click is OR-ed
    in with probability ``det.dark_prob``.
    """
    joint = joint_number_distribution(state, mode_a, mode_b)
    return click_probabilities_from_joint(joint, det.efficiency, det.dark_prob)


def marginal_tv_distance(p: Iterable[float], q: Iterable[float]) -> float:
    p, q = np.asarray(list(p), float), np.asarray(list(q), float)
    n = max(len(p), len(q))
    p = np.pad(p, (0, n - len(p)))
    q = np.pad(q, (0, n - len(q)))
    return 0.5 * float(np.abs(p - q).sum())


def poisson_like(p: Sequence[float]) -> np.ndarray:
    """Poisson law with the same mean as ``p``, on the same support."""
    p = np.asarray(p, float)
    k = np.arange(len(p))
    mean = float((k * p).sum())
    return poisson.pmf(k, mean)
