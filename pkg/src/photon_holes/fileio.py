"""Configuration text, histogram files and run summaries."""

from __future__ import annotations

import cmath
import csv
import decimal
import io
import math
import re
from pathlib import Path
from decimal import Decimal
from typing import Optional

import numpy as np

from photon_holes.apparatus import FransonConfig
from photon_holes.detection import DetectorConfig, TacHistogram
from photon_holes.experiments import (
    _PANEL_PHASE,
    SUMMARY_KEYS,
    ExperimentConfig,
    Mode,
    Scenario,
    ScenarioResult,
)
from photon_holes.sources import PulseTrainConfig, SourceParams, lock_phase, matched_alpha

HEADER = ("bin_start_ns", "bin_end_ns", "counts")
_GEOMETRY = re.compile(r"^# tac_histogram bin_width_s=(\S+) window_s=(\S+) n_starts=(\S+)$")


class ConfigError(ValueError):
    """Bad configuration text; the message names the key and line."""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


class HistogramFormatError(ValueError):
    pass


# -- histogram files -------------------------------------------------------------


def _num(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def histogram_text(h: TacHistogram) -> str:
    buf = io.StringIO()
    buf.write(f"# tac_histogram bin_width_s={h.bin_width!r} window_s={h.window!r} n_starts={_num(h.n_starts)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    edges = h.edges * 1e9
    for lo, hi, c in zip(edges[:-1], edges[1:], h.counts):
        w.writerow((f"{lo:.6f}", f"{hi:.6f}", _num(c)))
    return buf.getvalue()


def export_histogram(h: TacHistogram, path) -> Path:
    """Write ``h`` as CSV: a geometry comment, the header, one row per bin."""
    path = Path(path)
    try:
        path.write_text(histogram_text(h))
    except OSError as exc:
        raise OSError(f"cannot write histogram to {path}: {exc.strerror or exc}") from exc
    return path


def _parse_count(s: str):
    try:
        return int(s)
    except ValueError:
        return float(s)


def parse_histogram(text: str) -> TacHistogram:
    lines = text.splitlines()
    if len(lines) < 2:
        raise HistogramFormatError("histogram file is truncated")
    m = _GEOMETRY.match(lines[0])
    if not m:
        raise HistogramFormatError("missing '# tac_histogram' geometry line")
    bin_width, window = float(m.group(1)), float(m.group(2))
    n_starts = _parse_count(m.group(3))
    rows = list(csv.reader(lines[1:]))
    if tuple(rows[0]) != HEADER:
        raise HistogramFormatError(f"unexpected header {rows[0]}")
    counts = [_parse_count(r[2]) for r in rows[1:]]
    dtype = np.int64 if all(isinstance(c, int) for c in counts) else float
    return TacHistogram(bin_width, window, np.array(counts, dtype=dtype), n_starts)


def import_histogram(path) -> TacHistogram:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read histogram from {path}: {exc.strerror or exc}") from exc
    try:
        return parse_histogram(text)
    except (HistogramFormatError, ValueError, IndexError) as exc:
        raise HistogramFormatError(f"{path}: {exc}") from exc


# -- configuration text --------------------------------------------------------


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {s!r}")
    return v


# Unit conversions go through 60-digit decimals so each is a single correctly
# rounded step; this keeps format_config -> parse_config lossless.
_CTX = decimal.Context(prec=60)
_PI = Decimal("3.14159265358979323846264338327950288419716939937510582097494459")
# unit -> (multiplier, divisor) taking the config unit to SI
_UNITS = {"deg": (_PI, Decimal(180)), "ns": (Decimal(1), Decimal(10**9)), "ps": (Decimal(1), Decimal(10**12))}


def _decimal(s) -> Decimal:
    try:
        d = Decimal(s.strip()) if isinstance(s, str) else Decimal(s)
    except decimal.InvalidOperation:
        raise ValueError(f"expected a number, got {s!r}") from None
    if not d.is_finite():
        raise ValueError(f"expected a finite number, got {s!r}")
    return d


def to_si(value, unit: str) -> float:
    mul, div = _UNITS[unit]
    return float(_CTX.divide(_CTX.multiply(_decimal(value), mul), div))


def from_si(value: float, unit: str) -> str:
    """Shortest text that ``to_si`` maps back to ``value`` exactly."""
    mul, div = _UNITS[unit]
    exact = _CTX.divide(_CTX.multiply(Decimal(value), div), mul)
    short = repr(float(exact))
    if to_si(short, unit) == value:
        return short
    return str(exact)


def _int(s: str) -> int:
    return int(s, 0)


def _unit(lo: float, hi: float):
    def conv(s):
        v = _float(s)
        if not lo <= v <= hi:
            raise ValueError(f"must lie in [{lo:g}, {hi:g}], got {v:g}")
        return v
    return conv


def _positive(conv):
    def wrapped(s):
        v = conv(s)
        if not v > 0:
            raise ValueError(f"must be positive, got {v}")
        return v
    return wrapped


def _nonneg(conv):
    def wrapped(s):
        v = conv(s)
        if v < 0:
            raise ValueError(f"must be non-negative, got {v}")
        return v
    return wrapped


def _alpha(s: str):
    if s.strip().lower() == "matched":
        return "matched"
    if "j" in s:
        return complex(s.replace(" ", ""))
    return _nonneg(_float)(s)


def _choice(enum):
    def conv(s):
        try:
            return enum(s.strip())
        except ValueError:
            raise ValueError(f"expected one of {[e.value for e in enum]}, got {s!r}") from None
    return conv


def _seed(s: str) -> int:
    v = _int(s)
    if not 0 <= v < 2**64:
        raise ValueError(f"must be a 64-bit unsigned integer, got {v}")
    return v


# key -> converter; every key is optional
KEYS: dict = {
    "alpha": _alpha,
    "xi": _unit(0.0, 0.1),
    "phase_deg": _decimal,
    "overlap": _unit(0.0, 1.0),
    "efficiency": _unit(0.0, 1.0),
    "dark_prob": _unit(0.0, 1.0),
    "rep_rate_hz": _positive(_float),
    "n_pulses": _positive(_int),
    "seed": _seed,
    "scenario": _choice(Scenario),
    "mode": _choice(Mode),
    "bin_width_ns": _positive(_decimal),
    "window_ns": _positive(_decimal),
    "delay_pulses": _positive(_int),
    "phase_a_deg": _decimal,
    "phase_b_deg": _decimal,
    "jitter_ps": _nonneg(_decimal),
    "lock_jitter_deg": _nonneg(_decimal),
}

DEFAULTS = {
    "alpha": "matched",
    "xi": 0.04,
    "overlap": 0.85,
    "efficiency": 1.0,
    "dark_prob": 0.0,
    "rep_rate_hz": 76e6,
    "n_pulses": 1_000_000,
    "seed": 0,
    "scenario": Scenario.FIG3C,
    "mode": Mode.MONTE_CARLO,
    "bin_width_ns": 0.5,
    "window_ns": 45.0,
    "delay_pulses": 1,
    "phase_a_deg": 0.0,
    "phase_b_deg": 0.0,
    "jitter_ps": 300.0,
    "lock_jitter_deg": 0.0,
}


def _read_pairs(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, val = (p.strip() for p in line.partition("="))
        if key not in KEYS:
            raise ConfigError("unknown key", key=key, line=lineno)
        if key in values:
            raise ConfigError("duplicate key", key=key, line=lineno)
        if not val:
            raise ConfigError("missing value", key=key, line=lineno)
        try:
            values[key] = (KEYS[key](val), lineno)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), key=key, line=lineno) from None
    return values


def config_from_values(values: dict, lines: Optional[dict] = None) -> ExperimentConfig:
    """Build a config from already converted key values (missing keys take defaults)."""
    lines = lines or {}
    v = {**DEFAULTS, **values}
    scenario = Scenario(v["scenario"])
    panel = _PANEL_PHASE.get(scenario)
    if "phase_deg" in values:
        phi = to_si(values["phase_deg"], "deg")
        if panel is not None and abs(cmath.exp(1j * phi) - cmath.exp(1j * panel)) > 1e-9:
            raise ConfigError(
                f"scenario {scenario.value} fixes the phase at {math.degrees(panel):g} degrees",
                key="phase_deg", line=lines.get("phase_deg"))
    else:
        phi = panel if panel is not None else math.pi
    alpha = v["alpha"]
    if alpha == "matched":
        alpha = matched_alpha(v["xi"])
    elif not isinstance(alpha, complex):
        alpha = alpha * cmath.exp(1j * lock_phase(v["xi"]))

    def build(key, fn):
        try:
            return fn()
        except ValueError as exc:
            raise ConfigError(str(exc), key=key, line=lines.get(key)) from None

    sources = build("alpha", lambda: SourceParams(alpha=alpha, xi=v["xi"], phi=phi, overlap=v["overlap"]))
    train = PulseTrainConfig(rep_rate=v["rep_rate_hz"], n_pulses=v["n_pulses"],
                             locked_phase_jitter=to_si(v["lock_jitter_deg"], "deg"))
    det = DetectorConfig(v["efficiency"], v["dark_prob"], to_si(v["jitter_ps"], "ps"))
    franson = FransonConfig(v["delay_pulses"], to_si(v["phase_a_deg"], "deg"), to_si(v["phase_b_deg"], "deg"))
    return build("window_ns", lambda: ExperimentConfig(
        sources=sources, train=train, detectors=det, scenario=scenario, seed=v["seed"], mode=v["mode"],
        bin_width=to_si(v["bin_width_ns"], "ns"), window=to_si(v["window_ns"], "ns"), franson=franson))


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a validated config."""
    pairs = _read_pairs(text)
    return config_from_values({k: val for k, (val, _) in pairs.items()},
                              {k: ln for k, (_, ln) in pairs.items()})


def read_config_values(text: str) -> dict:
    """Converted values of the keys present in ``text``, without applying defaults."""
    return {k: val for k, (val, _) in _read_pairs(text).items()}


def format_config(cfg: ExperimentConfig) -> str:
    """Config text that ``parse_config`` maps back onto ``cfg``."""
    src = cfg.sources
    if src.alpha == matched_alpha(src.xi):
        alpha = "matched"
    else:
        alpha = repr(src.alpha)
    deg = lambda rad: from_si(rad, "deg")
    ns = lambda s: from_si(s, "ns")
    ps = lambda s: from_si(s, "ps")
    f = cfg.franson or FransonConfig()
    rows = [
        ("scenario", cfg.scenario.value),
        ("mode", cfg.mode.value),
        ("seed", str(cfg.seed)),
        ("alpha", alpha),
        ("xi", repr(src.xi)),
        ("phase_deg", deg(src.phi)),
        ("overlap", repr(src.overlap)),
        ("efficiency", repr(cfg.detectors.efficiency)),
        ("dark_prob", repr(cfg.detectors.dark_prob)),
        ("jitter_ps", ps(cfg.detectors.jitter_sigma)),
        ("rep_rate_hz", repr(cfg.train.rep_rate)),
        ("n_pulses", str(cfg.train.n_pulses)),
        ("lock_jitter_deg", deg(cfg.train.locked_phase_jitter)),
        ("bin_width_ns", ns(cfg.bin_width)),
        ("window_ns", ns(cfg.window)),
        ("delay_pulses", str(f.delay_pulses)),
        ("phase_a_deg", deg(f.phase_a)),
        ("phase_b_deg", deg(f.phase_b)),
    ]
    return "".join(f"{k} = {v}\n" for k, v in rows)


# -- summaries -------------------------------------------------------------------


def _summary_value(v) -> str:
    if v is None:
        return "none"
    return _num(v)


def summary_text(result: ScenarioResult) -> str:
    """``key=value`` lines: the fixed summary keys, then scalar scenario extras."""
    lines = [f"scenario={result.scenario.value}", f"mode={result.mode.value}"]
    lines += [f"{k}={_summary_value(result.summary.get(k))}" for k in SUMMARY_KEYS]
    for k in sorted(result.extra):
        v = result.extra[k]
        if isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool):
            lines.append(f"extra.{k}={_num(v)}")
    return "\n".join(lines) + "\n"


def parse_summary(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        key, _, val = line.partition("=")
        if val == "none":
            out[key] = None
        elif key in ("scenario", "mode"):
            out[key] = val
        else:
            out[key] = _parse_count(val)
    return out


def scan_text(scan) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("phase_deg", "p_both"))
    for phi, p in scan:
        w.writerow((repr(math.degrees(phi)), repr(float(p))))
    return buf.getvalue()

