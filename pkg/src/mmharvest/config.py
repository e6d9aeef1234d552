"""Scenario files: sectioned ``key = value`` text with units.

Powers accept ``dBm``, ``dBW``, ``W``, ``mW``, ``uW``; a bare ``dB`` on a power
is read as dBm.  Gains accept ``dB`` or a linear number, densities ``/km2`` or
``/m2``, angles ``deg`` or ``rad``, frequencies ``Hz`` through ``GHz``.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .model import AntennaPattern, SystemParams, db_to_linear, ula_pattern

SECTIONS = ("system", "antenna", "receiver", "sweep", "run")
MODES = ("energy-connected", "energy-nonconnected", "overall", "avg-power", "swipt", "combiner-study", "uhf-compare")
ENGINES = ("analytic", "sim", "both")


class ConfigError(ValueError):
    """Invalid or conflicting scenario configuration."""


_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_QUANTITY = re.compile(rf"^\s*({_NUMBER}|[-+]?inf)\s*([A-Za-z/0-9]*)\s*$")

_POWER = {"w": 1.0, "mw": 1e-3, "uw": 1e-6, "nw": 1e-9}
_FREQ = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_LENGTH = {"m": 1.0, "km": 1e3}
_DENSITY = {"/m2": 1.0, "/km2": 1e-6}


def parse_quantity(text: str, kind: str) -> float:
    """Convert ``"13 dBm"``, ``"100 /km2"``, ``"30 deg"`` ... to SI / linear units."""
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigError(f"cannot parse {text!r} as a {kind} value")
    value, unit = float(m.group(1)), m.group(2).lower()
    if kind == "power":
        if unit in ("dbm", "db"):
            return 0.0 if value == -math.inf else float(db_to_linear(value)) * 1e-3
        if unit == "dbw":
            return 0.0 if value == -math.inf else float(db_to_linear(value))
        if unit in _POWER or unit == "":
            return value * _POWER.get(unit, 1.0)
    elif kind == "gain":
        if unit == "db":
            return float(db_to_linear(value))
        if unit == "":
            return value
    elif kind == "density":
        if unit in _DENSITY:
            return value * _DENSITY[unit]
        if unit == "":
            return value
    elif kind == "angle":
        if unit == "deg":
            return math.radians(value)
        if unit in ("rad", ""):
            return value
    elif kind == "length":
        if unit in _LENGTH or unit == "":
            return value * _LENGTH.get(unit, 1.0)
    elif kind == "frequency":
        if unit in _FREQ or unit == "":
            return value * _FREQ.get(unit, 1.0)
    elif kind == "db":
        if unit in ("db", ""):
            return value
    elif kind == "plain":
        if unit == "":
            return value
    elif kind == "int":
        if unit == "" and value == int(value):
            return int(value)
    raise ConfigError(f"unit {m.group(2)!r} not valid for a {kind} value in {text!r}")


# [system] key -> (SystemParams field, kind); "auto" values keep the default rule
SYSTEM_KEYS = {
    "bs_density": ("bs_density", "density"),
    "tx_power": ("tx_power", "power"),
    "blockage_beta": ("blockage_beta", "plain"),
    "alpha_los": ("alpha_los", "plain"),
    "alpha_nlos": ("alpha_nlos", "plain"),
    "intercept_los": ("intercept_los", "gain"),
    "intercept_nlos": ("intercept_nlos", "gain"),
    "nakagami_los": ("nakagami_los", "int"),
    "nakagami_nlos": ("nakagami_nlos", "int"),
    "rectifier_eff": ("rectifier_eff", "plain"),
    "activation_threshold": ("activation_threshold", "power"),
    "min_distance": ("min_distance", "length"),
    "noise_power": ("noise_power", "power"),
    "conversion_noise": ("conversion_noise", "power"),
    "bandwidth": ("bandwidth", "frequency"),
    "carrier_freq": ("carrier_freq", "frequency"),
    "noise_figure": ("noise_figure_db", "db"),
    "user_density": ("user_density", "density"),
    "connected_fraction": ("connected_fraction", "plain"),
}
RECEIVER_KEYS = {"num_antennas": "int", "element_spacing": "plain", "combiner": "str"}
RUN_KEYS = {
    "mode": "str",
    "engine": "str",
    "trials": "int",
    "seed": "int",
    "approx_terms": "int",
    "threshold": "power",
    "threshold_ncon": "power",
    "sinr_threshold": "gain",
    "split_ratio": "plain",
    "user": "str",
    "curves": "list",
    "description": "str",
    "reproduces": "str",
}
ANTENNA_KEYS = {"tx": "pattern", "tx_elements": "int", "rx": "pattern", "ula_convention": "str"}
SWEEP_KEYS = {"variable": "str", "values": "str", "series": "str", "series_values": "str", "series_labels": "str"}
KNOWN = {"system": SYSTEM_KEYS, "antenna": ANTENNA_KEYS, "receiver": RECEIVER_KEYS, "sweep": SWEEP_KEYS, "run": RUN_KEYS}


def key_kind(path: str) -> str:
    section, _, key = path.partition(".")
    table = KNOWN.get(section)
    if table is None or key not in table:
        raise ConfigError(f"unknown setting {path!r}")
    kind = table[key]
    return kind[1] if isinstance(kind, tuple) else kind


def parse_pattern(text: str, convention: str = "db") -> AntennaPattern:
    """``omni``, ``ula N`` or ``M dB, m dB, theta deg, theta_bar deg`` (units optional)."""
    t = text.strip().strip("[]").strip()
    if t.lower() == "omni":
        return AntennaPattern.omni()
    m = re.fullmatch(r"ula\s+(\d+)", t, flags=re.IGNORECASE)
    if m:
        try:
            return ula_pattern(int(m.group(1)), convention)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    parts = [p.strip() for p in t.split(",")]
    if len(parts) != 4:
        raise ConfigError(f"pattern {text!r} needs four entries: main dB, side dB, main deg, side deg")

    def with_unit(s, unit):
        return s if re.search(r"[A-Za-z]", s) else f"{s} {unit}"

    try:
        return AntennaPattern(
            parse_quantity(with_unit(parts[0], "dB"), "gain"),
            parse_quantity(with_unit(parts[1], "dB"), "gain"),
            parse_quantity(with_unit(parts[2], "deg"), "angle"),
            parse_quantity(with_unit(parts[3], "deg"), "angle"),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid pattern {text!r}: {exc}") from exc


_GRID = re.compile(rf"^\s*(linspace|geomspace)\(\s*({_NUMBER})\s*,\s*({_NUMBER})\s*,\s*(\d+)\s*\)\s*([A-Za-z/0-9]*)\s*$")


def parse_grid(text: str) -> tuple[list[str], list[float], str]:
    """Expand a sweep grid into per-point setting strings.

    Returns ``(settings, numbers, unit)``: the strings fed back through the
    key's parser, the plain numbers in config units for the output column,
    and the unit label.
    """
    m = _GRID.match(text)
    if m:
        fn, a, b, n, unit = m.groups()
        nums = getattr(np, fn)(float(a), float(b), int(n))
        nums = [float(f"{v:.12g}") for v in nums]
    else:
        items = [s.strip() for s in text.split(",") if s.strip()]
        if not items:
            raise ConfigError("sweep grid is empty")
        parsed = []
        for s in items:
            q = _QUANTITY.match(s)
            if not q:
                raise ConfigError(f"cannot parse grid entry {s!r}")
            parsed.append((float(q.group(1)), q.group(2)))
        nums = [v for v, _ in parsed]
        units = {u for _, u in parsed}
        # a single trailing unit applies to the whole list
        if len(units) == 2 and "" in units and parsed[-1][1] and all(not u for _, u in parsed[:-1]):
            units = {parsed[-1][1]}
        if len(units) > 1:
            raise ConfigError(f"mixed units in grid {text!r}")
        unit = units.pop()
    if not nums:
        raise ConfigError("sweep grid is empty")
    if any(b <= a for a, b in zip(nums, nums[1:])):
        raise ConfigError(f"sweep grid must be strictly increasing: {text!r}")
    return [f"{v:.12g} {unit}".strip() for v in nums], nums, unit


@dataclass
class RawConfig:
    """Section -> key -> raw string, plus the file it came from."""

    values: dict[str, dict[str, str]] = field(default_factory=dict)
    source: str = "<memory>"

    def get(self, path: str, default: str | None = None) -> str | None:
        section, _, key = path.partition(".")
        return self.values.get(section, {}).get(key, default)

    def with_setting(self, path: str, value: str) -> "RawConfig":
        key_kind(path)
        section, _, key = path.partition(".")
        values = {s: dict(v) for s, v in self.values.items()}
        values.setdefault(section, {})[key] = value
        return RawConfig(values, self.source)


def read_config(text: str, source: str = "<memory>") -> RawConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    values: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, value in parser.items(section):
            key_kind(f"{section}.{key}")
            values.setdefault(section, {})[key] = value.strip()
    return RawConfig(values, source)


def bundled_scenarios() -> dict[str, str]:
    """Bundled scenario name -> file text."""
    root = resources.files("mmharvest") / "scenarios"
    return {p.name[:-4]: p.read_text(encoding="utf-8") for p in sorted(root.iterdir(), key=lambda p: p.name)
            if p.name.endswith(".ini")}


def load_config(name_or_path: str) -> RawConfig:
    path = Path(name_or_path)
    if path.is_file():
        return read_config(path.read_text(encoding="utf-8"), str(path))
    bundled = bundled_scenarios()
    if name_or_path in bundled:
        return read_config(bundled[name_or_path], f"<bundled {name_or_path}>")
    raise ConfigError(f"no scenario file or bundled scenario named {name_or_path!r}")


# ---------------------------------------------------------------------------
# resolved settings


@dataclass(frozen=True)
class RunSettings:
    mode: str
    engine: str
    trials: int | None
    seed: int
    approx_terms: int
    threshold: float
    threshold_ncon: float
    sinr_threshold: float
    split_ratio: float
    user: str
    curves: tuple[str, ...]


def _get(raw: RawConfig, path: str, default=None):
    text = raw.get(path)
    if text is None:
        return default
    kind = key_kind(path)
    if kind == "str":
        return text
    if kind == "list":
        return tuple(s.strip() for s in text.split(",") if s.strip())
    return parse_quantity(text, kind)


def build_system(raw: RawConfig) -> SystemParams:
    kwargs = {}
    for key, (name, kind) in SYSTEM_KEYS.items():
        text = raw.get(f"system.{key}")
        if text is None or text.lower() in ("auto", "free-space", "thermal"):
            continue
        kwargs[name] = parse_quantity(text, kind)
    try:
        return SystemParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{raw.source}: [system] {exc}") from exc


def build_patterns(raw: RawConfig) -> tuple[AntennaPattern, AntennaPattern]:
    """Transmit and receive patterns; ``tx_elements`` (a ULA size) takes precedence over ``tx``."""
    conv = raw.get("antenna.ula_convention", "db")
    elements = _get(raw, "antenna.tx_elements")
    tx_text = f"ula {elements}" if elements is not None else raw.get("antenna.tx", "omni")
    return parse_pattern(tx_text, conv), parse_pattern(raw.get("antenna.rx", "omni"), conv)


def build_receiver(raw: RawConfig):
    from .montecarlo import ReceiverSpec

    try:
        return ReceiverSpec(
            int(_get(raw, "receiver.num_antennas", 1)),
            float(_get(raw, "receiver.element_spacing", 0.5)),
            _get(raw, "receiver.combiner", "switch-greedy"),
        )
    except ValueError as exc:
        raise ConfigError(f"{raw.source}: [receiver] {exc}") from exc


def build_run(raw: RawConfig) -> RunSettings:
    mode = _get(raw, "run.mode")
    if mode not in MODES:
        raise ConfigError(f"{raw.source}: run.mode must be one of {', '.join(MODES)}; got {mode!r}")
    engine = _get(raw, "run.engine", "both")
    if engine not in ENGINES:
        raise ConfigError(f"{raw.source}: run.engine must be analytic, sim or both; got {engine!r}")
    trials = _get(raw, "run.trials")
    if engine != "analytic" and (trials is None or trials < 1):
        raise ConfigError(f"{raw.source}: run.trials must be >= 1 when run.engine = {engine}")
    user = _get(raw, "run.user", "connected")
    if user not in ("connected", "nonconnected"):
        raise ConfigError(f"{raw.source}: run.user must be connected or nonconnected")
    return RunSettings(
        mode=mode,
        engine=engine,
        trials=trials,
        seed=int(_get(raw, "run.seed", 1)),
        approx_terms=int(_get(raw, "run.approx_terms", 5)),
        threshold=float(_get(raw, "run.threshold", 0.0)),
        threshold_ncon=float(_get(raw, "run.threshold_ncon", 0.0)),
        sinr_threshold=float(_get(raw, "run.sinr_threshold", 1.0)),
        split_ratio=float(_get(raw, "run.split_ratio", 0.5)),
        user=user,
        curves=_get(raw, "run.curves", ()) or (),
    )


def check_conflicts(raw: RawConfig, system: SystemParams, run: RunSettings):
    if run.mode in ("swipt", "combiner-study") and system.connected_fraction != 1:
        raise ConfigError(
            f"{raw.source}: run.mode = {run.mode} assumes beam-aligned users, "
            f"but system.connected_fraction = {system.connected_fraction}; set it to 1"
        )
    if run.mode in ("swipt", "combiner-study") and run.user != "connected":
        raise ConfigError(f"{raw.source}: run.mode = {run.mode} conflicts with run.user = {run.user}")
    if run.mode in ("swipt", "combiner-study") and not 0 < run.split_ratio < 1:
        raise ConfigError(f"{raw.source}: run.split_ratio must lie strictly inside (0, 1)")


def replace_system(system: SystemParams, **changes) -> SystemParams:
    return dataclasses.replace(system, **changes)
