"""Platform configuration: a flat key = value file with sections.

Every default of the signal, operator, grid, classifier and service layers
is overridable here. The digest of the canonical serialized form is stamped
into trial logs so analysis can detect configuration drift.
"""

from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .signals import SinusoidConfig, SwitchParams
from .simcore import ClassifierParams, OperatorParams, SimGrid


@dataclass(frozen=True)
class ExperimentSettings:
    subjects: int = 10
    master_seed: int = 1

    def __post_init__(self):
        if self.subjects < 1:
            raise ConfigError("subjects must be >= 1")


@dataclass(frozen=True)
class ServiceSettings:
    tick_rate: float = 60.0       # UI updates per second of trial time
    time_scale: float = 1.0       # 1.0 = real time; 0 = run unpaced
    axis_gain: float = 6.0        # command units per unit of operator axis
    out_dir: str = "sessions"

    def __post_init__(self):
        if self.tick_rate <= 0:
            raise ConfigError("tick_rate must be positive")
        if self.time_scale < 0:
            raise ConfigError("time_scale must be >= 0")


@dataclass(frozen=True)
class PlatformConfig:
    signals: SinusoidConfig = field(default_factory=SinusoidConfig)
    switching: SwitchParams = field(default_factory=SwitchParams)
    operator: OperatorParams = field(default_factory=OperatorParams)
    grid: SimGrid = field(default_factory=SimGrid)
    classifier: ClassifierParams = field(default_factory=ClassifierParams)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    service: ServiceSettings = field(default_factory=ServiceSettings)

    def digest(self) -> str:
        return hashlib.sha256(to_text(self).encode()).hexdigest()[:12]


_SECTIONS = {
    "signals": (SinusoidConfig, "signals"),
    "switching": (SwitchParams, "switching"),
    "operator": (OperatorParams, "operator"),
    "grid": (SimGrid, "grid"),
    "classifier": (ClassifierParams, "classifier"),
    "experiment": (ExperimentSettings, "experiment"),
    "service": (ServiceSettings, "service"),
}

_LIST_KEYS = {("signals", "multiples"), ("signals", "amplitudes")}


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return " ".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(section: str, name: str, text: str, target_type):
    if (section, name) in _LIST_KEYS:
        parts = text.replace(",", " ").split()
        if name == "multiples":
            return tuple(int(p) for p in parts)
        return tuple(float(p) for p in parts)
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    return text


def to_text(config: PlatformConfig) -> str:
    """Canonical serialized form, also the digest input."""
    out = io.StringIO()
    for section, (_, attr) in _SECTIONS.items():
        obj = getattr(config, attr)
        out.write(f"[{section}]\n")
        for f in fields(obj):
            out.write(f"{f.name} = {_format_value(getattr(obj, f.name))}\n")
        out.write("\n")
    return out.getvalue()


def from_text(text: str) -> PlatformConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    kwargs = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        cls, attr = _SECTIONS[section]
        known = {f.name: f.type for f in fields(cls)}
        defaults = cls()
        values = {}
        for name, raw in parser.items(section):
            if name not in known:
                raise ConfigError(f"unknown key {name!r} in section [{section}]")
            current = getattr(defaults, name)
            target_type = type(current)
            values[name] = _parse_value(section, name, raw, target_type)
        kwargs[attr] = cls(**values)
    return PlatformConfig(**kwargs)


def load_config(path: str | Path | None) -> PlatformConfig:
    """Read a config file; None or a missing optional path yields defaults."""
    if path is None:
        return PlatformConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return from_text(p.read_text())


def save_config(config: PlatformConfig, path: str | Path) -> None:
    Path(path).write_text(to_text(config))
