"""Run configuration: defaults, INI-style file, command-line overrides.

File format (all keys optional)::

    [features]
    window = 60
    max_duration = 60
    idle_timeout = 15
    port_weights = 1,1,1

    [balance]
    d_th3 = 0.9
    d_th2 = 0.95
    rho = 1.0
    alpha = 1.0
    k = 5
    delta_type_th = 1
    delta_another_th = 1
    passthrough = false

    [boost]
    T = 200
    max_depth = 3
    eta = 1.0

    [intel]
    alexa =
    vt =
    geo =

    [run]
    seed = 0
    test_ratio = 0.2
    metric = auto

Unknown sections or keys are rejected.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace

from .errors import DataError
from .padasyn import BalanceConfig

CONFIG_ENV = "C2TRAFFIC_CONFIG"


class ConfigError(DataError):
    pass


@dataclass(frozen=True)
class FeatureConfig:
    window: float = 60.0
    max_duration: float = 60.0
    idle_timeout: float = 15.0
    port_weights: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if min(self.window, self.max_duration, self.idle_timeout) <= 0:
            raise ValueError("window lengths must be positive")


@dataclass(frozen=True)
class BoostConfig:
    T: int = 200
    max_depth: int = 3
    eta: float = 1.0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


@dataclass(frozen=True)
class IntelConfig:
    alexa: str | None = None
    vt: str | None = None
    geo: str | None = None


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    test_ratio: float = 0.2
    metric: str = "auto"

    def __post_init__(self):
        if not (self.metric in ("auto", "macro") or self.metric.startswith("binary:")):
            raise ValueError(f"metric must be auto, macro or binary:<class>, got {self.metric!r}")


@dataclass(frozen=True)
class Config:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    balance: BalanceConfig = field(default_factory=BalanceConfig)
    boost: BoostConfig = field(default_factory=BoostConfig)
    intel: IntelConfig = field(default_factory=IntelConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def balance_config(self) -> BalanceConfig:
        """Balancing parameters with the run seed applied."""
        return replace(self.balance, seed=self.run.seed)


_SECTIONS = {"features": FeatureConfig, "balance": BalanceConfig, "boost": BoostConfig,
             "intel": IntelConfig, "run": RunConfig}


def _convert(cls, name: str, text: str):
    default = getattr(cls(), name)
    text = text.strip()
    if name == "port_weights":
        parts = [p for p in text.split(",") if p.strip()]
        if len(parts) != 3:
            raise ValueError("port_weights needs three comma-separated numbers")
        return tuple(float(p) for p in parts)
    if isinstance(default, bool):
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    return text or None


def apply_values(cfg: Config, section: str, values: dict) -> Config:
    """Return ``cfg`` with ``values`` (raw strings or typed) set in ``section``."""
    if section not in _SECTIONS:
        raise ConfigError(f"unknown config section [{section}]")
    cls = _SECTIONS[section]
    known = {f.name.lower(): f.name for f in fields(cls)}
    updates = {}
    for key, raw in values.items():
        name = known.get(key.lower())
        if name is None or (section == "balance" and name == "seed"):
            raise ConfigError(f"unknown config key {section}.{key}")
        try:
            updates[name] = _convert(cls, name, raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"{section}.{key}: {exc}") from None
    try:
        new_section = replace(getattr(cfg, section), **updates)
    except ValueError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None
    return replace(cfg, **{section: new_section})


def load_config(path: str | None = None) -> Config:
    """Defaults, overlaid with ``path`` (or the file named by the environment variable)."""
    cfg = Config()
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return cfg
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        cfg = apply_values(cfg, section, dict(parser.items(section)))
    return cfg
