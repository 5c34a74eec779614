"""Flat ``section.key = value`` scenario files.

Blank lines and ``#`` comments are ignored. Every key must be known; values are
converted to the type of the default. ``none`` clears optional values.
"""

from __future__ import annotations

import os
from dataclasses import fields
from importlib import resources

from .energy import EnergyModel


class ConfigError(ValueError):
    def __init__(self, message, *, line=None, key=None, path=None):
        where = []
        if path:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if key:
            where.append(f"key {key!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.key = key


# key -> (type, default); type "list" means comma separated floats
SCHEMA = {
    "topology.kind": (str, "symmetrical"),
    "topology.range": (float, 100.0),
    "topology.rings": (int, 5),
    "topology.per_ring": (int, 6),
    "topology.depth": (int, 9),
    "topology.width": (int, 3),
    "topology.n": (int, 30),
    "topology.area": (float, 450.0),
    "topology.max_hops": (int, 11),
    "topology.seed": (int, None),
    "scenario.kind": (str, "steady_state"),
    "scenario.duration": (float, 1200.0),
    "scenario.seeds": ("ints", (1, 2, 3, 4, 5)),
    "message.ttl": (int, None),
    "battery.capacity_j": (float, 500.0),
    "battery.min_pct": (float, None),
    "battery.max_pct": (float, None),
    "battery.values": ("list", None),
    "battery.sink_pct": (float, None),
    "mobility.speed": (float, 1.0),
    "mobility.update_interval": (float, 1.0),
    "mobility.start_after": (float, None),
    "traffic.min": (float, 15.0),
    "traffic.max": (float, 50.0),
    "eagp.dt_max": (float, 10.0),
    "eagp.t_rec": (float, None),
    "eagp.lambda": (float, 10.0),
    "eagp.fanout": (int, None),
    "gossip.fanout": (int, 3),
    "mcfa.resetup_interval": (float, 0.0),
    "radio.loss_rate": (float, 0.0),
    "energy.idle_state": (str, "awake"),
    "metrics.interval": (float, 10.0),
}
for _f in fields(EnergyModel):
    SCHEMA[f"energy.{_f.name}"] = (float, None)

TOPOLOGY_KINDS = ("symmetrical", "asymmetrical", "random")
SCENARIO_KINDS = ("steady_state", "end_of_life", "mobility")
PRESET_NAMES = tuple(
    f"{s}_{t}" for s in ("steady", "eol", "mobility") for t in ("sym", "asym", "random")
)


def _convert(kind, raw, key, line, path):
    text = raw.strip()
    if text.lower() == "none":
        return None
    try:
        if kind == "ints":
            return tuple(int(x) for x in text.split(",") if x.strip())
        if kind == "list":
            return tuple(float(x) for x in text.split(",") if x.strip())
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        return text
    except ValueError:
        raise ConfigError(f"cannot parse {text!r}", line=line, key=key, path=path) from None


def parse_config(text: str, path=None) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'section.key = value'", line=lineno, path=path)
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError("unknown key", line=lineno, key=key, path=path)
        values[key] = _convert(SCHEMA[key][0], raw, key, lineno, path)
    return values


def resolve(values: dict) -> dict:
    """Fill defaults and check cross-key constraints."""
    cfg = {k: default for k, (_, default) in SCHEMA.items()}
    cfg.update(values)
    if cfg["topology.kind"] not in TOPOLOGY_KINDS:
        raise ConfigError(f"must be one of {TOPOLOGY_KINDS}", key="topology.kind")
    if cfg["scenario.kind"] not in SCENARIO_KINDS:
        raise ConfigError(f"must be one of {SCENARIO_KINDS}", key="scenario.kind")
    if cfg["scenario.duration"] <= 0:
        raise ConfigError("must be positive", key="scenario.duration")
    if not cfg["scenario.seeds"]:
        raise ConfigError("need at least one seed", key="scenario.seeds")
    if cfg["topology.range"] <= 0:
        raise ConfigError("must be positive", key="topology.range")
    if not (0 < cfg["traffic.min"] <= cfg["traffic.max"]):
        raise ConfigError("need 0 < traffic.min <= traffic.max", key="traffic.min")
    if cfg["battery.capacity_j"] <= 0:
        raise ConfigError("must be positive", key="battery.capacity_j")
    if not (0 <= cfg["radio.loss_rate"] < 1):
        raise ConfigError("must be in [0, 1)", key="radio.loss_rate")
    if cfg["energy.idle_state"] not in ("awake", "modem_sleep", "deep_sleep"):
        raise ConfigError("unknown idle state", key="energy.idle_state")
    vals = cfg["battery.values"]
    if vals is not None and any(v <= 0 for v in vals):
        raise ConfigError("battery values must be > 0", key="battery.values")
    for key in ("battery.min_pct", "battery.max_pct", "battery.sink_pct"):
        v = cfg[key]
        if v is not None and not (0 < v <= 100):
            raise ConfigError("must be in (0, 100]", key=key)
    return cfg


def load_config(path) -> dict:
    if not os.path.isfile(path):
        raise ConfigError("no such scenario file", path=path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return resolve(parse_config(text, path=path))


def preset_text(name: str) -> str:
    if name not in PRESET_NAMES:
        raise ConfigError(f"unknown preset {name!r}")
    return resources.files("eagpsim.presets").joinpath(f"{name}.cfg").read_text(encoding="utf-8")


def load_preset(name: str) -> dict:
    return resolve(parse_config(preset_text(name), path=f"<preset {name}>"))


def dump_config(cfg: dict) -> str:
    lines = []
    for key in sorted(cfg):
        v = cfg[key]
        if v is None:
            text = "none"
        elif isinstance(v, tuple):
            text = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
