"""Flat ``key = value`` scenario configuration.

An empty document is the full default scenario.  Keys are grouped by dotted
prefix (``sim.``, ``link.``, ``prophet.``, ``traffic.``, ``groupN.``) plus the
bare ``router`` key.  All numbers are raw SI units: bytes, seconds, metres,
metres per second and bytes per second.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable

from .link import LinkModel
from .routing import ROUTERS
from .routing.prophet import ProphetParams


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass(frozen=True)
class _Key:
    kind: str  # int | float | bool | str | choice
    default: Any
    check: Callable[[Any], str | None] | None = None
    choices: tuple = ()


def _positive(v):
    return None if v > 0 else "must be positive"


def _non_negative(v):
    return None if v >= 0 else "must be non-negative"


def _probability(v):
    return None if 0 <= v <= 1 else "must be within [0, 1]"


def _open_unit(v):
    return None if 0 < v <= 1 else "must be within (0, 1]"


KEYS: dict[str, _Key] = {
    "router": _Key("choice", "epidemic", choices=ROUTERS),
    "sim.duration": _Key("float", 43_200.0, _positive),
    "sim.tick": _Key("float", 0.1, _positive),
    "sim.seed": _Key("int", 1, _non_negative),
    "sim.mapFile": _Key("str", ""),
    "sim.groups": _Key("int", 2, _positive),
    "sim.countAborts": _Key("bool", False),
    "link.range": _Key("float", 3.0, _positive),
    "link.speedBps": _Key("float", 500_000.0, _positive),
    "link.speedAfterBps": _Key("float", 1_000_000.0, _positive),
    "link.speedSwitchTime": _Key("float", 10_000.0, _non_negative),
    "link.latency": _Key("float", 0.2, _non_negative),
    "link.bufferSize": _Key("float", 8 * 1024 * 1024.0, _positive),
    "link.singleTransferPerNode": _Key("bool", False),
    "link.instantaneous": _Key("bool", False),
    "prophet.pInit": _Key("float", 0.75, _probability),
    "prophet.beta": _Key("float", 0.25, _probability),
    "prophet.gamma": _Key("float", 0.98, _open_unit),
    "prophet.secondsInTimeUnit": _Key("float", 30.0, _positive),
    "prophet.v2EncounterScaling": _Key("bool", False),
    "prophet.typicalInterval": _Key("float", 1800.0, _positive),
    "traffic.size": _Key("int", 1024 * 1024, _positive),
    "traffic.intervalMin": _Key("float", 25.0, _positive),
    "traffic.intervalMax": _Key("float", 35.0, _positive),
    "traffic.ttl": _Key("float", math.inf, _positive),
    "traffic.cooldown": _Key("float", 1800.0, _non_negative),
}

GROUP_KEYS: dict[str, _Key] = {
    "name": _Key("str", ""),
    "count": _Key("int", 1, _positive),
    "speed": _Key("float", 1.0, _positive),
    "pauseTime": _Key("float", 0.0, _non_negative),
    "edges": _Key("choice", "both", choices=("land", "water", "both")),
}

GROUP_DEFAULTS = {
    1: {"name": "bicycles", "count": 50, "speed": 1.0, "edges": "land"},
    2: {"name": "motorboats", "count": 70, "speed": 15.0, "edges": "water"},
}

_GROUP_RE = re.compile(r"^group(\d+)\.(\w+)$")
_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _convert(spec: _Key, raw: str, key: str, line: int | None):
    try:
        if spec.kind == "int":
            value = int(raw)
        elif spec.kind == "float":
            value = float(raw)
            if math.isnan(value) or value == -math.inf:
                raise ValueError
        elif spec.kind == "bool":
            low = raw.lower()
            if low not in _TRUE | _FALSE:
                raise ValueError
            value = low in _TRUE
        elif spec.kind == "choice":
            if raw not in spec.choices:
                raise ConfigError(f"expected one of {', '.join(spec.choices)}, got {raw!r}", key, line)
            value = raw
        else:
            value = raw
    except ValueError:
        raise ConfigError(f"expected {spec.kind}, got {raw!r}", key, line) from None
    if spec.check is not None:
        problem = spec.check(value)
        if problem:
            raise ConfigError(f"{problem} (got {raw})", key, line)
    return value


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _group_default(n: int, name: str):
    base = GROUP_DEFAULTS.get(n, {})
    if name == "name":
        return base.get("name", f"group{n}")
    return base.get(name, GROUP_KEYS[name].default)


@dataclass(frozen=True)
class ConfigDocument:
    """A fully resolved, validated set of configuration values."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def to_text(self) -> str:
        return "".join(f"{k} = {_format(v)}\n" for k, v in sorted(self.values.items()))

    def replace(self, overrides: dict) -> ConfigDocument:
        text = self.to_text() + "".join(f"{k} = {_format(v)}\n" for k, v in overrides.items())
        return parse_config(text, allow_override=True)

    def scenario(self) -> ScenarioConfig:
        return ScenarioConfig.from_document(self)


def parse_config(text: str, *, allow_override: bool = False) -> ConfigDocument:
    """Parse and validate configuration text; missing keys take defaults."""
    raw: dict[str, tuple[str, int]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", line=lineno)
        if key in raw and not allow_override:
            raise ConfigError(f"duplicate key (first set on line {raw[key][1]})", key, lineno)
        raw[key] = (value, lineno)

    values: dict[str, Any] = {}
    for key, spec in KEYS.items():
        if key in raw:
            values[key] = _convert(spec, raw[key][0], key, raw[key][1])
        else:
            values[key] = spec.default

    n_groups = values["sim.groups"]
    for key, (value, lineno) in raw.items():
        if key in KEYS:
            continue
        m = _GROUP_RE.match(key)
        if m is None or m.group(2) not in GROUP_KEYS:
            raise ConfigError("unknown key", key, lineno)
        n = int(m.group(1))
        if not 1 <= n <= n_groups:
            raise ConfigError(f"group index out of range (sim.groups = {n_groups})", key, lineno)
        values[key] = _convert(GROUP_KEYS[m.group(2)], value, key, lineno)
    for n in range(1, n_groups + 1):
        for name in GROUP_KEYS:
            values.setdefault(f"group{n}.{name}", _group_default(n, name))

    if values["traffic.intervalMax"] < values["traffic.intervalMin"]:
        line = raw.get("traffic.intervalMax", (None, None))[1]
        raise ConfigError("must be >= traffic.intervalMin", "traffic.intervalMax", line)
    return ConfigDocument(values)


def default_document() -> ConfigDocument:
    return parse_config("")


@dataclass(frozen=True)
class GroupConfig:
    name: str
    count: int
    speed: float
    pause: float = 0.0
    edges: str = "both"


@dataclass(frozen=True)
class TrafficConfig:
    size: int = 1024 * 1024
    interval_min: float = 25.0
    interval_max: float = 35.0
    ttl: float = math.inf
    cooldown: float = 1800.0


@dataclass(frozen=True)
class ScenarioConfig:
    duration: float = 43_200.0
    tick: float = 0.1
    seed: int = 1
    map_file: str = ""
    groups: tuple = ()
    link: LinkModel = LinkModel()
    range: float = 3.0
    buffer_size: float = 8 * 1024 * 1024.0
    single_transfer_per_node: bool = False
    router: str = "epidemic"
    prophet: ProphetParams = ProphetParams()
    traffic: TrafficConfig = TrafficConfig()
    count_aborts: bool = False

    def __post_init__(self):
        if self.duration <= 0 or self.tick <= 0:
            raise ConfigError("duration and tick must be positive")
        if not self.groups:
            raise ConfigError("at least one node group is required")
        if self.router not in ROUTERS:
            raise ConfigError(f"unknown router {self.router!r}")

    @property
    def n_hosts(self) -> int:
        return sum(g.count for g in self.groups)

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.tick))

    @classmethod
    def from_document(cls, doc: ConfigDocument) -> ScenarioConfig:
        v = doc.values
        groups = tuple(
            GroupConfig(
                v[f"group{n}.name"],
                v[f"group{n}.count"],
                v[f"group{n}.speed"],
                v[f"group{n}.pauseTime"],
                v[f"group{n}.edges"],
            )
            for n in range(1, v["sim.groups"] + 1)
        )
        return cls(
            duration=v["sim.duration"],
            tick=v["sim.tick"],
            seed=v["sim.seed"],
            map_file=v["sim.mapFile"],
            groups=groups,
            link=LinkModel(
                v["link.speedBps"],
                v["link.speedAfterBps"],
                v["link.speedSwitchTime"],
                v["link.latency"],
                v["link.instantaneous"],
            ),
            range=v["link.range"],
            buffer_size=v["link.bufferSize"],
            single_transfer_per_node=v["link.singleTransferPerNode"],
            router=v["router"],
            prophet=ProphetParams(
                p_init=v["prophet.pInit"],
                transitivity_scale=v["prophet.beta"],
                aging_base=v["prophet.gamma"],
                seconds_in_time_unit=v["prophet.secondsInTimeUnit"],
                v2_encounter_scaling=v["prophet.v2EncounterScaling"],
                typical_interval=v["prophet.typicalInterval"],
            ),
            traffic=TrafficConfig(
                v["traffic.size"],
                v["traffic.intervalMin"],
                v["traffic.intervalMax"],
                v["traffic.ttl"],
                v["traffic.cooldown"],
            ),
            count_aborts=v["sim.countAborts"],
        )

    def mobility_key(self) -> tuple:
        """Everything that determines node movement and contacts."""
        return (self.duration, self.tick, self.seed, self.map_file, self.groups, self.range)

    def scenario_key(self) -> tuple:
        """Everything except router, message size and seed (aggregation compatibility)."""
        return (
            self.duration,
            self.tick,
            self.map_file,
            self.groups,
            self.link,
            self.range,
            self.buffer_size,
            self.single_transfer_per_node,
            self.prophet,
            self.traffic.interval_min,
            self.traffic.interval_max,
            self.traffic.ttl,
            self.traffic.cooldown,
            self.count_aborts,
        )
