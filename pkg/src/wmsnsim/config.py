"""Parser for ini-style experiment descriptions.

Documents are ``key = value`` lines. ``#`` starts a comment outside of
quotes. Values are integers, reals, quoted strings, ``True``/``False`` or a
sweep list ``${name=v1, v2, ...}``. Keys follow the dotted ``SN.node[k]``
convention; ``[*]`` applies to every node without a more specific entry.
"""

from __future__ import annotations

import itertools
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Iterator

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Malformed configuration document."""

    def __init__(self, message: str, line: int | None = None, source: str = "<config>"):
        self.line = line
        self.source = source
        where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class Sweep:
    name: str
    values: tuple


# Paths relative to ``SN.node[*].`` unless they start with ``SN.`` or are bare.
NODE_KEYS = {
    "xCoor", "yCoor",
    "ApplicationName",
    "Application.packet_rate", "Application.constantDataPayload", "Application.collectTraceInfo",
    "Application.fecMode", "Application.fecRatioI", "Application.fecRatioP", "Application.fecRatioB",
    "Application.simpleFecRatio", "Application.gopPattern", "Application.numFrames",
    "Application.frameRate", "Application.frameSizeI", "Application.frameSizeP",
    "Application.frameSizeB", "Application.frameSizeCv", "Application.mtuPayload",
    "Application.sessionCooldown", "Application.videoTrace",
    "Communication.RoutingProtocolName",
    "Communication.Routing.netBufferSize", "Communication.Routing.netDataFrameOverhead",
    "Communication.Routing.beaconInterval", "Communication.Routing.neighborTimeout",
    "Communication.Routing.beaconPayload", "Communication.Routing.collectTraceInfo",
    "Communication.Routing.minLinkQuality", "Communication.Routing.minBeacons",
    "Communication.Routing.linkQualityWeight",
    "Communication.MAC.backoffMax", "Communication.MAC.retryMax", "Communication.MAC.ccaDuration",
    "Communication.MAC.initialBackoff", "Communication.MAC.collectTraceInfo",
    "Communication.Radio.TxOutputPower", "Communication.Radio.CCAtreshold",
    "Communication.Radio.CCAthreshold", "Communication.Radio.sensitivity",
    "Communication.Radio.noiseFloor", "Communication.Radio.bitrate",
    "Communication.Radio.perMidpoint", "Communication.Radio.perSteepness",
    "Communication.Radio.captureMargin", "Communication.Radio.collectTraceInfo",
    "ResourceManager.collectTraceInfo", "SensorManager.collectTraceInfo",
    "SensorManager.sensingRadius", "SensorManager.sampleInterval", "SensorManager.startupDelay",
    "Camera.fovAngle", "Camera.fovDepth",
}
GLOBAL_KEYS = {
    "sim-time-limit", "seed-set", "network",
    "SN.field_x", "SN.field_y", "SN.numHighTier", "SN.numLowTier", "SN.numNodes",
    "SN.wirelessChannel.PLd0", "SN.wirelessChannel.d0", "SN.wirelessChannel.pathLossExponent",
    "SN.wirelessChannel.sigma", "SN.wirelessChannel.collectTraceInfo",
    "SN.intruder.xCoor", "SN.intruder.yCoor", "SN.intruder.speed", "SN.intruder.stepInterval",
    "SN.intruder.mobilityTrace",
}

_NODE_RE = re.compile(r"^SN\.node\[(\*|\d+)\]\.(.+)$")
_SWEEP_RE = re.compile(r"^\$\{\s*([A-Za-z_][\w.-]*)\s*=(.*)\}$", re.S)
_NUM_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")


def _strip_comment(line: str) -> str:
    in_quote = False
    for i, ch in enumerate(line):
        if ch == '"':
            in_quote = not in_quote
        elif ch == "#" and not in_quote:
            return line[:i]
    return line


def parse_scalar(token: str) -> Any:
    token = token.strip()
    if len(token) >= 2 and token[0] == token[-1] == '"':
        return token[1:-1].strip()
    if token in ("True", "true"):
        return True
    if token in ("False", "false"):
        return False
    if _NUM_RE.match(token):
        if re.match(r"^[+-]?\d+$", token):
            return int(token)
        return float(token)
    if not token:
        raise ValueError("empty value")
    if '"' in token:
        raise ValueError(f"unbalanced quotes in {token!r}")
    return token


def _split_list(body: str) -> list[str]:
    items, buf, in_quote = [], [], False
    for ch in body:
        if ch == '"':
            in_quote = not in_quote
        if ch == "," and not in_quote:
            items.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    if in_quote:
        raise ValueError("unterminated quote in sweep list")
    items.append("".join(buf))
    return items


def parse_value(text: str) -> Any:
    text = text.strip()
    if text.startswith("${") or text.startswith("$ {"):
        m = _SWEEP_RE.match(text.replace("$ {", "${", 1))
        if not m:
            raise ValueError(f"malformed sweep {text!r}")
        name, body = m.group(1), m.group(2)
        items = _split_list(body)
        if any(not item.strip() for item in items):
            raise ValueError(f"empty item in sweep {name!r}")
        return Sweep(name, tuple(parse_scalar(item) for item in items))
    return parse_scalar(text)


def normalize_key(key: str) -> str:
    m = _NODE_RE.match(key)
    if m:
        return f"SN.node[*].{m.group(2)}"
    return key


def is_known_key(key: str) -> bool:
    m = _NODE_RE.match(key)
    if m:
        return m.group(2) in NODE_KEYS
    return key in GLOBAL_KEYS


@dataclass
class RunConfig:
    entries: dict[str, Any] = field(default_factory=dict)
    lines: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    sweep_point: dict[str, Any] = field(default_factory=dict)
    source: str = "<config>"

    @property
    def sim_duration(self) -> float | None:
        value = self.entries.get("sim-time-limit")
        return None if value is None else parse_seconds(value)

    @property
    def master_seed(self) -> int:
        return int(self.entries.get("seed-set", 0))

    def sweeps(self) -> list[tuple[str, Sweep]]:
        return [(k, v) for k, v in self.entries.items() if isinstance(v, Sweep)]

    def get(self, key: str, default: Any = None) -> Any:
        value = self.entries.get(key, default)
        if isinstance(value, Sweep):
            raise ConfigError(f"{key} still holds an unexpanded sweep", self.lines.get(key), self.source)
        return value

    def node_value(self, node: int, path: str, default: Any = None) -> Any:
        """Resolve ``SN.node[node].path`` with exact entries beating ``[*]``."""
        for key in (f"SN.node[{node}].{path}", f"SN.node[*].{path}"):
            if key in self.entries:
                return self.get(key)
        return default

    def with_entries(self, **overrides: Any) -> "RunConfig":
        entries = dict(self.entries)
        entries.update(overrides)
        return RunConfig(entries, dict(self.lines), list(self.warnings), dict(self.sweep_point), self.source)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig(source=source)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            continue  # section header, e.g. [General]
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
        key, _, value = line.partition("=")
        key = key.strip().lstrip("$").strip()
        if not key or " " in key:
            raise ConfigError(f"bad key {key!r}", lineno, source)
        if key in cfg.entries:
            raise ConfigError(f"duplicate key {key!r} (first defined on line {cfg.lines[key]})", lineno, source)
        try:
            cfg.entries[key] = parse_value(value)
        except ValueError as exc:
            raise ConfigError(str(exc), lineno, source) from None
        cfg.lines[key] = lineno
        if not is_known_key(key):
            msg = f"{source}:{lineno}: unknown key {key!r}"
            cfg.warnings.append(msg)
            log.warning(msg)
    return cfg


def expand_sweeps(config: RunConfig) -> list[RunConfig]:
    """Cross product of all sweeps; the first declared sweep varies slowest."""
    sweeps = config.sweeps()
    if not sweeps:
        return [config]
    out = []
    for combo in itertools.product(*(s.values for _, s in sweeps)):
        entries = dict(config.entries)
        point = dict(config.sweep_point)
        for (key, sweep), value in zip(sweeps, combo):
            entries[key] = value
            point[sweep.name] = value
        out.append(RunConfig(entries, dict(config.lines), list(config.warnings), point, config.source))
    return out


def iter_node_keys(config: RunConfig, path: str) -> Iterator[tuple[str, Any]]:
    for key, value in config.entries.items():
        m = _NODE_RE.match(key)
        if m and m.group(2) == path:
            yield m.group(1), value


def parse_dbm(value: Any) -> float:
    """``"-5dBm"`` or a bare number, both read as dBm."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).strip()
    if text.lower().endswith("dbm"):
        text = text[:-3]
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"not a dBm value: {value!r}") from None


def parse_seconds(value: Any) -> float:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).strip()
    for suffix, scale in (("ms", 1e-3), ("s", 1.0)):
        if text.endswith(suffix):
            return float(text[: -len(suffix)]) * scale
    return float(text)


def parse_bool(value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return bool(value)
    return str(value).strip().lower() in ("true", "1", "yes", "on")
