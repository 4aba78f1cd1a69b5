"""BonnMotion-style mobility traces: parsing, writing, interpolation and generators.

A trace document has one line per node, each a run of ``t x y`` triples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import RngStream


class MobilityParseError(ValueError):
    def __init__(self, message: str, line: int, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}" + (f", column {column}" if column is not None else "")
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Waypoint:
    time: float
    x: float
    y: float


class MobilityTrace:
    """Per-node waypoint lists inside a rectangular field.

    Positions between waypoints are linearly interpolated; outside the
    covered time range a node sits at its first or last waypoint.
    """

    def __init__(self, nodes: list[np.ndarray], bounds: tuple[float, float]):
        self.bounds = (float(bounds[0]), float(bounds[1]))
        self._nodes = []
        for i, arr in enumerate(nodes):
            arr = np.asarray(arr, dtype=float).reshape(-1, 3)
            if len(arr) == 0:
                raise ValueError(f"node {i} has no waypoints")
            if np.any(np.diff(arr[:, 0]) <= 0):
                raise ValueError(f"node {i}: waypoint times must be strictly increasing")
            self._nodes.append(arr)

    def __len__(self) -> int:
        return len(self._nodes)

    def waypoints(self, node: int) -> list[Waypoint]:
        return [Waypoint(*row) for row in self._array(node)]

    def array(self, node: int) -> np.ndarray:
        return self._array(node).copy()

    def _array(self, node: int) -> np.ndarray:
        if not 0 <= node < len(self._nodes):
            raise KeyError(f"unknown node {node}")
        return self._nodes[node]

    def position_at(self, node: int, t: float) -> tuple[float, float]:
        arr = self._array(node)
        times = arr[:, 0]
        if t <= times[0]:
            return float(arr[0, 1]), float(arr[0, 2])
        if t >= times[-1]:
            return float(arr[-1, 1]), float(arr[-1, 2])
        i = int(np.searchsorted(times, t, side="right"))
        t0, x0, y0 = arr[i - 1]
        t1, x1, y1 = arr[i]
        w = (t - t0) / (t1 - t0)
        return float(x0 + w * (x1 - x0)), float(y0 + w * (y1 - y0))

    def to_text(self) -> str:
        return serialize_bonnmotion(self)


def _fmt(v: float) -> str:
    s = "%.6g" % v
    return "0" if s == "-0" else s


def serialize_bonnmotion(trace: MobilityTrace) -> str:
    lines = []
    for i in range(len(trace)):
        lines.append(" ".join(_fmt(v) for v in trace._array(i).ravel()))
    return "\n".join(lines) + "\n"


def parse_bonnmotion(text: str, bounds: tuple[float, float]) -> MobilityTrace:
    nodes = []
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        if not tokens:
            raise MobilityParseError("node has no waypoints", lineno)
        if len(tokens) % 3:
            raise MobilityParseError(f"{len(tokens)} values is not a whole number of 't x y' triples", lineno)
        values = []
        col = 1
        for tok in tokens:
            try:
                values.append(float(tok))
            except ValueError:
                raise MobilityParseError(f"non-numeric token {tok!r}", lineno, col) from None
            col += 1
        arr = np.array(values).reshape(-1, 3)
        bad = np.nonzero(np.diff(arr[:, 0]) <= 0)[0]
        if len(bad):
            raise MobilityParseError("waypoint times must be strictly increasing", lineno, 3 * (int(bad[0]) + 1) + 1)
        nodes.append(arr)
    return MobilityTrace(nodes, bounds)


@dataclass(frozen=True)
class RwpParams:
    v_min: float
    v_max: float
    pause: float = 0.0
    duration: float = 100.0

    def __post_init__(self):
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if self.pause < 0 or self.duration < 0:
            raise ValueError("pause and duration must be non-negative")


@dataclass(frozen=True)
class GmParams:
    alpha: float
    mean_speed: float
    speed_sigma: float = 0.0
    direction_sigma: float = 0.0
    interval: float = 1.0
    duration: float = 100.0

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.interval <= 0 or self.duration < 0:
            raise ValueError("interval must be positive and duration non-negative")
        if self.mean_speed < 0 or self.speed_sigma < 0 or self.direction_sigma < 0:
            raise ValueError("speeds and sigmas must be non-negative")


@dataclass(frozen=True)
class WalkParams:
    speed: float = 1.5
    interval: float = 1.0
    duration: float = 100.0

    def __post_init__(self):
        if self.speed < 0 or self.interval <= 0 or self.duration < 0:
            raise ValueError("invalid walk parameters")


def reflect(value: float, upper: float) -> float:
    """Fold a coordinate back into ``[0, upper]`` by mirror reflection."""
    if upper <= 0:
        return 0.0
    period = 2.0 * upper
    v = math.fmod(value, period)
    if v < 0:
        v += period
    return period - v if v > upper else v


def _rwp_node(params: RwpParams, bounds, rng: RngStream) -> np.ndarray:
    w, h = bounds
    x, y = rng.uniform(0, w), rng.uniform(0, h)
    t = 0.0
    rows = [(t, x, y)]
    while t < params.duration:
        dx, dy = rng.uniform(0, w), rng.uniform(0, h)
        speed = rng.uniform(params.v_min, params.v_max)
        dist = math.hypot(dx - x, dy - y)
        if dist == 0.0:
            continue
        arrive = t + dist / speed
        if arrive > params.duration:
            frac = (params.duration - t) / (arrive - t)
            x, y = x + frac * (dx - x), y + frac * (dy - y)
            t = params.duration
            if t > rows[-1][0]:
                rows.append((t, x, y))
            break
        t, x, y = arrive, dx, dy
        rows.append((t, x, y))
        if params.pause > 0 and t < params.duration:
            resume = min(t + params.pause, params.duration)
            # a pause below the clock resolution leaves no separate waypoint
            if resume > t:
                t = resume
                rows.append((t, x, y))
    return np.array(rows)


def generate_random_waypoint(params: RwpParams, bounds, rng: RngStream, n_nodes: int = 1) -> MobilityTrace:
    return MobilityTrace([_rwp_node(params, bounds, rng) for _ in range(n_nodes)], bounds)


def _gm_node(params: GmParams, bounds, rng: RngStream) -> np.ndarray:
    w, h = bounds
    a = params.alpha
    noise = math.sqrt(1.0 - a * a)
    x, y = rng.uniform(0, w), rng.uniform(0, h)
    speed = params.mean_speed
    direction = mean_dir = rng.uniform(0, 2 * math.pi)
    rows = [(0.0, x, y)]
    steps = int(math.floor(params.duration / params.interval + 1e-9))
    for n in range(1, steps + 1):
        x += speed * math.cos(direction) * params.interval
        y += speed * math.sin(direction) * params.interval
        flip_x = not 0.0 <= x <= w
        flip_y = not 0.0 <= y <= h
        x, y = reflect(x, w), reflect(y, h)
        if flip_x:
            direction, mean_dir = math.pi - direction, math.pi - mean_dir
        if flip_y:
            direction, mean_dir = -direction, -mean_dir
        rows.append((n * params.interval, x, y))
        speed = a * speed + (1 - a) * params.mean_speed + noise * rng.gaussian(0.0, params.speed_sigma)
        speed = max(speed, 0.0)
        direction = a * direction + (1 - a) * mean_dir + noise * rng.gaussian(0.0, params.direction_sigma)
    return np.array(rows)


def generate_gauss_markov(params: GmParams, bounds, rng: RngStream, n_nodes: int = 1) -> MobilityTrace:
    return MobilityTrace([_gm_node(params, bounds, rng) for _ in range(n_nodes)], bounds)


def generate_intruder_walk(params: WalkParams, start, bounds, rng: RngStream) -> MobilityTrace:
    """Fixed-speed walk with a fresh uniform heading every ``params.interval``."""
    w, h = bounds
    x, y = float(start[0]), float(start[1])
    if not (0 <= x <= w and 0 <= y <= h):
        raise ValueError(f"start {start} lies outside the {w}x{h} field")
    rows = [(0.0, x, y)]
    steps = int(math.floor(params.duration / params.interval + 1e-9))
    step = params.speed * params.interval
    for n in range(1, steps + 1):
        theta = rng.uniform(0.0, 2 * math.pi)
        x = reflect(x + step * math.cos(theta), w)
        y = reflect(y + step * math.sin(theta), h)
        rows.append((n * params.interval, x, y))
    return MobilityTrace([np.array(rows)], bounds)
