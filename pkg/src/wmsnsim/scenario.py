"""Two-tier intrusion-detection scenario and the video streaming run driver.

Node 0 is the base station, nodes ``1..n_high`` the camera grid and the
rest the scalar (vibration) sensors. Every node runs the full protocol
stack and may relay; only cameras originate video.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelParams, RadioParams
from .config import ConfigError, RunConfig, parse_bool, parse_dbm, parse_seconds
from .engine import RngStream, Simulator
from .metrics import (
    RunReport,
    SessionLog,
    aggregate_metrics,
    emit_debug_trace,
    emit_receiver_trace,
    emit_result_file,
)
from .mobility import MobilityTrace, WalkParams, generate_intruder_walk, parse_bonnmotion
from .network import MacParams, Network, Tracer
from .routing import RoutingParams
from .video import (
    DEFAULT_FPS,
    FecPolicy,
    GopPattern,
    SizeParams,
    VideoFrameRecord,
    packetize,
    parse_encoder_trace,
    synthesize_trace,
)

SINK = 0
TRACE_MODULES = (
    "Application",
    "Communication.Routing",
    "Communication.MAC",
    "Communication.Radio",
    "SensorManager",
    "ResourceManager",
)


@dataclass(frozen=True)
class ScenarioLayout:
    field: tuple[float, float] = (80.0, 80.0)
    base_station: tuple[float, float] = (40.0, 0.0)
    n_high_tier: int = 25
    n_low_tier: int = 75
    sensing_radius: float = 10.0
    fov_angle: float = 60.0
    fov_depth: float = 25.0

    def __post_init__(self):
        side = math.isqrt(self.n_high_tier)
        if side * side != self.n_high_tier:
            raise ValueError("the high tier must form a square grid")
        if self.sensing_radius <= 0 or self.fov_depth <= 0 or not 0 < self.fov_angle <= 360:
            raise ValueError("invalid sensing geometry")


@dataclass(frozen=True)
class Camera:
    node: int
    position: tuple[float, float]
    orientation: float  # degrees, counter-clockwise from +x


@dataclass
class Deployment:
    positions: list[tuple[float, float]]
    roles: list[str]
    cameras: list[Camera]
    scalars: list[int]


def grid_positions(n: int, width: float, height: float) -> list[tuple[float, float]]:
    """Square grid, row-major from the origin, half a spacing in from each border."""
    side = math.isqrt(n)
    sx, sy = width / side, height / side
    return [(sx / 2 + col * sx, sy / 2 + row * sy) for row in range(side) for col in range(side)]


def deploy(layout: ScenarioLayout, rng: RngStream) -> Deployment:
    w, h = layout.field
    cx, cy = w / 2, h / 2
    positions = [tuple(map(float, layout.base_station))]
    roles = ["sink"]
    cameras = []
    for i, (x, y) in enumerate(grid_positions(layout.n_high_tier, w, h), start=1):
        positions.append((x, y))
        roles.append("camera")
        cameras.append(Camera(i, (x, y), math.degrees(math.atan2(cy - y, cx - x))))
    scalars = []
    for _ in range(layout.n_low_tier):
        scalars.append(len(positions))
        positions.append((rng.uniform(0, w), rng.uniform(0, h)))
        roles.append("scalar")
    return Deployment(positions, roles, cameras, scalars)


def detect_intruder(scalar_pos, sensing_radius: float, intruder_pos) -> bool:
    if sensing_radius <= 0:
        raise ValueError("sensing radius must be positive")
    return math.hypot(intruder_pos[0] - scalar_pos[0], intruder_pos[1] - scalar_pos[1]) <= sensing_radius


def fov_covers(camera_pos, orientation_deg: float, angle_deg: float, depth_m: float, point) -> bool:
    """Whether ``point`` lies in the camera's viewing sector (closed boundaries)."""
    dx, dy = point[0] - camera_pos[0], point[1] - camera_pos[1]
    dist = math.hypot(dx, dy)
    if dist > depth_m:
        return False
    if dist == 0.0 or angle_deg >= 360.0:
        return True
    off = (math.degrees(math.atan2(dy, dx)) - orientation_deg + 180.0) % 360.0 - 180.0
    return abs(off) <= angle_deg / 2.0 + 1e-9


def select_camera(cameras: Sequence[Camera], point, angle_deg: float, depth_m: float) -> Camera | None:
    """Nearest camera whose view covers ``point``; lowest id on ties."""
    best, best_d = None, math.inf
    for cam in cameras:
        if not fov_covers(cam.position, cam.orientation, angle_deg, depth_m, point):
            continue
        d = math.hypot(point[0] - cam.position[0], point[1] - cam.position[1])
        if d < best_d or (d == best_d and cam.node < best.node):
            best, best_d = cam, d
    return best


@dataclass(frozen=True)
class VideoParams:
    pattern: GopPattern = GopPattern("IBBPBBPBBPBB")
    n_frames: int = 132
    fps: float = DEFAULT_FPS
    sizes: SizeParams = SizeParams()
    mtu_payload: int = 1024
    cooldown: float = 15.0
    trace_path: str | None = None


@dataclass
class ScenarioParams:
    duration: float
    layout: ScenarioLayout = ScenarioLayout()
    channel: ChannelParams = ChannelParams()
    radios: list[RadioParams] = field(default_factory=list)
    mac: MacParams = MacParams()
    routing: RoutingParams = RoutingParams()
    video: VideoParams = VideoParams()
    policies: dict[int, FecPolicy] = field(default_factory=dict)
    default_policy: FecPolicy = FecPolicy.qoe_aware()
    intruder_start: tuple[float, float] = (0.0, 0.0)
    intruder: WalkParams = WalkParams()
    intruder_trace: str | None = None
    sample_interval: float = 0.5
    sensing_start: float = 3.0
    trace_flags: dict = field(default_factory=dict)
    seed: int = 0
    base_dir: Path = Path(".")

    def policy(self, node: int) -> FecPolicy:
        return self.policies.get(node, self.default_policy)

    @classmethod
    def from_config(cls, config: RunConfig, base_dir: str | Path = ".") -> "ScenarioParams":
        return _params_from_config(config, Path(base_dir))


def _num(config: RunConfig, key: str, default, kind=float):
    value = config.get(key, default)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}", config.lines.get(key), config.source) from None


def _node_num(config: RunConfig, node: int, path: str, default, kind=float):
    value = config.node_value(node, path, default)
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"SN.node[{node}].{path}: expected a number, got {value!r}", None, config.source) from None


def _optional_num(value):
    return None if value is None else float(value)


def _policy_for(config: RunConfig, node: int) -> FecPolicy:
    mode = str(config.node_value(node, "Application.fecMode", "qoe_aware")).lower().replace("-", "_")
    if mode in ("none", "no_fec", "nofec"):
        return FecPolicy.none()
    if mode == "simple":
        return FecPolicy.simple(_node_num(config, node, "Application.simpleFecRatio", 0.5))
    if mode in ("qoe_aware", "qoe"):
        return FecPolicy.qoe_aware(
            _node_num(config, node, "Application.fecRatioI", 0.5),
            _node_num(config, node, "Application.fecRatioP", 0.25),
            _node_num(config, node, "Application.fecRatioB", 0.0),
        )
    raise ConfigError(f"unknown fecMode {mode!r} for node {node}", None, config.source)


def _params_from_config(config: RunConfig, base_dir: Path) -> ScenarioParams:
    if config.sim_duration is None:
        raise ConfigError("sim-time-limit is required", None, config.source)
    layout = ScenarioLayout(
        field=(_num(config, "SN.field_x", 80.0), _num(config, "SN.field_y", 80.0)),
        base_station=(_node_num(config, SINK, "xCoor", 40.0), _node_num(config, SINK, "yCoor", 0.0)),
        n_high_tier=_num(config, "SN.numHighTier", 25, int),
        n_low_tier=_num(config, "SN.numLowTier", 75, int),
        sensing_radius=_node_num(config, -1, "SensorManager.sensingRadius", 10.0),
        fov_angle=_node_num(config, -1, "Camera.fovAngle", 60.0),
        fov_depth=_node_num(config, -1, "Camera.fovDepth", 25.0),
    )
    n_nodes = 1 + layout.n_high_tier + layout.n_low_tier
    for node in range(-1, n_nodes):
        proto = config.node_value(node, "Communication.RoutingProtocolName", "GPSR")
        if str(proto).upper() != "GPSR":
            raise ConfigError(f"unsupported routing protocol {proto!r} (only GPSR greedy mode)", None, config.source)

    channel = ChannelParams(
        pl_d0=_num(config, "SN.wirelessChannel.PLd0", 55.0),
        path_exponent=_num(config, "SN.wirelessChannel.pathLossExponent", 2.4),
        sigma=_num(config, "SN.wirelessChannel.sigma", 4.0),
        d0=_num(config, "SN.wirelessChannel.d0", 1.0),
    )
    radios = []
    for node in range(n_nodes):
        def rv(path, default):
            return config.node_value(node, "Communication.Radio." + path, default)

        cca = rv("CCAtreshold", None)
        if cca is None:
            cca = rv("CCAthreshold", -95.0)
        radios.append(RadioParams(
            tx_power=parse_dbm(rv("TxOutputPower", -15.0)),
            cca_threshold=parse_dbm(cca),
            sensitivity=parse_dbm(rv("sensitivity", -95.0)),
            bitrate=float(rv("bitrate", 250_000.0)),
            noise_floor=parse_dbm(rv("noiseFloor", -100.0)),
            per_midpoint=float(rv("perMidpoint", 6.0)),
            per_steepness=float(rv("perSteepness", 1.5)),
            capture_margin=float(rv("captureMargin", 6.0)),
        ))

    mac = MacParams(
        backoff_max=parse_seconds(config.node_value(-1, "Communication.MAC.backoffMax", 0.01)),
        retry_max=_node_num(config, -1, "Communication.MAC.retryMax", 7, int),
        cca_duration=parse_seconds(config.node_value(-1, "Communication.MAC.ccaDuration", 128e-6)),
        initial_backoff=parse_bool(config.node_value(-1, "Communication.MAC.initialBackoff", True)),
    )
    routing = RoutingParams(
        net_buffer_size=_node_num(config, -1, "Communication.Routing.netBufferSize", 64, int),
        net_frame_overhead=_node_num(config, -1, "Communication.Routing.netDataFrameOverhead", 6, int),
        beacon_interval=parse_seconds(config.node_value(-1, "Communication.Routing.beaconInterval", 1.0)),
        neighbor_timeout=parse_seconds(config.node_value(-1, "Communication.Routing.neighborTimeout", 3.0)),
        beacon_payload=_node_num(config, -1, "Communication.Routing.beaconPayload", 8, int),
        min_link_quality=_optional_num(config.node_value(-1, "Communication.Routing.minLinkQuality", None)),
        min_beacons=_node_num(config, -1, "Communication.Routing.minBeacons", 3, int),
        lq_weight=_node_num(config, -1, "Communication.Routing.linkQualityWeight", 0.1),
    )
    a = "Application."
    video = VideoParams(
        pattern=GopPattern(str(config.node_value(-1, a + "gopPattern", "IBBPBBPBBPBB"))),
        n_frames=_node_num(config, -1, a + "numFrames", 132, int),
        fps=_node_num(config, -1, a + "frameRate", DEFAULT_FPS),
        sizes=SizeParams(
            _node_num(config, -1, a + "frameSizeI", 2000.0),
            _node_num(config, -1, a + "frameSizeP", 400.0),
            _node_num(config, -1, a + "frameSizeB", 150.0),
            _node_num(config, -1, a + "frameSizeCv", 0.1),
        ),
        mtu_payload=_node_num(config, -1, a + "mtuPayload", 1024, int),
        cooldown=parse_seconds(config.node_value(-1, a + "sessionCooldown", 15.0)),
        trace_path=config.node_value(-1, a + "videoTrace", None),
    )
    flags: dict = {}
    for node in range(n_nodes):
        mods = frozenset(m for m in TRACE_MODULES
                         if parse_bool(config.node_value(node, m + ".collectTraceInfo", False)))
        if mods:
            flags[node] = mods
    if parse_bool(config.get("SN.wirelessChannel.collectTraceInfo", False)):
        flags[None] = frozenset({"wirelessChannel"})

    params = ScenarioParams(
        duration=config.sim_duration,
        layout=layout,
        channel=channel,
        radios=radios,
        mac=mac,
        routing=routing,
        video=video,
        policies={n: _policy_for(config, n) for n in range(1, 1 + layout.n_high_tier)},
        default_policy=_policy_for(config, -1),
        intruder_start=(_num(config, "SN.intruder.xCoor", 0.0), _num(config, "SN.intruder.yCoor", 0.0)),
        intruder=WalkParams(
            speed=_num(config, "SN.intruder.speed", 1.5),
            interval=_num(config, "SN.intruder.stepInterval", 1.0),
            duration=config.sim_duration,
        ),
        intruder_trace=config.get("SN.intruder.mobilityTrace"),
        sample_interval=_node_num(config, -1, "SensorManager.sampleInterval", 0.5),
        sensing_start=parse_seconds(config.node_value(-1, "SensorManager.startupDelay", 3.0)),
        trace_flags=flags,
        seed=config.master_seed,
        base_dir=base_dir,
    )
    return params


@dataclass
class RunResult:
    report: RunReport
    debug_records: list
    receiver_traces: dict[int, str]
    detections: list[tuple[float, tuple[float, float]]] = field(default_factory=list)

    @property
    def result_text(self) -> str:
        return emit_result_file(self.report.sessions)

    @property
    def debug_text(self) -> str:
        return emit_debug_trace(self.debug_records)


class VideoRun:
    """Protocol stack plus video sessions over a fixed node placement."""

    def __init__(
        self,
        positions: Sequence[tuple[float, float]],
        radios: Sequence[RadioParams],
        channel: ChannelParams,
        mac: MacParams,
        routing: RoutingParams,
        video: VideoParams,
        frames: Sequence[VideoFrameRecord],
        policy: Callable[[int], FecPolicy],
        seed: int,
        trace_flags: dict | None = None,
    ):
        self.sim = Simulator()
        self.seed = seed
        self.video = video
        self.frames = list(frames)
        self.policy = policy
        self.tracer = Tracer(trace_flags)
        self.net = Network(
            self.sim, positions, radios, channel, mac, routing, SINK,
            RngStream(seed, "channel"), RngStream(seed, "mac"), self.tracer, self._delivered,
        )
        self.logs: list[SessionLog] = []
        self.pending_releases = 0
        self.session_end = -math.inf
        self._next_packet_id = 0
        self._seq: dict[int, int] = {}

    def _delivered(self, packet) -> None:
        self.tracer.log(self.sim.now, SINK, "Application",
                        f"Received packet #{packet.seq} from Node {packet.source}")

    def start_session(self, node: int) -> SessionLog:
        now = self.sim.now
        log = SessionLog(len(self.logs), node, now, self.frames, [[] for _ in self.frames])
        self.logs.append(log)
        self.tracer.log(now, node, "Application", f"Node {node} is sending packets")
        policy = self.policy(node)
        for i, frame in enumerate(self.frames):
            self.pending_releases += 1
            self.sim.schedule(now + frame.release_time, self._release, log, i, policy, target=node, kind="frame")
        last = now + (self.frames[-1].release_time if self.frames else 0.0)
        self.session_end = max(self.session_end, last)
        return log

    def _release(self, log: SessionLog, index: int, policy: FecPolicy) -> None:
        self.pending_releases -= 1
        frame = self.frames[index]
        packets = packetize(frame, self.video.mtu_payload, policy, self._next_packet_id)
        self._next_packet_id += len(packets)
        seq = self._seq.get(log.node, 0)
        for p in packets:
            p.seq = seq
            p.video_id = log.video_id
            seq += 1
        self._seq[log.node] = seq
        log.packets[index] = packets
        for p in packets:
            self.net.originate(log.node, p)

    def drain(self, limit: float) -> None:
        """Keep the stack running until every video packet has a fate."""
        sim, net = self.sim, self.net
        while (net.in_flight > 0 or self.pending_releases > 0) and sim.peek_time() <= limit:
            sim.step()

    def report(self, **extra) -> RunReport:
        return aggregate_metrics(
            self.logs, dict(self.net.fates), self.net.offered, self.video.pattern,
            max_buffer_occupancy=self.net.max_occupancy, seed=self.seed, **extra,
        )

    def receiver_traces(self, report: RunReport) -> dict[int, str]:
        return {s.video_id: emit_receiver_trace(s.frame_status, s.time) for s in report.sessions}


def load_frames(video: VideoParams, rng: RngStream, base_dir: Path = Path(".")) -> list[VideoFrameRecord]:
    if video.trace_path:
        path = Path(video.trace_path)
        if not path.is_absolute():
            path = base_dir / path
        return parse_encoder_trace(path.read_text())
    return synthesize_trace(video.pattern, video.n_frames, video.sizes, rng, video.fps)


class IntrusionScenario(VideoRun):
    """Scalar sensors watch for the intruder and wake the best-placed camera."""

    def __init__(self, params: ScenarioParams, seed: int | None = None):
        seed = params.seed if seed is None else seed
        self.params = params
        self.deployment = deploy(params.layout, RngStream(seed, "deploy"))
        radios = params.radios or [RadioParams()] * len(self.deployment.positions)
        if len(radios) != len(self.deployment.positions):
            raise ValueError("radio parameter list does not match the node count")
        frames = load_frames(params.video, RngStream(seed, "video"), params.base_dir)
        super().__init__(
            self.deployment.positions, radios, params.channel, params.mac, params.routing,
            params.video, frames, params.policy, seed, params.trace_flags,
        )
        self.intruder = self._intruder_trace(RngStream(seed, "mobility"))
        self._scalar_xy = np.array([self.deployment.positions[i] for i in self.deployment.scalars]).reshape(-1, 2)
        self.cooldown_until = -math.inf
        self.detections: list[tuple[float, tuple[float, float]]] = []
        self.uncovered = 0

    def _intruder_trace(self, rng: RngStream) -> MobilityTrace:
        p = self.params
        if p.intruder_trace:
            path = Path(p.intruder_trace)
            if not path.is_absolute():
                path = p.base_dir / path
            return parse_bonnmotion(path.read_text(), p.layout.field)
        return generate_intruder_walk(p.intruder, p.intruder_start, p.layout.field, rng)

    def _sense(self) -> None:
        p = self.params
        self._check()
        nxt = self.sim.now + p.sample_interval
        if nxt <= p.duration:
            self.sim.schedule(nxt, self._sense, kind="detection")

    def _check(self) -> None:
        now = self.sim.now
        p = self.params
        pos = self.intruder.position_at(0, now)
        if len(self._scalar_xy):
            d = np.hypot(self._scalar_xy[:, 0] - pos[0], self._scalar_xy[:, 1] - pos[1])
            hits = np.nonzero(d <= p.layout.sensing_radius)[0]
        else:
            hits = ()
        if not len(hits):
            return
        self.detections.append((now, pos))
        first = self.deployment.scalars[int(hits[0])]
        self.tracer.log(now, first, "SensorManager", f"Intruder detected at ({pos[0]:.2f}, {pos[1]:.2f})")
        if now >= self.cooldown_until and now > self.session_end:
            if self.wake_and_stream(pos) is not None and self.cooldown_until <= p.duration:
                # look again the moment the cooldown lapses
                self.sim.schedule(self.cooldown_until, self._check, kind="detection")

    def wake_and_stream(self, intruder_pos) -> SessionLog | None:
        lay = self.params.layout
        cam = select_camera(self.deployment.cameras, intruder_pos, lay.fov_angle, lay.fov_depth)
        if cam is None:
            self.uncovered += 1
            return None
        log = self.start_session(cam.node)
        self.cooldown_until = self.session_end + self.params.video.cooldown
        return log

    def run(self) -> RunResult:
        p = self.params
        self.net.start_beacons()
        # sensing starts once beacons have filled the neighbor tables; the
        # random phase keeps detection times off the sampling grid
        phase = RngStream(self.seed, "sensing").uniform01() * p.sample_interval
        self.sim.schedule(p.sensing_start + phase, self._sense, kind="detection")
        self.sim.run_until(p.duration)
        self.drain(p.duration + 600.0)
        report = self.report(detections=len(self.detections), uncovered_detections=self.uncovered)
        return RunResult(report, list(self.tracer.records), self.receiver_traces(report), list(self.detections))


def simulate(config: RunConfig, seed: int | None = None, base_dir: str | Path = ".") -> RunResult:
    params = ScenarioParams.from_config(config, base_dir)
    return IntrusionScenario(params, seed).run()


def simulate_line(
    n_hops: int,
    spacing: float,
    policy: FecPolicy,
    seed: int,
    video: VideoParams = VideoParams(),
    channel: ChannelParams = ChannelParams(),
    radio: RadioParams = RadioParams(),
    mac: MacParams = MacParams(),
    routing: RoutingParams = RoutingParams(),
    warmup: float = 3.0,
) -> RunReport:
    """Stream one video over a straight chain of ``n_hops`` links to the sink."""
    positions = [(i * spacing, 0.0) for i in range(n_hops + 1)]
    frames = synthesize_trace(video.pattern, video.n_frames, video.sizes, RngStream(seed, "video"), video.fps)
    run = VideoRun(positions, [radio] * len(positions), channel, mac, routing, video, frames,
                   lambda node: policy, seed)
    run.net.start_beacons()
    run.sim.schedule(warmup, run.start_session, n_hops, kind="session")
    run.sim.run_until(warmup)
    run.drain(warmup + 600.0)
    return run.report()
