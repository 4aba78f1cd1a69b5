"""Video traces, packetization with block-erasure FEC, and GoP decodability."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .engine import RngStream

FRAME_TYPES = ("I", "P", "B")
DEFAULT_FPS = 26.0


class TraceParseError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


@dataclass(frozen=True)
class VideoFrameRecord:
    frame_id: int
    frame_type: str
    size: int
    release_time: float  # seconds from start of the video


@dataclass(frozen=True)
class GopPattern:
    pattern: str

    def __post_init__(self):
        p = self.pattern
        if not p or p[0] != "I" or p.count("I") != 1 or set(p) - set(FRAME_TYPES):
            raise ValueError(f"GoP pattern must be one leading I followed by P/B frames, got {p!r}")

    @property
    def gop_length(self) -> int:
        return len(self.pattern)

    def __len__(self) -> int:
        return len(self.pattern)

    def references(self) -> list[tuple[int, ...]]:
        """Positions each frame of the GoP references."""
        p = self.pattern
        refs: list[tuple[int, ...]] = []
        for i, kind in enumerate(p):
            if kind == "I":
                refs.append(())
                continue
            before = next((j for j in range(i - 1, -1, -1) if p[j] != "B"), None)
            if kind == "P":
                refs.append((before,))
            else:
                after = next((j for j in range(i + 1, len(p)) if p[j] != "B"), None)
                refs.append(tuple(j for j in (before, after) if j is not None))
        return refs


@dataclass(frozen=True)
class SizeParams:
    mean_i: float = 2000.0
    mean_p: float = 400.0
    mean_b: float = 150.0
    cv: float = 0.1

    def __post_init__(self):
        if not self.mean_i > self.mean_p > self.mean_b > 0:
            raise ValueError("frame size means must satisfy I > P > B > 0")
        if self.cv < 0:
            raise ValueError("cv must be non-negative")

    def mean(self, frame_type: str) -> float:
        return {"I": self.mean_i, "P": self.mean_p, "B": self.mean_b}[frame_type]


def _fmt_ms(seconds: float) -> str:
    return f"{seconds * 1000.0:.3f}"


def serialize_encoder_trace(frames: Sequence[VideoFrameRecord]) -> str:
    return "".join(f"{f.frame_id} {f.frame_type} {f.size} {_fmt_ms(f.release_time)}\n" for f in frames)


def parse_encoder_trace(text: str) -> list[VideoFrameRecord]:
    frames: list[VideoFrameRecord] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != 4:
            raise TraceParseError(f"expected 'frame_id type size_bytes time_ms', got {line!r}", lineno)
        fid, kind, size, ms = tokens
        if kind not in FRAME_TYPES:
            raise TraceParseError(f"unknown frame type {kind!r}", lineno)
        try:
            fid_i, size_i, t = int(fid), int(size), float(ms) / 1000.0
        except ValueError:
            raise TraceParseError(f"non-numeric field in {line!r}", lineno) from None
        if frames and fid_i <= frames[-1].frame_id:
            raise TraceParseError(f"frame id {fid_i} does not increase", lineno)
        if not frames and kind != "I":
            raise TraceParseError("first frame must be an I frame", lineno)
        if size_i <= 0:
            raise TraceParseError("frame size must be positive", lineno)
        frames.append(VideoFrameRecord(fid_i, kind, size_i, t))
    return frames


def synthesize_trace(
    pattern: GopPattern,
    n_frames: int,
    size_params: SizeParams,
    rng: RngStream,
    fps: float = DEFAULT_FPS,
) -> list[VideoFrameRecord]:
    """Stand-in encoder trace: types cycle through the GoP, sizes are noisy per-type means."""
    if n_frames < 1:
        raise ValueError("n_frames must be at least 1")
    frames = []
    for i in range(n_frames):
        kind = pattern.pattern[i % len(pattern)]
        mean = size_params.mean(kind)
        size = max(1, int(round(rng.gaussian(mean, size_params.cv * mean))))
        frames.append(VideoFrameRecord(i, kind, size, i / fps))
    return frames


@dataclass(frozen=True)
class FecPolicy:
    mode: str
    ratios: dict = field(default_factory=dict)

    def __post_init__(self):
        r = {t: float(self.ratios.get(t, 0.0)) for t in FRAME_TYPES}
        object.__setattr__(self, "ratios", r)
        if any(not 0.0 <= v <= 1.0 for v in r.values()):
            raise ValueError("redundancy ratios must lie in [0, 1]")
        if self.mode == "none":
            if any(r.values()):
                raise ValueError("mode 'none' requires all ratios to be 0")
        elif self.mode == "simple":
            if not r["I"] == r["P"] == r["B"]:
                raise ValueError("mode 'simple' uses one ratio for every frame type")
        elif self.mode == "qoe_aware":
            if not r["I"] >= r["P"] >= r["B"]:
                raise ValueError("mode 'qoe_aware' needs ratio I >= P >= B")
        else:
            raise ValueError(f"unknown FEC mode {self.mode!r}")

    @classmethod
    def none(cls) -> "FecPolicy":
        return cls("none", {})

    @classmethod
    def simple(cls, ratio: float = 0.5) -> "FecPolicy":
        return cls("simple", {t: ratio for t in FRAME_TYPES})

    @classmethod
    def qoe_aware(cls, i: float = 0.5, p: float = 0.25, b: float = 0.0) -> "FecPolicy":
        return cls("qoe_aware", {"I": i, "P": p, "B": b})

    def redundancy_count(self, frame_type: str, k: int) -> int:
        return math.ceil(self.ratios[frame_type] * k - 1e-12)


class PacketRecord:
    """One network packet carrying video data or FEC redundancy."""

    __slots__ = (
        "packet_id", "frame_id", "index", "kind", "payload",
        "send_time", "recv_time", "source", "seq", "video_id",
        "hops", "path", "fate",
    )

    def __init__(self, packet_id, frame_id, index, kind, payload):
        self.packet_id = packet_id
        self.frame_id = frame_id
        self.index = index
        self.kind = kind
        self.payload = payload
        self.send_time = None
        self.recv_time = None
        self.source = None
        self.seq = None
        self.video_id = None
        self.hops = 0
        self.path = []
        self.fate = None

    @property
    def received(self) -> bool:
        return self.recv_time is not None

    def __repr__(self) -> str:
        return (f"PacketRecord(id={self.packet_id}, frame={self.frame_id}, idx={self.index}, "
                f"{self.kind}, {self.payload}B)")


def packetize(frame: VideoFrameRecord, mtu_payload: int, policy: FecPolicy, first_id: int = 0) -> list[PacketRecord]:
    if mtu_payload <= 0:
        raise ValueError("mtu_payload must be positive")
    k = math.ceil(frame.size / mtu_payload)
    r = policy.redundancy_count(frame.frame_type, k)
    packets = []
    remaining = frame.size
    for i in range(k):
        packets.append(PacketRecord(first_id + i, frame.frame_id, i, "data", min(mtu_payload, remaining)))
        remaining -= mtu_payload
    # MDS parity symbols are as long as the longest data symbol
    parity = min(mtu_payload, frame.size)
    for j in range(r):
        packets.append(PacketRecord(first_id + k + j, frame.frame_id, k + j, "redundancy", parity))
    return packets


def fec_recoverable(k: int, r: int, received: int) -> bool:
    if not 0 <= received <= k + r:
        raise ValueError(f"received={received} outside [0, {k + r}]")
    return received >= k


def frame_received(frame: VideoFrameRecord, packets: Sequence[PacketRecord]) -> bool:
    k = sum(1 for p in packets if p.kind == "data")
    r = len(packets) - k
    got = sum(1 for p in packets if p.received)
    return fec_recoverable(k, r, got)


def frame_arrival_time(packets: Sequence[PacketRecord]) -> float | None:
    """Time by which the earliest decodable subset had arrived, or None."""
    k = sum(1 for p in packets if p.kind == "data")
    times = sorted(p.recv_time for p in packets if p.recv_time is not None)
    if len(times) < k or k == 0:
        return None
    return times[k - 1]


def decodable_set(flags: Sequence[bool], pattern: GopPattern) -> set[int]:
    """Indices of frames that arrived and whose references are all decodable."""
    n = len(pattern)
    if len(flags) % n:
        raise ValueError(f"{len(flags)} flags do not cover whole GoPs of length {n}")
    refs = pattern.references()
    # reference frames first, then B frames that lean on them
    order = [i for i, c in enumerate(pattern.pattern) if c != "B"] + \
            [i for i, c in enumerate(pattern.pattern) if c == "B"]
    out: set[int] = set()
    for base in range(0, len(flags), n):
        ok = [False] * n
        for i in order:
            ok[i] = bool(flags[base + i]) and all(ok[j] for j in refs[i])
        out.update(base + i for i in range(n) if ok[i])
    return out


def decodable_frame_rate(flags: Sequence[bool], pattern: GopPattern) -> float:
    if not flags:
        raise ValueError("need at least one frame")
    return len(decodable_set(flags, pattern)) / len(flags)
