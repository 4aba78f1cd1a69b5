"""Run metrics and the result, debug and receiver-trace file formats."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from statistics import mean
from typing import Iterable, Sequence

from .video import GopPattern, VideoFrameRecord, decodable_set, frame_arrival_time, frame_received

FATES = ("delivered", "channel", "collision", "buffer", "mac", "greedy")


RESULT_HEADER = "Transmitted Videos"
RESULT_COLUMNS = ("Time", "Video-id", "Node", "Hops")


@dataclass
class SessionReport:
    time: float
    video_id: int
    node: int
    hops: int = 0
    n_frames: int = 0
    frames_received: int = 0
    frames_decodable: int = 0
    packets_offered: int = 0
    packets_delivered: int = 0
    redundancy_packets: int = 0
    redundancy_bytes: int = 0
    delays: list[float] = field(default_factory=list)
    frame_status: list[tuple[VideoFrameRecord, bool, float | None]] = field(default_factory=list, repr=False)

    @property
    def dfr(self) -> float:
        return self.frames_decodable / self.n_frames if self.n_frames else 0.0


@dataclass
class RunReport:
    sessions: list[SessionReport]
    fates: dict[str, int]
    offered: int
    detections: int = 0
    uncovered_detections: int = 0
    max_buffer_occupancy: int = 0
    seed: int = 0
    sweep_point: dict = field(default_factory=dict)

    @property
    def delivered(self) -> int:
        return self.fates.get("delivered", 0)

    @property
    def pdr(self) -> float:
        return self.delivered / self.offered if self.offered else 0.0

    @property
    def total_frames(self) -> int:
        return sum(s.n_frames for s in self.sessions)

    @property
    def dfr(self) -> float:
        total = self.total_frames
        return sum(s.frames_decodable for s in self.sessions) / total if total else 0.0

    @property
    def mean_delay(self) -> float:
        delays = [d for s in self.sessions for d in s.delays]
        return mean(delays) if delays else 0.0

    @property
    def jitter(self) -> float:
        diffs = [abs(b - a) for s in self.sessions for a, b in zip(s.delays, s.delays[1:])]
        return mean(diffs) if diffs else 0.0

    @property
    def modal_hops(self) -> int:
        return modal([s.hops for s in self.sessions if s.hops > 0])

    @property
    def redundancy_bytes(self) -> int:
        return sum(s.redundancy_bytes for s in self.sessions)

    def conserved(self) -> bool:
        return sum(self.fates.values()) == self.offered


def modal(values: Iterable[int]) -> int:
    """Most common value, smallest on ties, 0 for no values."""
    counts = Counter(values)
    if not counts:
        return 0
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def gop_decodable(flags: Sequence[bool], pattern: GopPattern) -> set[int]:
    """Decodable frames, tolerating a truncated final GoP."""
    n = len(pattern)
    pad = (-len(flags)) % n
    out = decodable_set(list(flags) + [False] * pad, pattern)
    return {i for i in out if i < len(flags)}


def session_metrics(
    report: SessionReport,
    frames: Sequence[VideoFrameRecord],
    received: Sequence[bool],
    arrivals: Sequence[float | None],
    pattern: GopPattern,
    hop_counts: Sequence[int],
) -> SessionReport:
    report.n_frames = len(frames)
    report.frames_received = sum(received)
    report.frames_decodable = len(gop_decodable(received, pattern))
    report.hops = modal(hop_counts)
    report.delays = [arr - (report.time + f.release_time)
                     for f, ok, arr in zip(frames, received, arrivals) if ok and arr is not None]
    report.frame_status = list(zip(frames, received, arrivals))
    return report


def _g(v: float) -> str:
    return "%.6g" % v


def emit_result_file(sessions: Sequence[SessionReport]) -> str:
    lines = [RESULT_HEADER, "\t".join(RESULT_COLUMNS)]
    for s in sessions:
        lines.append(f"{_g(s.time)}\t{s.video_id}\t{s.node}\t{s.hops}")
    return "\n".join(lines) + "\n"


def parse_result_file(text: str) -> list[tuple[float, int, int, int]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != RESULT_HEADER:
        raise ValueError("missing 'Transmitted Videos' header")
    if len(lines) < 2 or lines[1].split() != list(RESULT_COLUMNS):
        raise ValueError("missing column header")
    rows = []
    for ln in lines[2:]:
        t, vid, node, hops = ln.split()
        rows.append((float(t), int(vid), int(node), int(hops)))
    return rows


def debug_line(time: float, node: int | None, module: str, message: str) -> str:
    owner = "SN.wirelessChannel" if node is None else f"SN.node[{node}].{module}"
    return f"{time:.12f} {owner} {message}"


def emit_debug_trace(records: Iterable[tuple[float, int | None, str, str]]) -> str:
    return "".join(debug_line(*rec) + "\n" for rec in records)


def emit_receiver_trace(status: Sequence[tuple[VideoFrameRecord, bool, float | None]], start: float) -> str:
    """``frame_id type recv|lost arrival_ms``; arrival is relative to session start, -1 when lost."""
    lines = []
    for frame, ok, arrival in status:
        if ok and arrival is not None:
            lines.append(f"{frame.frame_id} {frame.frame_type} recv {(arrival - start) * 1000.0:.3f}")
        else:
            lines.append(f"{frame.frame_id} {frame.frame_type} lost -1")
    return "".join(ln + "\n" for ln in lines)


@dataclass
class SessionLog:
    """Raw record of one video session as collected during a run."""

    video_id: int
    node: int
    start: float
    frames: list[VideoFrameRecord]
    packets: list[list]  # per frame, the PacketRecords sent for it


def aggregate_metrics(
    logs: Sequence[SessionLog],
    fates: dict[str, int],
    offered: int,
    pattern: GopPattern,
    **extra,
) -> RunReport:
    sessions = []
    for log in logs:
        rep = SessionReport(log.start, log.video_id, log.node)
        received, arrivals, hop_counts = [], [], []
        for frame, pkts in zip(log.frames, log.packets):
            received.append(frame_received(frame, pkts))
            arrivals.append(frame_arrival_time(pkts))
            for p in pkts:
                rep.packets_offered += 1
                if p.recv_time is not None:
                    rep.packets_delivered += 1
                    hop_counts.append(p.hops)
                if p.kind == "redundancy":
                    rep.redundancy_packets += 1
                    rep.redundancy_bytes += p.payload
        sessions.append(session_metrics(rep, log.frames, received, arrivals, pattern, hop_counts))
    return RunReport(sessions, {f: fates.get(f, 0) for f in FATES}, offered, **extra)


def pool_reports(reports: Sequence[RunReport]) -> dict[str, float]:
    """Pooled PDR, DFR and redundancy over several runs."""
    offered = sum(r.offered for r in reports)
    frames = sum(r.total_frames for r in reports)
    return {
        "pdr": sum(r.delivered for r in reports) / offered if offered else 0.0,
        "dfr": sum(s.frames_decodable for r in reports for s in r.sessions) / frames if frames else 0.0,
        "redundancy_bytes": float(sum(r.redundancy_bytes for r in reports)),
    }
