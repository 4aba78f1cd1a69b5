"""Paired multi-seed studies: FEC policy comparison and hop-count degradation."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from importlib.resources import files
from statistics import mean
from typing import Sequence

from .channel import ChannelParams, RadioParams
from .config import RunConfig, parse_config
from .metrics import RunReport, modal
from .network import MacParams
from .routing import RoutingParams
from .scenario import VideoParams, simulate, simulate_line
from .video import FecPolicy, SizeParams

POLICY_MODES = ("none", "simple", "qoe_aware")


def intrusion_config() -> RunConfig:
    """The bundled two-tier intrusion-detection scenario."""
    text = files("wmsnsim").joinpath("data/intrusion_detection.ini").read_text()
    return parse_config(text, "intrusion_detection.ini")


@dataclass
class FecComparison:
    seeds: list[int]
    min_hops: int
    reports: dict[str, list[RunReport]]
    # per policy: per-seed DFR over sessions in the hop class (None when the seed has none)
    seed_dfr: dict[str, list[float | None]] = field(default_factory=dict)
    elapsed: float = 0.0

    def mean_dfr(self, mode: str) -> float:
        vals = [v for v in self.seed_dfr[mode] if v is not None]
        return mean(vals) if vals else float("nan")

    def gain(self, mode: str, baseline: str = "none") -> float:
        return self.mean_dfr(mode) - self.mean_dfr(baseline)

    def redundancy_bytes(self, mode: str) -> int:
        return sum(r.redundancy_bytes for r in self.reports[mode])

    def redundancy_ratio(self, mode: str = "qoe_aware", reference: str = "simple") -> float:
        ref = self.redundancy_bytes(reference)
        return self.redundancy_bytes(mode) / ref if ref else float("nan")

    def sessions_in_class(self) -> int:
        return sum(1 for v in self._classes().values() if v >= self.min_hops)

    def _classes(self) -> dict[tuple[int, int], int]:
        """Hop class of a session: its largest modal hop count over the paired policy runs."""
        classes: dict[tuple[int, int], int] = {}
        for reps in self.reports.values():
            for i, rep in enumerate(reps):
                for s in rep.sessions:
                    key = (i, s.video_id)
                    classes[key] = max(classes.get(key, 0), s.hops)
        return classes


def compare_fec_policies(config: RunConfig, seeds: Sequence[int], min_hops: int = 3,
                         modes: Sequence[str] = POLICY_MODES) -> FecComparison:
    """Run every seed under each FEC policy; DFR restricted to sessions of >= ``min_hops`` hops.

    Runs are paired: detections and sessions depend only on the seed, so the
    same session id refers to the same intrusion under every policy.
    """
    t0 = time.perf_counter()
    reports = {}
    for mode in modes:
        cfg = config.with_entries(**{"SN.node[*].Application.fecMode": mode})
        reports[mode] = [simulate(cfg, seed).report for seed in seeds]
    out = FecComparison(list(seeds), min_hops, reports)
    classes = out._classes()
    for mode, reps in reports.items():
        per_seed = []
        for i, rep in enumerate(reps):
            frames = decodable = 0
            for s in rep.sessions:
                if classes[(i, s.video_id)] >= min_hops:
                    frames += s.n_frames
                    decodable += s.frames_decodable
            per_seed.append(decodable / frames if frames else None)
        out.seed_dfr[mode] = per_seed
    out.elapsed = time.perf_counter() - t0
    return out


# line-topology settings matching the bundled scenario's radio and video calibration
LINE_VIDEO = VideoParams(sizes=SizeParams(500.0, 100.0, 50.0, 0.1), mtu_payload=100)
LINE_CHANNEL = ChannelParams(pl_d0=46.0)
LINE_ROUTING = RoutingParams(min_link_quality=0.95)


@dataclass
class HopStudy:
    hops: list[int]
    seeds: list[int]
    reports: dict[int, list[RunReport]]

    def mean_dfr(self, n_hops: int) -> float:
        return mean(r.dfr for r in self.reports[n_hops])

    def modal_hops(self, n_hops: int) -> int:
        """Most common measured hop count of a topology over its seeds."""
        return modal(r.modal_hops for r in self.reports[n_hops])

    def curve(self) -> list[tuple[int, float]]:
        """(modal hop count, mean DFR) per topology, ordered by hop count."""
        return sorted((self.modal_hops(n), self.mean_dfr(n)) for n in self.hops)


def hop_degradation(policy: FecPolicy, hops: Sequence[int] = (1, 3, 5, 7), seeds: Sequence[int] = range(1, 11),
                    spacing: float = 12.0, video: VideoParams = LINE_VIDEO, channel: ChannelParams = LINE_CHANNEL,
                    radio: RadioParams = RadioParams(), mac: MacParams = MacParams(),
                    routing: RoutingParams = LINE_ROUTING, warmup: float = 10.0) -> HopStudy:
    """One video over chains of each length, same seeds for every length."""
    reports = {
        n: [simulate_line(n, spacing, policy, seed, video, channel, radio, mac, routing, warmup) for seed in seeds]
        for n in hops
    }
    return HopStudy(list(hops), list(seeds), reports)
