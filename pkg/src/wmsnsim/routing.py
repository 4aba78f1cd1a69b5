"""Greedy geographic forwarding (the greedy mode of GPSR)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RoutingParams:
    net_buffer_size: int = 64
    net_frame_overhead: int = 6
    beacon_interval: float = 1.0
    neighbor_timeout: float = 3.0
    beacon_payload: int = 8
    # when set, greedy only considers neighbors whose beacon reception ratio
    # estimate clears it after ``min_beacons`` beacons
    min_link_quality: float | None = None
    min_beacons: int = 3
    lq_weight: float = 0.1

    def __post_init__(self):
        if self.net_buffer_size < 1 or self.net_frame_overhead < 0:
            raise ValueError(f"invalid routing parameters {self}")
        if self.beacon_interval <= 0 or self.neighbor_timeout <= 0:
            raise ValueError("beacon interval and neighbor timeout must be positive")
        if self.min_link_quality is not None and not 0.0 <= self.min_link_quality <= 1.0:
            raise ValueError("min_link_quality must lie in [0, 1]")
        if not 0.0 < self.lq_weight <= 1.0:
            raise ValueError("lq_weight must lie in (0, 1]")

    def frame_bytes(self, payload: int) -> int:
        return payload + self.net_frame_overhead


@dataclass
class NeighborEntry:
    node: int
    position: tuple[float, float]
    last_heard: float
    rssi: float | None = None
    beacons: int = 1
    seq: int | None = None
    quality: float = 1.0


class NeighborTable:
    """Neighbor positions learnt from beacons, with a reception-ratio estimate.

    Beacons carry a per-sender sequence number. Each gap in the sequence
    counts as missed beacons, so the estimate is an exponentially weighted
    average of 0/1 reception outcomes (WMEWMA). Eviction only ends freshness:
    link statistics survive it, so a neighbor heard again after a long gap is
    charged for every beacon it missed.
    """

    def __init__(self, timeout: float, min_quality: float | None = None, min_beacons: int = 1,
                 weight: float = 0.1):
        self.timeout = timeout
        self.min_quality = min_quality
        self.min_beacons = min_beacons
        self.weight = weight
        self._entries: dict[int, NeighborEntry] = {}
        self._history: dict[int, NeighborEntry] = {}

    def heard(self, node: int, position, now: float, rssi: float | None = None, seq: int | None = None) -> None:
        entry = self._entries.get(node)
        if entry is None:
            entry = self._history.pop(node, None)
            if entry is None:
                self._entries[node] = NeighborEntry(node, tuple(position), now, rssi, seq=seq)
                return
            self._entries[node] = entry
        entry.position = position if type(position) is tuple else tuple(position)
        entry.last_heard = now
        entry.beacons += 1
        if rssi is not None:
            entry.rssi = rssi if entry.rssi is None else 0.7 * entry.rssi + 0.3 * rssi
        if seq is not None:
            last = entry.seq
            if last is not None and seq > last:
                # one decay step per beacon slot since the last one heard
                w = self.weight
                entry.quality = entry.quality * (1.0 - w) ** (seq - last) + w
            entry.seq = seq

    def usable(self, now: float) -> list[NeighborEntry]:
        """Fresh entries that pass the link-quality filter, if one is configured."""
        entries = self.entries(now)
        if self.min_quality is None:
            return entries
        return [e for e in entries if e.beacons >= self.min_beacons and e.quality >= self.min_quality]

    def evict(self, now: float) -> list[int]:
        stale = [n for n, e in self._entries.items() if now - e.last_heard > self.timeout]
        for n in stale:
            self._history[n] = self._entries.pop(n)
        return stale

    def entries(self, now: float | None = None) -> list[NeighborEntry]:
        if now is not None:
            self.evict(now)
        return list(self._entries.values())

    def __contains__(self, node: int) -> bool:
        return node in self._entries

    def __len__(self) -> int:
        return len(self._entries)


class NeighborState:
    """Every node's neighbor table at once, as ``sender x receiver`` arrays.

    Holds the same statistics as one :class:`NeighborTable` per node, for
    static node positions, so that a beacon updates all of its receivers with
    a few operations on one row. Never-heard pairs have ``last_heard = -inf``.
    """

    def __init__(self, positions, timeout: float, min_quality: float | None = None, min_beacons: int = 1,
                 weight: float = 0.1):
        n = len(positions)
        self.positions = [tuple(map(float, p)) for p in positions]
        self.timeout = timeout
        self.min_quality = min_quality
        self.min_beacons = min_beacons
        self.weight = weight
        self.last_heard = np.full((n, n), -np.inf)
        self.beacons = np.zeros((n, n), dtype=np.int64)
        self.seq = np.full((n, n), -1, dtype=np.int64)
        self.quality = np.ones((n, n))
        self.rssi = np.full((n, n), np.nan)

    def heard_many(self, receivers: np.ndarray, sender: int, now: float, rssi: np.ndarray, seq: int) -> None:
        """``receivers`` all decoded beacon ``seq`` of ``sender`` at the given RSSIs."""
        if len(receivers) == 0:
            return
        beacons, last, quality, old_rssi = (self.beacons[sender], self.seq[sender], self.quality[sender],
                                            self.rssi[sender])
        prev = beacons[receivers]
        known = prev > 0
        self.last_heard[sender, receivers] = now
        beacons[receivers] = prev + 1
        old = old_rssi[receivers]
        old_rssi[receivers] = np.where(known & ~np.isnan(old), 0.7 * old + 0.3 * rssi, rssi)
        gaps = seq - last[receivers]
        step = known & (gaps > 0) & (gaps <= seq)
        if step.any():
            r = receivers[step]
            quality[r] = quality[r] * (1.0 - self.weight) ** gaps[step].astype(float) + self.weight
        last[receivers] = seq

    def heard(self, receiver: int, sender: int, now: float, rssi: float | None = None,
              seq: int | None = None) -> None:
        s, r = sender, receiver
        known = self.beacons[s, r] > 0
        self.last_heard[s, r] = now
        self.beacons[s, r] += 1
        if rssi is not None:
            old = self.rssi[s, r]
            self.rssi[s, r] = rssi if not known or np.isnan(old) else 0.7 * old + 0.3 * rssi
        if seq is not None:
            last = self.seq[s, r]
            if known and last >= 0 and seq > last:
                self.quality[s, r] = self.quality[s, r] * (1.0 - self.weight) ** float(seq - last) + self.weight
            self.seq[s, r] = seq

    def fresh(self, receiver: int, now: float) -> np.ndarray:
        return now - self.last_heard[:, receiver] <= self.timeout

    def eligible(self, receiver: int) -> np.ndarray:
        """Senders with enough beacons for the quality estimate to count."""
        return self.beacons[:, receiver] >= self.min_beacons

    def link_quality(self, receiver: int) -> np.ndarray:
        return self.quality[:, receiver]

    def usable(self, receiver: int, now: float) -> np.ndarray:
        mask = self.fresh(receiver, now)
        if self.min_quality is None:
            return mask
        return mask & self.eligible(receiver) & (self.quality[:, receiver] >= self.min_quality)

    def entries(self, receiver: int, now: float) -> list[NeighborEntry]:
        r = receiver
        out = []
        for s in np.nonzero(self.fresh(r, now))[0].tolist():
            rssi = self.rssi[s, r]
            seq = int(self.seq[s, r])
            out.append(NeighborEntry(s, self.positions[s], float(self.last_heard[s, r]),
                                     None if np.isnan(rssi) else float(rssi), int(self.beacons[s, r]),
                                     None if seq < 0 else seq, float(self.quality[s, r])))
        return out

    def table(self, receiver: int, clock) -> "NeighborView":
        return NeighborView(self, receiver, clock)


class NeighborView:
    """One node's slice of a :class:`NeighborState`, with the NeighborTable interface."""

    def __init__(self, state: NeighborState, node: int, clock):
        self.state = state
        self.node = node
        self._clock = clock

    def heard(self, node: int, position=None, now: float | None = None, rssi: float | None = None,
              seq: int | None = None) -> None:
        self.state.heard(self.node, node, self._clock() if now is None else now, rssi, seq)

    def entries(self, now: float | None = None) -> list[NeighborEntry]:
        return self.state.entries(self.node, self._clock() if now is None else now)

    def usable(self, now: float | None = None) -> list[NeighborEntry]:
        now = self._clock() if now is None else now
        keep = set(np.nonzero(self.state.usable(self.node, now))[0].tolist())
        return [e for e in self.entries(now) if e.node in keep]

    def __contains__(self, node: int) -> bool:
        return bool(self.state.fresh(self.node, self._clock())[node])

    def __len__(self) -> int:
        return int(self.state.fresh(self.node, self._clock()).sum())


def next_hop_greedy(self_pos, neighbors, dest_pos) -> int | None:
    """Neighbor strictly closer to ``dest_pos`` than ``self_pos``, nearest first.

    Ties go to the lowest node id. Returns None at a local maximum.
    """
    best_id = None
    best_d = math.hypot(self_pos[0] - dest_pos[0], self_pos[1] - dest_pos[1])
    for entry in neighbors:
        px, py = entry.position
        d = math.hypot(px - dest_pos[0], py - dest_pos[1])
        if d < best_d or (best_id is not None and d == best_d and entry.node < best_id):
            best_id, best_d = entry.node, d
    return best_id


def next_hop_expected_progress(self_pos, neighbors, dest_pos, min_beacons: int = 1) -> int | None:
    """Neighbor with the least expected loss per metre of progress.

    Without link-layer retransmission end-to-end delivery is the product of
    per-hop reception ratios, so the cost of a hop is ``-ln(quality) / gain``.
    Only neighbors strictly closer to ``dest_pos`` are candidates.
    """
    here = math.hypot(self_pos[0] - dest_pos[0], self_pos[1] - dest_pos[1])
    best_id, best_cost = None, math.inf
    for entry in neighbors:
        if entry.beacons < min_beacons:
            continue
        px, py = entry.position
        gain = here - math.hypot(px - dest_pos[0], py - dest_pos[1])
        if gain <= 0:
            continue
        q = min(max(entry.quality, 1e-9), 0.999)
        cost = -math.log(q) / gain
        if cost < best_cost or (cost == best_cost and entry.node < best_id):
            best_id, best_cost = entry.node, cost
    return best_id
