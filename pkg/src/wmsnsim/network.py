"""Event-driven protocol stack: shared radio medium, CSMA MAC and greedy routing.

Every video packet handed to :meth:`Network.originate` ends in exactly one
fate: ``delivered``, ``channel``, ``collision``, ``buffer``, ``mac`` or
``greedy``.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .channel import ChannelParams, Outcome, RadioParams, dbm_to_mw, decide, success_probability
from .engine import RngStream, Simulator
from .metrics import FATES  # noqa: F401  (re-exported)
from .routing import NeighborState, RoutingParams
from .video import PacketRecord



@dataclass(frozen=True)
class MacParams:
    backoff_max: float = 0.01
    retry_max: int = 7
    cca_duration: float = 128e-6
    initial_backoff: bool = True

    def __post_init__(self):
        if self.backoff_max < 0 or self.retry_max < 1 or self.cca_duration < 0:
            raise ValueError(f"invalid MAC parameters {self}")


class Tracer:
    """Collects debug-trace records for the modules switched on per node."""

    def __init__(self, flags: dict[int | None, frozenset[str]] | None = None):
        self.flags = flags or {}
        self.records: list[tuple[float, int | None, str, str]] = []
        self.modules = frozenset().union(*self.flags.values()) if self.flags else frozenset()

    def on(self, node: int | None, module: str) -> bool:
        mods = self.flags.get(node)
        return mods is not None and module in mods

    def log(self, time: float, node: int | None, module: str, message: str) -> None:
        if self.on(node, module):
            self.records.append((time, node, module, message))


class _Tx:
    __slots__ = ("sender", "dest", "packet", "start", "end", "overlap")

    def __init__(self, sender, dest, packet, start, end):
        self.sender = sender
        self.dest = dest
        self.packet = packet
        self.start = start
        self.end = end
        self.overlap = []


class _Job:
    __slots__ = ("packet", "next_hop", "attempts")

    def __init__(self, packet, next_hop):
        self.packet = packet
        self.next_hop = next_hop
        self.attempts = 0


class Network:
    def __init__(
        self,
        sim: Simulator,
        positions: Sequence[tuple[float, float]],
        radios: Sequence[RadioParams],
        channel: ChannelParams,
        mac: MacParams,
        routing: RoutingParams,
        sink: int,
        rng_channel: RngStream,
        rng_mac: RngStream,
        tracer: Tracer | None = None,
        on_delivered: Callable[[PacketRecord], None] | None = None,
    ):
        self.sim = sim
        self.pos = [tuple(map(float, p)) for p in positions]
        self.n = n = len(self.pos)
        if len(radios) != n:
            raise ValueError("one RadioParams per node required")
        self.radios = list(radios)
        self.channel = channel
        self.mac = mac
        self.routing = routing
        self.sink = sink
        self.rng = rng_channel
        self.rng_mac = rng_mac
        self.tracer = tracer or Tracer()
        self.on_delivered = on_delivered

        xy = np.array(self.pos)
        dist = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
        pl = channel.pl_d0 + 10.0 * channel.path_exponent * np.log10(np.maximum(dist, channel.d0) / channel.d0)
        tx = np.array([r.tx_power for r in self.radios])
        self.mean_rx_dbm = tx[:, None] - pl
        np.fill_diagonal(self.mean_rx_dbm, -np.inf)
        self.mean_rx_mw = (10.0 ** (self.mean_rx_dbm / 10.0)).tolist()
        sens = np.array([r.sensitivity for r in self.radios])
        reach = self.mean_rx_dbm + 4.0 * channel.sigma >= sens[None, :]
        self._cands = [np.nonzero(reach[s])[0] for s in range(n)]
        self._cand_rx = [self.mean_rx_dbm[s, c] for s, c in enumerate(self._cands)]
        self._sens = sens
        self._noise = np.array([r.noise_floor for r in self.radios])
        # receiver parameters sliced per sender once, for vectorised beacon reception
        per_mid = np.array([r.per_midpoint for r in self.radios])
        per_steep = np.array([r.per_steepness for r in self.radios])
        self._cand_params = [(sens[c], self._noise[c], per_mid[c], per_steep[c]) for c in self._cands]
        self._cca_mw = [dbm_to_mw(r.cca_threshold) for r in self.radios]

        self.buffers = [deque() for _ in range(n)]
        self.jobs: list[_Job | None] = [None] * n
        self.transmitting = [False] * n
        self.beacon_pending = [False] * n
        self.beacon_seq = [0] * n
        self.neighbor_state = NeighborState(self.pos, routing.neighbor_timeout, routing.min_link_quality,
                                            routing.min_beacons, routing.lq_weight)
        self.neighbors = [self.neighbor_state.table(i, lambda: self.sim.now) for i in range(n)]
        sx, sy = self.pos[sink]
        self._dsink = np.array([math.hypot(x - sx, y - sy) for x, y in self.pos])
        self.active: list[_Tx] = []

        self.fates: Counter = Counter()
        self.offered = 0
        self.in_flight = 0
        self.max_occupancy = 0
        self.stats: Counter = Counter()
        self.bytes_on_air = 0
        self.transmissions: list[tuple[int, int, int]] = []  # (sender, payload, bytes on air)
        self.record_transmissions = False

    # -- application entry points -------------------------------------------------

    def start_beacons(self, nodes: Sequence[int] | None = None) -> None:
        interval = self.routing.beacon_interval
        for node in range(self.n) if nodes is None else nodes:
            phase = self.rng_mac.uniform(0.0, interval)
            self.sim.schedule(self.sim.now + phase, self._beacon_timer, node, target=node, kind="beacon")

    def originate(self, node: int, packet: PacketRecord) -> None:
        packet.source = node
        packet.send_time = self.sim.now
        packet.path = [node]
        self.offered += 1
        self.in_flight += 1
        self._enqueue(node, packet)

    # -- routing ------------------------------------------------------------------

    def _fate(self, packet: PacketRecord, fate: str) -> None:
        packet.fate = fate
        self.fates[fate] += 1
        self.in_flight -= 1

    def _enqueue(self, node: int, packet: PacketRecord) -> None:
        buf = self.buffers[node]
        if len(buf) >= self.routing.net_buffer_size:
            self._fate(packet, "buffer")
            self.tracer.log(self.sim.now, node, "Communication.Routing",
                            f"Buffer full, dropping packet #{packet.seq} from Node {packet.source}")
            return
        buf.append(packet)
        if len(buf) > self.max_occupancy:
            self.max_occupancy = len(buf)
        if self.jobs[node] is None:
            self._mac_kick(node)

    def next_hop(self, node: int) -> int | None:
        """Greedy next hop over usable neighbors, with the link-quality fallbacks.

        Same choices as ``next_hop_greedy`` and ``next_hop_expected_progress``
        over the node's neighbor entries, computed on the state arrays.
        """
        st = self.neighbor_state
        now = self.sim.now
        d = self._dsink
        closer = d < d[node]
        hop = self._nearest(st.usable(node, now) & closer)
        if hop is None and st.min_quality is not None:
            # no good link makes progress: best expected progress, then plain greedy
            fresh = st.fresh(node, now) & closer
            cand = fresh & st.eligible(node)
            if cand.any():
                idx = np.nonzero(cand)[0]
                q = np.clip(st.link_quality(node)[idx], 1e-9, 0.999)
                cost = -np.log(q) / (d[node] - d[idx])
                hop = int(idx[np.argmin(cost)])
            else:
                hop = self._nearest(fresh)
        return hop

    def _nearest(self, mask: np.ndarray) -> int | None:
        """Candidate closest to the sink, lowest id on ties."""
        if not mask.any():
            return None
        return int(np.argmin(np.where(mask, self._dsink, np.inf)))

    # -- MAC --------------------------------------------------------------------

    def _beacon_timer(self, node: int) -> None:
        self.beacon_pending[node] = True
        if self.jobs[node] is None:
            self._mac_kick(node)
        self.sim.schedule(self.sim.now + self.routing.beacon_interval, self._beacon_timer, node,
                          target=node, kind="beacon")

    def _mac_kick(self, node: int) -> None:
        if self.jobs[node] is not None:
            return
        tracer = self.tracer
        if self.beacon_pending[node]:
            job = _Job(None, -1)
        else:
            buf = self.buffers[node]
            while True:
                if not buf:
                    return
                packet = buf[0]
                hop = self.next_hop(node)
                if hop is not None:
                    break
                buf.popleft()
                self._fate(packet, "greedy")
                tracer.log(self.sim.now, node, "Communication.Routing",
                           f"Greedy failure, dropping packet #{packet.seq} from Node {packet.source}")
            job = _Job(packet, hop)
            tracer.log(self.sim.now, node, "Communication.Routing",
                       f"Forwarding packet #{packet.seq} from Node {packet.source} to Node {hop}")
        self.jobs[node] = job
        delay = self.mac.cca_duration
        if self.mac.initial_backoff:
            delay += self.rng_mac.uniform01() * self.mac.backoff_max
        self.sim.schedule(self.sim.now + delay, self._cca, node, target=node, kind="cca")

    def local_power_mw(self, node: int) -> float:
        rx = self.mean_rx_mw
        return sum(rx[t.sender][node] for t in self.active)

    def _cca(self, node: int) -> None:
        job = self.jobs[node]
        job.attempts += 1
        self.stats["cca"] += 1
        if self.local_power_mw(node) < self._cca_mw[node]:
            self._start_tx(node, job)
            return
        if job.attempts >= self.mac.retry_max:
            self.jobs[node] = None
            if job.packet is None:
                self.beacon_pending[node] = False
                self.stats["beacon_mac_drop"] += 1
            else:
                self.buffers[node].popleft()
                self._fate(job.packet, "mac")
                self.tracer.log(self.sim.now, node, "Communication.MAC",
                                f"Channel busy after {job.attempts} CCA attempts, dropping packet "
                                f"#{job.packet.seq} from Node {job.packet.source}")
            self._mac_kick(node)
            return
        self.tracer.log(self.sim.now, node, "Communication.MAC", f"CCA busy, backing off (attempt {job.attempts})")
        delay = self.rng_mac.uniform01() * self.mac.backoff_max + self.mac.cca_duration
        self.sim.schedule(self.sim.now + delay, self._cca, node, target=node, kind="cca")

    def _start_tx(self, node: int, job: _Job) -> None:
        now = self.sim.now
        packet = job.packet
        payload = self.routing.beacon_payload if packet is None else packet.payload
        nbytes = self.routing.frame_bytes(payload)
        tx = _Tx(node, job.next_hop, packet, now, now + self.radios[node].airtime(nbytes))
        for other in self.active:
            other.overlap.append(tx)
            tx.overlap.append(other)
        self.active.append(tx)
        self.transmitting[node] = True
        self.bytes_on_air += nbytes
        if self.record_transmissions:
            self.transmissions.append((node, payload, nbytes))
        if packet is None:
            self.stats["beacons"] += 1
        else:
            packet.hops += 1
            self.stats["data_tx"] += 1
            self.tracer.log(now, node, "Communication.Radio",
                            f"Transmitting packet #{packet.seq} from Node {packet.source} ({nbytes} bytes)")
        self.sim.schedule(tx.end, self._end_tx, tx, target=node, kind="tx_end")

    def _interference_mw(self, tx: _Tx, receiver: int) -> tuple[float, bool]:
        """Summed overlapping power at ``receiver`` and whether it was itself transmitting."""
        rx = self.mean_rx_mw
        total = 0.0
        for o in tx.overlap:
            if o.sender == receiver:
                return total, True
            total += rx[o.sender][receiver]
        return total, False

    def _end_tx(self, tx: _Tx) -> None:
        node = tx.sender
        self.active.remove(tx)
        self.transmitting[node] = False
        self.jobs[node] = None
        if tx.packet is None:
            self.beacon_pending[node] = False
            self.beacon_seq[node] += 1
            self._deliver_beacon(tx)
        else:
            self.buffers[node].popleft()
            self._deliver_data(tx)
        self._mac_kick(node)

    def _deliver_beacon(self, tx: _Tx) -> None:
        s = tx.sender
        cands = self._cands[s]
        if len(cands) == 0:
            return
        gen = self.rng.generator
        sigma = self.channel.sigma
        rx = self._cand_rx[s] - (gen.normal(0.0, sigma, len(cands)) if sigma > 0 else 0.0)
        u = gen.random(len(cands))
        now = self.sim.now
        seq = self.beacon_seq[s]
        if not tx.overlap:
            # no interference: the logistic PER over the noise floor, for all receivers at once
            sens, noise, mid, steep = self._cand_params[s]
            z = steep * (rx - noise - mid)
            with np.errstate(over="ignore"):
                p = 1.0 / (1.0 + np.exp(-z))
            hits = (rx >= sens) & (u < p)
            self.neighbor_state.heard_many(cands[hits], s, now, rx[hits], seq)
            return
        ok = np.nonzero(rx >= self._sens[cands])[0]
        for i in ok.tolist():
            r = int(cands[i])
            interf, busy = self._interference_mw(tx, r)
            if busy:
                continue
            if interf == 0.0:
                if u[i] >= success_probability(rx[i] - self._noise[r], self.radios[r]):
                    continue
            elif not decide(float(rx[i]), interf, self.radios[r], float(u[i])).delivered:
                continue
            self.neighbor_state.heard(r, s, now, float(rx[i]), seq)

    def _deliver_data(self, tx: _Tx) -> None:
        packet = tx.packet
        r = tx.dest
        interf, busy = self._interference_mw(tx, r)
        rx = self.mean_rx_dbm[tx.sender, r] - self.rng.gaussian(0.0, self.channel.sigma)
        u = self.rng.uniform01()
        outcome = Outcome.COLLISION if busy else decide(float(rx), interf, self.radios[r], u)
        now = self.sim.now
        if not outcome.delivered:
            fate = "collision" if outcome is Outcome.COLLISION else "channel"
            self._fate(packet, fate)
            self.tracer.log(now, r, "Communication.Radio",
                            f"Lost packet #{packet.seq} from Node {packet.source} ({outcome.value})")
            return
        packet.path.append(r)
        if r == self.sink:
            packet.recv_time = now
            self._fate(packet, "delivered")
            if self.on_delivered is not None:
                self.on_delivered(packet)
            return
        self._enqueue(r, packet)
