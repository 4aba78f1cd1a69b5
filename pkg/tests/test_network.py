import itertools
import math

import numpy as np
import pytest

from wmsnsim.channel import ChannelParams, RadioParams
from wmsnsim.engine import RngStream, Simulator
from wmsnsim.network import MacParams, Network, Tracer, _Tx
from wmsnsim.routing import RoutingParams, next_hop_expected_progress, next_hop_greedy
from wmsnsim.video import PacketRecord

FLAT = ChannelParams(sigma=0.0)
# step-like PER with the threshold at the sensitivity: in range means delivered
CLEAN = RadioParams(per_midpoint=0.0, per_steepness=200.0)


def make_net(positions, sink=0, radio=CLEAN, channel=FLAT, mac=MacParams(), routing=RoutingParams(), seed=1,
             tracer=None, on_delivered=None):
    sim = Simulator()
    net = Network(sim, positions, [radio] * len(positions), channel, mac, routing, sink,
                  RngStream(seed, "channel"), RngStream(seed, "mac"), tracer, on_delivered)
    return sim, net


def packets(n, payload=100):
    out = []
    for i in range(n):
        p = PacketRecord(i, i, 0, "data", payload)
        p.seq = i
        out.append(p)
    return out


def test_busy_channel_exhausts_retries():
    sim, net = make_net([(0, 0), (5, 0), (2, 0)], tracer=Tracer({2: frozenset({"Communication.MAC"})}))
    net.neighbors[2].heard(0, (0, 0), 0.0)
    # node 1 holds the medium for the whole run
    net.active.append(_Tx(1, -1, None, 0.0, math.inf))
    (p,) = packets(1)
    net.originate(2, p)
    sim.run_until(10.0)
    assert net.stats["cca"] == MacParams().retry_max
    assert p.fate == "mac" and net.fates == {"mac": 1}
    msgs = [m for *_, m in net.tracer.records]
    assert msgs[:6] == [f"CCA busy, backing off (attempt {k})" for k in range(1, 7)]
    assert msgs[6].startswith("Channel busy after 7 CCA attempts")


def test_idle_channel_single_cca():
    sim, net = make_net([(0, 0), (5, 0)], mac=MacParams(initial_backoff=False))
    net.neighbors[1].heard(0, (0, 0), 0.0)
    (p,) = packets(1)
    net.originate(1, p)
    sim.run_until(1.0)
    assert net.stats["cca"] == 1 and p.fate == "delivered"
    assert p.recv_time == pytest.approx(MacParams().cca_duration + CLEAN.airtime(106))


def test_drop_tail_overflow():
    routing = RoutingParams(net_buffer_size=64)
    sim, net = make_net([(0, 0), (5, 0)], routing=routing)
    net.neighbors[1].heard(0, (0, 0), 0.0)
    for p in packets(74):
        net.originate(1, p)
    assert net.fates["buffer"] == 10
    assert net.max_occupancy == 64
    sim.run_until(60.0)
    assert net.fates["delivered"] == 64 and net.in_flight == 0


def test_greedy_failure_counted():
    sim, net = make_net([(0, 0), (5, 0)])
    (p,) = packets(1)
    net.originate(1, p)
    assert p.fate == "greedy" and net.in_flight == 0


def test_contention_conserves_packets():
    # four senders around a sink, all within carrier-sense range of each other
    pos = [(0, 0), (4, 0), (-4, 0), (0, 4), (0, -4)]
    sim, net = make_net(pos, channel=ChannelParams(sigma=4.0), radio=RadioParams(), seed=3)
    for s in range(1, 5):
        net.neighbors[s].heard(0, (0, 0), 0.0)
    net.start_beacons([0])
    rng = np.random.default_rng(0)
    for i, p in enumerate(packets(1000)):
        sim.schedule(float(rng.uniform(0, 20)), net.originate, 1 + i % 4, p)
    sim.run_until(200.0)
    assert net.offered == 1000 and net.in_flight == 0
    assert sum(net.fates.values()) == 1000
    assert set(net.fates) <= {"delivered", "channel", "collision", "buffer", "mac", "greedy"}
    assert net.fates["delivered"] > 500


def range_oracle(positions, radio, ch):
    budget = radio.tx_power - radio.sensitivity - ch.pl_d0
    limit = ch.d0 * 10 ** (budget / (10 * ch.path_exponent))
    return [{j for j, q in enumerate(positions) if j != i and math.dist(p, q) <= limit}
            for i, p in enumerate(positions)]


def test_beacons_discover_geometric_neighbors():
    pos = [(5.0 * i, 5.0 * j) for i, j in itertools.product(range(5), range(5))]
    sim, net = make_net(pos, seed=4)
    net.start_beacons()
    sim.run_until(2 * RoutingParams().beacon_interval + 0.01)
    want = range_oracle(pos, CLEAN, FLAT)
    got = [{e.node for e in t.entries()} for t in net.neighbors]
    assert got == want
    assert all(len(w) >= 2 for w in want)


def test_isolated_node_has_no_neighbors():
    sim, net = make_net([(0, 0), (5, 0), (70, 70)])
    net.start_beacons()
    sim.run_until(5.0)
    assert len(net.neighbors[2]) == 0
    assert 2 not in net.neighbors[0]


def test_silent_neighbor_evicted():
    sim, net = make_net([(0, 0), (5, 0)])
    net.start_beacons([1])
    sim.run_until(5.0)
    assert 1 in net.neighbors[0]
    # entries are judged by the clock, not by further beacons
    timeout = RoutingParams().neighbor_timeout
    last = net.neighbors[0].entries()[0].last_heard
    assert net.neighbors[0].entries(last + timeout) != []
    assert net.neighbors[0].entries(last + timeout + 1e-6) == []


def test_one_hop_delivery_has_one_hop():
    got = []
    sim, net = make_net([(0, 0), (6, 0)], on_delivered=got.append)
    net.start_beacons()
    sim.run_until(3.0)
    (p,) = packets(1)
    net.originate(1, p)
    sim.run_until(4.0)
    assert got == [p] and p.hops == 1 and p.path == [1, 0]


def test_header_accounting():
    sim, net = make_net([(0, 0), (6, 0)])
    net.record_transmissions = True
    net.start_beacons()
    sim.run_until(2.5)
    for i, p in enumerate(packets(5)):
        p.payload = 37 + i
        net.originate(1, p)
    sim.run_until(6.0)
    assert net.transmissions
    for _, payload, on_air in net.transmissions:
        assert on_air == payload + RoutingParams().net_frame_overhead
    assert net.bytes_on_air == sum(b for *_, b in net.transmissions)


def test_multihop_paths_loop_free():
    pos = [(40.0, 0.0)] + [(5.0 + 10.0 * i, 8.0 + 9.0 * j) for i in range(8) for j in range(8)]
    got = []
    sim, net = make_net(pos, radio=RadioParams(), channel=ChannelParams(sigma=4.0), seed=7,
                        on_delivered=got.append, routing=RoutingParams(min_link_quality=0.9))
    net.record_transmissions = True
    net.start_beacons()
    sim.run_until(10.0)
    rng = np.random.default_rng(1)
    for p in packets(300):
        sim.schedule(float(rng.uniform(10, 40)), net.originate, int(rng.integers(1, len(pos))), p)
    sim.run_until(120.0)
    assert sum(net.fates.values()) == 300 and len(got) == net.fates["delivered"] > 0
    sink = pos[0]
    for p in got:
        d = [math.dist(pos[n], sink) for n in p.path]
        assert all(a > b for a, b in zip(d, d[1:]))
        assert p.hops == len(p.path) - 1
    assert max(p.hops for p in got) >= 5
    data_tx = sum(1 for _, payload, _ in net.transmissions if payload == 100)
    assert data_tx >= sum(p.hops for p in got)
    assert net.max_occupancy <= RoutingParams().net_buffer_size


def test_invalid_mac_params():
    with pytest.raises(ValueError):
        MacParams(retry_max=0)


def reference_next_hop(net, node):
    table = net.neighbors[node]
    here, dest = net.pos[node], net.pos[net.sink]
    hop = next_hop_greedy(here, table.usable(), dest)
    if hop is None and net.routing.min_link_quality is not None:
        hop = next_hop_expected_progress(here, table.entries(), dest, net.routing.min_beacons)
        if hop is None:
            hop = next_hop_greedy(here, table.entries(), dest)
    return hop


@pytest.mark.parametrize("min_q", [None, 0.95])
def test_array_next_hop_matches_reference(min_q):
    rng = np.random.default_rng(5)
    pos = [(40.0, 0.0)] + [tuple(p) for p in rng.uniform(0, 80, (60, 2))]
    sim, net = make_net(pos, radio=RadioParams(), channel=ChannelParams(pl_d0=46.0, sigma=4.0), seed=2,
                        routing=RoutingParams(min_link_quality=min_q))
    net.start_beacons()
    checked = 0
    for t in np.arange(1.0, 20.0, 0.7):
        sim.run_until(float(t))
        for node in range(1, len(pos)):
            assert net.next_hop(node) == reference_next_hop(net, node)
            checked += 1
    assert checked > 1000
