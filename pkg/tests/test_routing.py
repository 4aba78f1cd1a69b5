import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wmsnsim.routing import (
    NeighborEntry,
    NeighborState,
    NeighborTable,
    RoutingParams,
    next_hop_expected_progress,
    next_hop_greedy,
)


def entry(node, x, y, quality=1.0, beacons=5):
    return NeighborEntry(node, (x, y), 0.0, beacons=beacons, quality=quality)


def greedy_oracle(self_pos, nbrs, dest):
    here = math.dist(self_pos, dest)
    closer = [(math.dist(e.position, dest), e.node) for e in nbrs if math.dist(e.position, dest) < here]
    return min(closer)[1] if closer else None


def test_sole_closer_neighbor():
    assert next_hop_greedy((0, 0), [entry(7, 5, 0)], (10, 0)) == 7


def test_local_maximum():
    assert next_hop_greedy((0, 0), [entry(1, -3, 0), entry(2, 0, 11)], (10, 0)) is None
    assert next_hop_greedy((0, 0), [], (10, 0)) is None


def test_tie_goes_to_lowest_id():
    nbrs = [entry(9, 5, 1), entry(4, 5, -1), entry(6, 5, 1)]
    assert next_hop_greedy((0, 0), nbrs, (10, 0)) == 4


coords = st.integers(0, 40).map(float)


@given(st.lists(st.tuples(coords, coords), min_size=20, max_size=20), st.tuples(coords, coords),
       st.tuples(coords, coords))
def test_greedy_matches_exhaustive_oracle(points, here, dest):
    nbrs = [entry(i, x, y) for i, (x, y) in enumerate(points)]
    assert next_hop_greedy(here, nbrs, dest) == greedy_oracle(here, nbrs, dest)


def test_eviction_after_timeout():
    t = NeighborTable(timeout=3.0)
    t.heard(1, (0, 0), 0.0)
    t.heard(2, (1, 0), 2.0)
    assert {e.node for e in t.entries(3.0)} == {1, 2}
    assert {e.node for e in t.entries(3.5)} == {2}
    assert 1 not in t and len(t) == 1


def wmewma_oracle(received, w=0.1):
    """Quality after a 0/1 outcome sequence that starts with a reception."""
    q = 1.0
    for r in received[1:]:
        q = (1 - w) * q + w * r
    return q


@given(st.lists(st.booleans(), min_size=1, max_size=60))
def test_sequence_gaps_count_as_misses(pattern):
    pattern = [True] + pattern
    t = NeighborTable(timeout=1e9)
    for seq, got in enumerate(pattern):
        if got:
            t.heard(5, (0, 0), float(seq), seq=seq)
    # trailing misses are only charged once the next beacon arrives
    last = max(i for i, g in enumerate(pattern) if g)
    e = t.entries()[0]
    assert e.quality == pytest.approx(wmewma_oracle([int(g) for g in pattern[:last + 1]]), abs=1e-12)
    assert e.beacons == sum(pattern)


def test_statistics_survive_eviction():
    t = NeighborTable(timeout=3.0)
    for s in range(3):
        t.heard(1, (0, 0), float(s), seq=s)
    t.evict(100.0)
    assert 1 not in t
    t.heard(1, (0, 0), 100.0, seq=100)
    e = t.entries()[0]
    assert e.beacons == 4
    assert e.quality == pytest.approx(0.9 ** 98 + 0.1)


def test_usable_applies_filter():
    t = NeighborTable(timeout=10.0, min_quality=0.9, min_beacons=3)
    for s in (0, 1, 2):
        t.heard(1, (0, 0), 0.0, seq=s)
    t.heard(2, (0, 0), 0.0, seq=0)
    t.heard(2, (0, 0), 0.0, seq=1)
    for s in (0, 1, 5):
        t.heard(3, (0, 0), 0.0, seq=s)
    assert [e.node for e in t.usable(0.0)] == [1]
    assert len(NeighborTable(10.0).usable(0.0)) == 0


def test_rssi_smoothing():
    t = NeighborTable(10.0)
    t.heard(1, (0, 0), 0.0, rssi=-80.0)
    t.heard(1, (0, 0), 0.0, rssi=-90.0)
    assert t.entries()[0].rssi == pytest.approx(-83.0)


def test_expected_progress_prefers_reliable_link():
    # 10 m of progress at q=0.5 costs more per metre than 4 m at q=0.95
    nbrs = [entry(1, 10, 0, quality=0.5), entry(2, 4, 0, quality=0.95)]
    assert next_hop_expected_progress((0, 0), nbrs, (20, 0)) == 2
    assert next_hop_greedy((0, 0), nbrs, (20, 0)) == 1


def test_expected_progress_cost_oracle():
    nbrs = [entry(i, x, 0, quality=q) for i, (x, q) in enumerate([(3, 0.99), (6, 0.9), (9, 0.7), (-2, 1.0)])]
    costs = {e.node: -math.log(min(e.quality, 0.999)) / (e.position[0]) for e in nbrs if e.position[0] > 0}
    assert next_hop_expected_progress((0, 0), nbrs, (30, 0)) == min(costs, key=costs.get)


def test_expected_progress_guards():
    nbrs = [entry(1, 5, 0, beacons=1), entry(2, -5, 0)]
    assert next_hop_expected_progress((0, 0), nbrs, (10, 0), min_beacons=2) is None
    assert next_hop_expected_progress((0, 0), nbrs, (10, 0)) == 1


def test_frame_bytes_header():
    assert RoutingParams().frame_bytes(100) == 106


@pytest.mark.parametrize("kwargs", [
    {"net_buffer_size": 0}, {"net_frame_overhead": -1}, {"beacon_interval": 0},
    {"min_link_quality": 1.5}, {"lq_weight": 0.0},
])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        RoutingParams(**kwargs)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.floats(-95, -60), st.integers(0, 3)),
                min_size=1, max_size=80),
       st.sampled_from([None, 0.5, 0.9]))
def test_array_state_matches_per_node_tables(events, min_q):
    pos = [(0.0, 0.0), (5.0, 0.0), (10.0, 1.0), (3.0, 7.0), (8.0, 8.0)]
    state = NeighborState(pos, timeout=3.0, min_quality=min_q, min_beacons=2)
    tables = [NeighborTable(3.0, min_q, 2) for _ in pos]
    seqs = [0] * len(pos)
    now = 0.0
    for r, s, rssi, skip in events:
        if r == s:
            continue
        now += 0.5 * skip
        seqs[s] += skip + 1
        tables[r].heard(s, pos[s], now, rssi, seqs[s])
        if r % 2:
            state.heard(r, s, now, rssi, seqs[s])
        else:
            state.heard_many(np.array([r]), s, now, np.array([rssi]), seqs[s])
        for node in range(len(pos)):
            want = sorted((e.node, e.beacons, e.seq) for e in tables[node].entries(now))
            got = sorted((e.node, e.beacons, e.seq) for e in state.entries(node, now))
            assert got == want
            for a, b in zip(sorted(tables[node].entries(now), key=lambda e: e.node),
                            sorted(state.entries(node, now), key=lambda e: e.node)):
                assert a.quality == pytest.approx(b.quality, rel=1e-12)
                assert a.rssi == pytest.approx(b.rssi, rel=1e-12)
            assert {e.node for e in tables[node].usable(now)} == \
                set(np.nonzero(state.usable(node, now))[0].tolist())
