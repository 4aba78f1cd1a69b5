import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wmsnsim.metrics import (
    FATES,
    RunReport,
    SessionLog,
    SessionReport,
    aggregate_metrics,
    debug_line,
    emit_debug_trace,
    emit_receiver_trace,
    emit_result_file,
    modal,
    parse_result_file,
    pool_reports,
)
from wmsnsim.video import FecPolicy, GopPattern, VideoFrameRecord, packetize

GOP = GopPattern("IPPP")


def test_result_row_format():
    text = emit_result_file([SessionReport(4.13594, 0, 1, 5)])
    assert text == "Transmitted Videos\nTime\tVideo-id\tNode\tHops\n4.13594\t0\t1\t5\n"


def test_result_header_only():
    assert emit_result_file([]) == "Transmitted Videos\nTime\tVideo-id\tNode\tHops\n"
    assert parse_result_file(emit_result_file([])) == []


@given(st.lists(st.tuples(st.floats(0, 1e4, allow_nan=False), st.integers(0, 99), st.integers(0, 100),
                          st.integers(0, 20)), max_size=20))
def test_result_round_trip(rows):
    sessions = [SessionReport(float("%.6g" % t), v, n, h) for t, v, n, h in rows]
    parsed = parse_result_file(emit_result_file(sessions))
    assert parsed == [(s.time, s.video_id, s.node, s.hops) for s in sessions]


def test_result_parse_rejects_garbage():
    with pytest.raises(ValueError):
        parse_result_file("Videos\n")


def test_debug_line_sample():
    line = debug_line(3.868523146136, 0, "Application", "Received packet #18 from Node 1")
    assert line == "3.868523146136 SN.node[0].Application Received packet #18 from Node 1"
    assert emit_debug_trace([]) == ""


def test_receiver_trace():
    frames = [VideoFrameRecord(0, "I", 10, 0.0), VideoFrameRecord(1, "P", 10, 0.04)]
    text = emit_receiver_trace([(frames[0], True, 10.0125), (frames[1], False, None)], 10.0)
    assert text == "0 I recv 12.500\n1 P lost -1\n"


def test_modal_ties_and_empty():
    assert modal([5, 7, 7, 5, 6]) == 5
    assert modal([]) == 0


def run_log(frames, lost, hops=2, start=4.0, delay=0.25):
    """One session log whose packets in ``lost`` (packet ids) never arrive."""
    pkts, pid = [], 0
    for f in frames:
        group = packetize(f, 100, FecPolicy.none(), pid)
        pid += len(group)
        for p in group:
            if p.packet_id not in lost:
                p.recv_time = start + f.release_time + delay
                p.hops = hops
        pkts.append(group)
    return SessionLog(0, 3, start, frames, pkts), pid


def test_lossless_single_hop():
    frames = [VideoFrameRecord(i, "IPPP"[i % 4], 150, i / 26) for i in range(8)]
    log, n = run_log(frames, set(), hops=1)
    rep = aggregate_metrics([log], {"delivered": n}, n, GOP)
    assert rep.pdr == 1 and rep.dfr == 1 and rep.jitter >= 0
    assert rep.modal_hops == 1 and rep.conserved()
    assert rep.mean_delay == pytest.approx(0.25)


def test_delay_is_arrival_minus_release():
    frames = [VideoFrameRecord(0, "I", 50, 0.0)]
    log, n = run_log(frames, set(), start=4.0, delay=0.25)
    rep = aggregate_metrics([log], {"delivered": n}, n, GOP)
    assert rep.sessions[0].delays == [pytest.approx(0.25)]


def test_jitter_oracle():
    s = SessionReport(0, 0, 0, delays=[0.1, 0.3, 0.2, 0.6])
    rep = RunReport([s], {}, 0)
    assert rep.jitter == pytest.approx(np.mean([0.2, 0.1, 0.4]))


def test_truncated_gop_and_loss_propagation():
    frames = [VideoFrameRecord(i, "IPPP"[i % 4], 150, i / 26) for i in range(6)]
    # packet ids: frame i holds packets 2i, 2i+1; lose one packet of frame 4 (the second I)
    log, n = run_log(frames, {8})
    rep = aggregate_metrics([log], {"delivered": n - 1, "channel": 1}, n, GOP)
    s = rep.sessions[0]
    assert s.frames_received == 5 and s.frames_decodable == 4
    assert rep.pdr == (n - 1) / n and rep.conserved()


def test_redundancy_accounting():
    frames = [VideoFrameRecord(0, "I", 400, 0.0), VideoFrameRecord(1, "P", 400, 0.04)]
    pkts = [packetize(frames[0], 100, FecPolicy.qoe_aware(0.5, 0.25, 0.0)),
            packetize(frames[1], 100, FecPolicy.qoe_aware(0.5, 0.25, 0.0), 10)]
    rep = aggregate_metrics([SessionLog(0, 1, 0.0, frames, pkts)], {}, 9, GOP)
    assert rep.sessions[0].redundancy_packets == 3
    assert rep.redundancy_bytes == 300
    assert set(rep.fates) == set(FATES)


def test_pool_reports():
    a = RunReport([SessionReport(0, 0, 0, n_frames=10, frames_decodable=5)], {"delivered": 3}, 4)
    b = RunReport([SessionReport(0, 0, 0, n_frames=30, frames_decodable=30)], {"delivered": 1}, 4)
    pooled = pool_reports([a, b])
    assert pooled["pdr"] == 0.5 and pooled["dfr"] == 35 / 40
