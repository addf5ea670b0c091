import pytest

from gamesight.qoe import (
    FPS_HIGH,
    FPS_LOW,
    FPS_MEDIUM,
    FrameRateTracker,
    LatencyTracker,
    RES_FHD,
    RES_HD,
    RES_SD,
    RES_UNKNOWN,
    ResolutionTable,
    U32,
    fps_band,
)

from conftest import tcp_record

CLIENT = "192.0.2.10"
SERVER = "203.0.113.7"

from gamesight.packets import Direction


def _up(ts, seq, length):
    pkt = tcp_record(ts, CLIENT, 51000, SERVER, 322, length, seq=seq)
    pkt.direction = Direction.UPSTREAM
    return pkt


def _down(ts, ack, length=0):
    pkt = tcp_record(ts, SERVER, 322, CLIENT, 51000, length, ack=ack)
    pkt.direction = Direction.DOWNSTREAM
    return pkt


# -- latency ------------------------------------------------------------


def test_latency_pairing_20ms():
    t = LatencyTracker()
    t.feed(_up(10.0, seq=1000, length=51))
    sample = t.feed(_down(10.020, ack=1051))
    assert sample is not None
    assert sample.latency_ms == pytest.approx(20.0)
    assert t.samples == [sample]


def test_pure_acks_never_registered():
    t = LatencyTracker()
    t.feed(_up(10.0, seq=1000, length=0))
    assert t.feed(_down(10.020, ack=1000)) is None
    assert t.samples == []


def test_unmatched_ack_ignored():
    t = LatencyTracker()
    t.feed(_up(10.0, seq=1000, length=51))
    assert t.feed(_down(10.1, ack=9999)) is None
    assert t.pending  # original pair still waiting


def test_sequence_wraparound():
    # [DERIVED] seq near 2^32: expected ack wraps to (seq + len) mod 2^32
    t = LatencyTracker()
    seq = U32 - 5
    t.feed(_up(1.0, seq=seq, length=10))
    assert (seq + 10) % U32 == 5
    sample = t.feed(_down(1.008, ack=5))
    assert sample.latency_ms == pytest.approx(8.0)


def test_negative_delta_discarded():
    t = LatencyTracker()
    t.feed(_up(10.0, seq=1, length=5))
    assert t.feed(_down(9.5, ack=6)) is None
    assert t.negative_discarded == 1
    assert t.samples == []


def test_pending_expiry():
    t = LatencyTracker(expiry_s=4.0)
    for i in range(9):
        t.feed(_up(float(i) * 0.1, seq=i * 1000, length=10))
    # pending > 8, so a much later upstream packet purges the stale entries
    t.feed(_up(100.0, seq=990000, length=10))
    assert len(t.pending) == 1
    assert t.feed(_down(100.01, ack=10 + 0 * 1000)) is None  # expired pair


# -- frame rate (running-max / marker state machine) -------------------


def _run(tracker, events):
    out = []
    for size, ts in events:
        out.extend(tracker.feed(size, ts))
    return out


def test_thirty_frame_groups_measure_30fps():
    # [DERIVED] 30 groups/s of (full, full, marker) -> 30 fps
    events = []
    for sec in range(3):
        for k in range(30):
            base = sec + k / 30.0
            events += [(1466, base), (1466, base + 1e-4), (400, base + 2e-4)]
    samples = _run(FrameRateTracker(), events)
    assert len(samples) >= 2
    for s in samples:
        assert s.fps == pytest.approx(30.0)


def test_constant_size_stream_is_zero_fps():
    events = [(1200, i / 500.0) for i in range(1500)]
    samples = _run(FrameRateTracker(), events)
    assert samples
    assert all(s.fps == 0.0 for s in samples)


def test_no_double_count_without_intervening_full_size():
    # full, marker, marker: only one frame despite two small packets
    tr = FrameRateTracker()
    _run(tr, [(1466, 0.0), (400, 0.001), (300, 0.002)])
    assert tr.frame_count == 1


def test_growing_max_packets_not_counted_as_markers():
    # a rising running maximum must not register frames
    tr = FrameRateTracker()
    _run(tr, [(100, 0.0), (200, 0.01), (300, 0.02), (1466, 0.03)])
    assert tr.frame_count == 0


def test_empty_interval_emits_zero():
    samples = _run(FrameRateTracker(), [(1466, 0.0), (400, 0.001), (1466, 5.0), (400, 5.001)])
    assert samples[0].fps == pytest.approx(1.0)
    assert [s.fps for s in samples[1:4]] == [0.0, 0.0, 0.0]


def test_interval_origin_advances():
    tr = FrameRateTracker()
    samples = _run(
        tr,
        [(1466, 0.0), (400, 0.001), (1466, 1.05), (400, 1.051), (1466, 2.05)],
    )
    assert [s.interval_start for s in samples] == [0.0, 1.0]
    assert [s.fps for s in samples] == [1.0, 1.0]


def test_size_margin_boundary():
    # a drop of exactly `margin` below max is NOT a marker; one more byte is
    tr = FrameRateTracker(size_margin=1)
    _run(tr, [(1466, 0.0), (1465, 0.001)])
    assert tr.frame_count == 0
    tr = FrameRateTracker(size_margin=1)
    _run(tr, [(1466, 0.0), (1464, 0.001)])
    assert tr.frame_count == 1


# -- bands --------------------------------------------------------------


def test_fps_bands():
    assert fps_band(30.0) == FPS_LOW
    assert fps_band(39.9) == FPS_LOW
    assert fps_band(40.0) == FPS_MEDIUM
    assert fps_band(50.0) == FPS_MEDIUM
    assert fps_band(50.1) == FPS_HIGH
    assert fps_band(60.0) == FPS_HIGH


def test_resolution_edges_60fps_row():
    table = ResolutionTable()
    assert table.infer(60.0, 22.0e6) == RES_HD  # inclusive upper edge
    assert table.infer(60.0, 22.1e6) == RES_FHD
    assert table.infer(60.0, 13.0e6) == RES_SD
    assert table.infer(60.0, 13.1e6) == RES_HD


def test_resolution_edges_30fps_row():
    table = ResolutionTable()
    assert table.infer(30.0, 8.0e6) == RES_SD
    assert table.infer(30.0, 9.0e6) == RES_HD
    assert table.infer(30.0, 15.0e6) == RES_FHD


def test_resolution_nominal_split():
    table = ResolutionTable()
    # 12 Mbps peak: HD on the 60 fps row, HD on the 30 fps row too; 13.5 Mbps
    # differs: SD-ish on 60 row edges vs FHD-ish threshold on 30 row
    assert table.infer(46.0, 13.5e6) == RES_HD  # 60 fps row
    assert table.infer(44.0, 13.5e6) == RES_HD  # 30 fps row (< 14 M edge)
    assert table.infer(44.0, 14.5e6) == RES_FHD
    assert table.infer(46.0, 14.5e6) == RES_HD


def test_resolution_activity_floor():
    table = ResolutionTable()
    assert table.infer(60.0, 1.9e6) == RES_UNKNOWN


def test_resolution_table_validates_edges():
    with pytest.raises(ValueError):
        ResolutionTable(edges_60=(22e6, 13e6))
