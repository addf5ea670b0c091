import struct

from gamesight import pcap
from gamesight.packets import (
    CaptureStats,
    PacketRecord,
    SkipReason,
    TCP,
    UDP,
    _FragCache,
    parse_packet,
    read_capture,
)
from gamesight.synth import ipv4_tcp, ipv4_udp

RAW = pcap.LINKTYPE_RAW_IP
ETH = pcap.LINKTYPE_ETHERNET


def _eth(frame: bytes, ethertype: int = 0x0800) -> bytes:
    return b"\x02" * 6 + b"\x04" * 6 + struct.pack("!H", ethertype) + frame


def _vlan(frame: bytes, inner_ethertype: int = 0x0800) -> bytes:
    return (
        b"\x02" * 6
        + b"\x04" * 6
        + struct.pack("!HH", 0x8100, 0x0001)
        + struct.pack("!H", inner_ethertype)
        + frame
    )


def test_rawip_udp():
    frame = ipv4_udp("10.0.0.1", "10.0.0.2", 1234, 53, b"q" * 40)
    rec = parse_packet(frame, RAW, 1.0)
    assert isinstance(rec, PacketRecord)
    ft = rec.five_tuple
    assert (ft.src_ip, ft.src_port, ft.dst_ip, ft.dst_port, ft.proto) == (
        "10.0.0.1", 1234, "10.0.0.2", 53, UDP,
    )
    assert rec.payload_len == 40
    assert rec.tcp_meta is None


def test_rawip_tcp_with_payload_bytes():
    frame = ipv4_tcp("10.0.0.1", "10.0.0.2", 1234, 443, 100, 7, 0x18, b"hello")
    rec = parse_packet(frame, RAW, 1.0)
    assert rec.payload_len == 5
    assert rec.payload == b"hello"
    assert rec.tcp_meta.seq == 100
    assert rec.tcp_meta.ack == 7
    assert rec.tcp_meta.flags == 0x18


def test_tcp_empty_payload_has_no_bytes():
    frame = ipv4_tcp("10.0.0.1", "10.0.0.2", 1, 2, 0, 0, 0x10)
    rec = parse_packet(frame, RAW, 0.0)
    assert rec.payload_len == 0
    assert rec.payload is None


def test_ethernet_and_single_vlan():
    inner = ipv4_udp("10.0.0.1", "10.0.0.2", 5, 6, b"x")
    assert isinstance(parse_packet(_eth(inner), ETH, 0.0), PacketRecord)
    assert isinstance(parse_packet(_vlan(inner), ETH, 0.0), PacketRecord)


def test_qinq_rejected():
    inner = struct.pack("!H", 0x0001) + ipv4_udp("10.0.0.1", "10.0.0.2", 5, 6, b"x")
    frame = b"\x02" * 6 + b"\x04" * 6 + struct.pack("!HH", 0x8100, 1) + struct.pack("!H", 0x8100) + inner
    assert parse_packet(frame, ETH, 0.0) is SkipReason.NON_IP


def test_non_ip_ethertype_skipped():
    assert parse_packet(_eth(b"\x00" * 40, ethertype=0x0806), ETH, 0.0) is SkipReason.NON_IP


def test_non_tcp_udp_skipped():
    frame = bytearray(ipv4_udp("10.0.0.1", "10.0.0.2", 5, 6, b"x"))
    frame[9] = 1  # ICMP
    assert parse_packet(bytes(frame), RAW, 0.0) is SkipReason.NON_TCP_UDP


def test_unsupported_link_type():
    assert parse_packet(b"\x00" * 64, 113, 0.0) is SkipReason.UNSUPPORTED_LINK


def test_ipv6_udp():
    src = bytes(range(16))
    dst = bytes(range(16, 32))
    udp = struct.pack("!HHHH", 1000, 2000, 8 + 3, 0) + b"abc"
    hdr = struct.pack("!IHBB", 0x60000000, len(udp), 17, 64) + src + dst
    rec = parse_packet(hdr + udp, RAW, 0.0)
    assert isinstance(rec, PacketRecord)
    assert rec.five_tuple.src_port == 1000
    assert rec.payload_len == 3


def _frag_pair():
    """First fragment (MF set) and tail fragment of one UDP datagram."""
    head = bytearray(ipv4_udp("10.0.0.1", "10.0.0.2", 777, 888, b"A" * 100))
    head[4:6] = struct.pack("!H", 42)  # ip id
    head[6:8] = struct.pack("!H", 0x2000)  # MF, offset 0
    tail = bytearray(ipv4_udp("10.0.0.1", "10.0.0.2", 0, 0, b"B" * 60))
    tail[4:6] = struct.pack("!H", 42)
    tail[6:8] = struct.pack("!H", (100 + 8) // 8)  # offset past the head
    return bytes(head), bytes(tail)


def test_fragment_tail_attributed_via_head():
    head, tail = _frag_pair()
    cache = _FragCache()
    rec1 = parse_packet(head, RAW, 0.0, cache)
    assert isinstance(rec1, PacketRecord)
    rec2 = parse_packet(tail, RAW, 0.1, cache)
    assert isinstance(rec2, PacketRecord)
    assert rec2.five_tuple.src_port == 777
    assert rec2.five_tuple.dst_port == 888
    assert rec2.payload_len == 68  # the tail's whole IP payload


def test_fragment_tail_without_head_skipped():
    _, tail = _frag_pair()
    assert parse_packet(tail, RAW, 0.0, _FragCache()) is SkipReason.FRAGMENT
    assert parse_packet(tail, RAW, 0.0, None) is SkipReason.FRAGMENT


def test_truncated_frames_skipped():
    assert parse_packet(b"", RAW, 0.0) is SkipReason.TRUNCATED
    assert parse_packet(b"\x45" + b"\x00" * 10, RAW, 0.0) is SkipReason.TRUNCATED
    assert parse_packet(b"\x02" * 8, ETH, 0.0) is SkipReason.TRUNCATED


def test_read_capture_counts_stats(tmp_pcap):
    frames = [
        (0.0, ipv4_udp("10.0.0.1", "10.0.0.2", 1, 2, b"x")),
        (0.1, b"\x45" + b"\x00" * 5),  # truncated IPv4
    ]
    pcap.write_capture(frames, tmp_pcap)
    stats = CaptureStats()
    out = list(read_capture(tmp_pcap, stats))
    assert len(out) == 1
    assert stats.packets == 1
    assert stats.skipped == 1
    assert stats.skip_reasons == {"truncated": 1}
