"""Frame parsing: link/network/transport layers into PacketRecord values."""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Iterator, Optional

from . import pcap
from .errors import MalformedHeader

TCP = 6
UDP = 17

ETH_IPV4 = 0x0800
ETH_IPV6 = 0x86DD
ETH_VLAN = 0x8100

TCP_FIN = 0x01
TCP_SYN = 0x02
TCP_RST = 0x04
TCP_ACK = 0x10


class Direction(Enum):
    UPSTREAM = "up"
    DOWNSTREAM = "down"


class SkipReason(Enum):
    NON_IP = "non_ip"
    NON_TCP_UDP = "non_tcp_udp"
    TRUNCATED = "truncated"
    FRAGMENT = "fragment"
    UNSUPPORTED_LINK = "unsupported_link"


@dataclass(slots=True)
class TcpMeta:
    seq: int
    ack: int
    flags: int
    header_len: int


@dataclass(slots=True)
class FiveTuple:
    src_ip: str
    src_port: int
    dst_ip: str
    dst_port: int
    proto: int  # TCP or UDP


@dataclass(slots=True)
class PacketRecord:
    ts: float
    five_tuple: FiveTuple
    payload_len: int
    tcp_meta: Optional[TcpMeta] = None
    direction: Optional[Direction] = None  # assigned by the flow engine
    server_name: Optional[str] = None
    payload: Optional[bytes] = None  # TCP only; raw bytes for SNI extraction


@dataclass
class CaptureSource:
    origin: str
    link_type: str = "auto"  # "Ethernet", "RawIP" or "auto" (from pcap header)
    ts_resolution: str = "micro"


class _FragCache:
    """Maps (src, dst, proto, ip-id) of a first fragment to its ports.

    Later fragments of a datagram whose head was seen get attributed to
    the same flow; unmatched tails are skipped. Bounded FIFO.
    """

    def __init__(self, cap: int = 4096):
        self.cap = cap
        self.entries: dict[tuple, tuple[int, int]] = {}

    def put(self, key: tuple, ports: tuple[int, int]) -> None:
        if len(self.entries) >= self.cap:
            self.entries.pop(next(iter(self.entries)))
        self.entries[key] = ports

    def get(self, key: tuple) -> Optional[tuple[int, int]]:
        return self.entries.get(key)


def parse_packet(
    raw: bytes,
    link_type: int,
    ts: float,
    frag_cache: Optional[_FragCache] = None,
) -> PacketRecord | SkipReason:
    """Parse one captured frame. Returns a SkipReason instead of raising."""
    off = 0
    if link_type == pcap.LINKTYPE_ETHERNET:
        if len(raw) < 14:
            return SkipReason.TRUNCATED
        ethertype = (raw[12] << 8) | raw[13]
        off = 14
        if ethertype == ETH_VLAN:
            if len(raw) < 18:
                return SkipReason.TRUNCATED
            ethertype = (raw[16] << 8) | raw[17]
            off = 18
            if ethertype == ETH_VLAN:  # QinQ rejected
                return SkipReason.NON_IP
        if ethertype == ETH_IPV4:
            version = 4
        elif ethertype == ETH_IPV6:
            version = 6
        else:
            return SkipReason.NON_IP
    elif link_type == pcap.LINKTYPE_RAW_IP:
        if not raw:
            return SkipReason.TRUNCATED
        version = raw[0] >> 4
        if version not in (4, 6):
            return SkipReason.NON_IP
    else:
        return SkipReason.UNSUPPORTED_LINK

    if version == 4:
        return _parse_ipv4(raw, off, ts, frag_cache)
    return _parse_ipv6(raw, off, ts)


def _parse_ipv4(raw: bytes, off: int, ts: float, frag_cache) -> PacketRecord | SkipReason:
    if len(raw) < off + 20:
        return SkipReason.TRUNCATED
    ihl = (raw[off] & 0x0F) * 4
    if ihl < 20 or len(raw) < off + ihl:
        return SkipReason.TRUNCATED
    total_len = (raw[off + 2] << 8) | raw[off + 3]
    proto = raw[off + 9]
    src = socket.inet_ntoa(raw[off + 12 : off + 16])
    dst = socket.inet_ntoa(raw[off + 16 : off + 20])

    frag_field = (raw[off + 6] << 8) | raw[off + 7]
    frag_offset = frag_field & 0x1FFF
    more_frags = bool(frag_field & 0x2000)
    ip_payload_len = min(total_len, len(raw) - off) - ihl
    if ip_payload_len < 0:
        return SkipReason.TRUNCATED

    if frag_offset > 0:
        if frag_cache is None:
            return SkipReason.FRAGMENT
        ip_id = (raw[off + 4] << 8) | raw[off + 5]
        ports = frag_cache.get((src, dst, proto, ip_id))
        if ports is None:
            return SkipReason.FRAGMENT
        if proto not in (TCP, UDP):
            return SkipReason.NON_TCP_UDP
        five = FiveTuple(src, ports[0], dst, ports[1], proto)
        return PacketRecord(ts=ts, five_tuple=five, payload_len=ip_payload_len)

    rec = _parse_transport(raw, off + ihl, ip_payload_len, proto, src, dst, ts)
    if more_frags and isinstance(rec, PacketRecord) and frag_cache is not None:
        ip_id = (raw[off + 4] << 8) | raw[off + 5]
        frag_cache.put(
            (src, dst, proto, ip_id),
            (rec.five_tuple.src_port, rec.five_tuple.dst_port),
        )
    return rec


def _parse_ipv6(raw: bytes, off: int, ts: float) -> PacketRecord | SkipReason:
    if len(raw) < off + 40:
        return SkipReason.TRUNCATED
    payload_len = (raw[off + 4] << 8) | raw[off + 5]
    proto = raw[off + 6]
    src = socket.inet_ntop(socket.AF_INET6, raw[off + 8 : off + 24])
    dst = socket.inet_ntop(socket.AF_INET6, raw[off + 24 : off + 40])
    avail = min(payload_len, len(raw) - off - 40)
    return _parse_transport(raw, off + 40, avail, proto, src, dst, ts)


def _parse_transport(
    raw: bytes, off: int, ip_payload_len: int, proto: int, src: str, dst: str, ts: float
) -> PacketRecord | SkipReason:
    if proto == UDP:
        if ip_payload_len < 8 or len(raw) < off + 8:
            return SkipReason.TRUNCATED
        sport = (raw[off] << 8) | raw[off + 1]
        dport = (raw[off + 2] << 8) | raw[off + 3]
        return PacketRecord(
            ts=ts,
            five_tuple=FiveTuple(src, sport, dst, dport, UDP),
            payload_len=ip_payload_len - 8,
        )
    if proto == TCP:
        if ip_payload_len < 20 or len(raw) < off + 20:
            return SkipReason.TRUNCATED
        sport, dport, seq, ack = struct.unpack_from("!HHII", raw, off)
        data_off = (raw[off + 12] >> 4) * 4
        if data_off < 20 or ip_payload_len < data_off:
            return SkipReason.TRUNCATED
        flags = raw[off + 13]
        payload_len = ip_payload_len - data_off
        return PacketRecord(
            ts=ts,
            five_tuple=FiveTuple(src, sport, dst, dport, TCP),
            payload_len=payload_len,
            tcp_meta=TcpMeta(seq=seq, ack=ack, flags=flags, header_len=data_off),
            payload=raw[off + data_off : off + data_off + payload_len] if payload_len else None,
        )
    return SkipReason.NON_TCP_UDP


@dataclass
class CaptureStats:
    packets: int = 0
    skipped: int = 0
    skip_reasons: dict = field(default_factory=dict)


def read_capture(
    source: CaptureSource | str,
    stats: Optional[CaptureStats] = None,
) -> Iterator[PacketRecord]:
    """Stream PacketRecords from a PCAP file, skipping non-IP/non-TCP-UDP frames."""
    if isinstance(source, str):
        source = CaptureSource(origin=source)
    with open(source.origin, "rb") as fh:
        yield from read_capture_fh(fh, stats)


def read_capture_fh(fh: BinaryIO, stats: Optional[CaptureStats] = None) -> Iterator[PacketRecord]:
    header = pcap.read_header(fh)
    if header.link_type not in (pcap.LINKTYPE_ETHERNET, pcap.LINKTYPE_RAW_IP):
        raise MalformedHeader("unsupported link type %d" % header.link_type)
    frag_cache = _FragCache()
    link = header.link_type
    for ts, raw, orig_len in pcap.read_records(fh, header):
        rec = parse_packet(raw, link, ts, frag_cache)
        if isinstance(rec, PacketRecord):
            if stats is not None:
                stats.packets += 1
            yield rec
        elif stats is not None:
            stats.skipped += 1
            stats.skip_reasons[rec.value] = stats.skip_reasons.get(rec.value, 0) + 1
