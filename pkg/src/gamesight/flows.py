"""Bidirectional flow table with per-window volumetric statistics."""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .errors import NoSuchWindow
from .packets import TCP, TCP_SYN, Direction, PacketRecord

DEFAULT_IDLE_TIMEOUT = 60.0
DEFAULT_TABLE_CAP = 1_048_576
FIRST_PAYLOADS_CAP = 4  # longest handshake signature has 4 entries


@dataclass(frozen=True, slots=True)
class FlowKey:
    client_ip: str
    client_port: int
    server_ip: str
    server_port: int
    proto: int


@dataclass(slots=True)
class VolumetricStats:
    window_start: float
    interval: float
    pkt_count_in: int = 0
    pkt_count_out: int = 0
    byte_count_in: int = 0
    byte_count_out: int = 0

    @property
    def pps_in(self) -> float:
        return self.pkt_count_in / self.interval

    @property
    def pps_out(self) -> float:
        return self.pkt_count_out / self.interval

    @property
    def bps_in(self) -> float:
        return self.byte_count_in * 8 / self.interval

    @property
    def bps_out(self) -> float:
        return self.byte_count_out * 8 / self.interval


@dataclass(slots=True)
class FlowState:
    key: FlowKey
    first_ts: float
    last_ts: float
    # window index -> [pkts_in, pkts_out, bytes_in, bytes_out]
    windows: dict = field(default_factory=dict)
    first_payload_sizes_up: list = field(default_factory=list)
    first_payload_sizes_down: list = field(default_factory=list)
    sni: Optional[str] = None
    role: Optional[str] = None
    total_pkts: int = 0
    total_bytes: int = 0

    def window_indices(self, interval: float) -> range:
        return range(int(self.first_ts // interval), int(self.last_ts // interval) + 1)


class FlowTable:
    """Single-writer flow accumulator keyed by canonical five-tuple.

    Windows are aligned to multiples of `interval` in absolute capture
    time, so every flow's window grid lines up for cross-flow comparison.
    """

    def __init__(
        self,
        client_nets: Iterable[str] = (),
        interval: float = 1.0,
        cap: int = DEFAULT_TABLE_CAP,
    ):
        self.client_nets = [ipaddress.ip_network(n) for n in client_nets]
        self.interval = interval
        self.cap = cap
        self.flows: dict[FlowKey, FlowState] = {}
        self.now = 0.0
        self.orientation_warnings = 0
        self.evictions = 0
        self._client_cache: dict[str, bool] = {}

    # -- orientation ---------------------------------------------------

    def _is_client(self, ip: str) -> bool:
        hit = self._client_cache.get(ip)
        if hit is None:
            addr = ipaddress.ip_address(ip)
            hit = any(addr in net for net in self.client_nets)
            self._client_cache[ip] = hit
        return hit

    def canonical_key(self, pkt: PacketRecord) -> tuple[FlowKey, Direction]:
        """Same key for both directions; Upstream iff the source is client-side."""
        ft = pkt.five_tuple
        src_is_client = self._is_client(ft.src_ip)
        dst_is_client = self._is_client(ft.dst_ip)
        if src_is_client and not dst_is_client:
            up = True
        elif dst_is_client and not src_is_client:
            up = False
        else:
            # neither (or both) side in the configured nets: lower IP is
            # deemed the client so that the key stays involution-stable
            self.orientation_warnings += 1
            up = (ft.src_ip, ft.src_port) < (ft.dst_ip, ft.dst_port)
        if up:
            key = FlowKey(ft.src_ip, ft.src_port, ft.dst_ip, ft.dst_port, ft.proto)
            return key, Direction.UPSTREAM
        key = FlowKey(ft.dst_ip, ft.dst_port, ft.src_ip, ft.src_port, ft.proto)
        return key, Direction.DOWNSTREAM

    # -- updates -------------------------------------------------------

    def update(self, pkt: PacketRecord) -> FlowState:
        key, direction = self.canonical_key(pkt)
        pkt.direction = direction
        if pkt.ts > self.now:
            self.now = pkt.ts
        flow = self.flows.get(key)
        if flow is None:
            if len(self.flows) >= self.cap:
                self._evict_oldest()
            flow = FlowState(key=key, first_ts=pkt.ts, last_ts=pkt.ts)
            self.flows[key] = flow
        flow.last_ts = max(flow.last_ts, pkt.ts)
        flow.total_pkts += 1
        flow.total_bytes += pkt.payload_len

        idx = int(pkt.ts // self.interval)
        win = flow.windows.get(idx)
        if win is None:
            win = [0, 0, 0, 0]
            flow.windows[idx] = win
        if direction is Direction.DOWNSTREAM:
            win[0] += 1
            win[2] += pkt.payload_len
        else:
            win[1] += 1
            win[3] += pkt.payload_len

        if pkt.payload_len > 0 and not (
            pkt.tcp_meta is not None and pkt.tcp_meta.flags & TCP_SYN
        ):
            sizes = (
                flow.first_payload_sizes_up
                if direction is Direction.UPSTREAM
                else flow.first_payload_sizes_down
            )
            if len(sizes) < FIRST_PAYLOADS_CAP:
                sizes.append(pkt.payload_len)
        return flow

    def _evict_oldest(self) -> None:
        victim = min(self.flows.values(), key=lambda f: f.last_ts)
        del self.flows[victim.key]
        self.evictions += 1

    # -- window access -------------------------------------------------

    def _stats_at(self, flow: FlowState, idx: int) -> VolumetricStats:
        win = flow.windows.get(idx)
        stats = VolumetricStats(window_start=idx * self.interval, interval=self.interval)
        if win is not None:
            stats.pkt_count_in, stats.pkt_count_out = win[0], win[1]
            stats.byte_count_in, stats.byte_count_out = win[2], win[3]
        return stats

    def window_stats(self, flow: FlowState, window_end: float) -> VolumetricStats:
        """Closed window ending at `window_end`; partial windows never returned."""
        idx = int(round(window_end / self.interval)) - 1
        current = int(self.now // self.interval)
        if idx >= current:
            raise NoSuchWindow("window ending at %s not yet closed" % window_end)
        if idx < int(flow.first_ts // self.interval) or idx > int(flow.last_ts // self.interval):
            raise NoSuchWindow("window ending at %s outside flow lifetime" % window_end)
        return self._stats_at(flow, idx)

    def window_series(self, flow: FlowState, closed_only: bool = True) -> list[VolumetricStats]:
        """Gap-free window series over the flow's lifetime (zero windows included)."""
        current = int(self.now // self.interval)
        out = []
        for idx in flow.window_indices(self.interval):
            if closed_only and idx >= current:
                break
            out.append(self._stats_at(flow, idx))
        return out

    # -- expiry --------------------------------------------------------

    def expire_idle(self, now: float, idle_timeout: float = DEFAULT_IDLE_TIMEOUT) -> list[FlowState]:
        expired = [f for f in self.flows.values() if f.last_ts < now - idle_timeout]
        for f in expired:
            del self.flows[f.key]
        return expired
