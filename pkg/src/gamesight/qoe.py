"""Per-session QoE estimation: client-platform latency, video frame rate
from payload-size patterns, and resolution band from peak bitrate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .packets import Direction, PacketRecord

U32 = 1 << 32

FPS_LOW = "low"
FPS_MEDIUM = "medium"
FPS_HIGH = "high"

RES_FHD = "fhd"
RES_HD = "hd"
RES_SD = "sd"
RES_UNKNOWN = "unknown"

PENDING_EXPIRY_S = 4.0  # two heartbeat periods
PEAK_WINDOW_S = 10
ACTIVITY_FLOOR_BPS = 2_000_000.0
WARMUP_INTERVALS = 2


@dataclass(slots=True)
class LatencySample:
    ts: float  # downstream arrival time
    latency_ms: float


class LatencyTracker:
    """Pairs upstream management packets with their acknowledging
    downstream packets via expected ack = seq + payload (u32 wrapping)."""

    def __init__(self, expiry_s: float = PENDING_EXPIRY_S):
        self.expiry_s = expiry_s
        self.pending: dict[int, float] = {}
        self.samples: list[LatencySample] = []
        self.negative_discarded = 0

    def feed(self, pkt: PacketRecord) -> Optional[LatencySample]:
        meta = pkt.tcp_meta
        if meta is None or pkt.direction is None:
            return None
        if pkt.direction is Direction.UPSTREAM:
            if pkt.payload_len > 0:  # pure ACKs are never registered
                self.pending[(meta.seq + pkt.payload_len) % U32] = pkt.ts
                self._expire(pkt.ts)
            return None
        t_up = self.pending.pop(meta.ack, None)
        if t_up is None:
            return None
        delta = pkt.ts - t_up
        if delta < 0:
            self.negative_discarded += 1
            return None
        sample = LatencySample(ts=pkt.ts, latency_ms=delta * 1000.0)
        self.samples.append(sample)
        return sample

    def _expire(self, now: float) -> None:
        if len(self.pending) > 8:
            horizon = now - self.expiry_s
            for ack in [a for a, t in self.pending.items() if t < horizon]:
                del self.pending[ack]


@dataclass(slots=True)
class FpsSample:
    interval_start: float
    fps: float


class FrameRateTracker:
    """Frame counting from the payload-size pattern of a video flow.

    A growing running maximum identifies full-size data packets; a drop
    below (max - margin) right after a full-size packet marks the end of
    one frame. Fps is emitted per elapsed interval; empty intervals yield
    zero. The interval origin advances by whole intervals so that rates
    are per-interval rather than cumulative.
    """

    def __init__(self, interval_s: float = 1.0, size_margin: int = 1):
        self.interval_s = interval_s
        self.size_margin = size_margin
        self.frame_count = 0
        self.t_start: Optional[float] = None
        self.size_max = 0
        self.flag_max = False

    def feed(self, payload_len: int, ts: float) -> list[FpsSample]:
        out: list[FpsSample] = []
        if self.t_start is None:
            self.t_start = ts
            self.size_max = payload_len
        while ts > self.t_start + self.interval_s:
            out.append(FpsSample(self.t_start, self.frame_count / self.interval_s))
            self.frame_count = 0
            self.t_start += self.interval_s
        if payload_len > self.size_max:
            self.size_max = payload_len
            return out
        if payload_len < self.size_max - self.size_margin:
            if self.flag_max:
                self.frame_count += 1
                self.flag_max = False
            return out
        self.flag_max = True
        return out


def fps_band(fps: float) -> str:
    if fps < 40:
        return FPS_LOW
    if fps <= 50:
        return FPS_MEDIUM
    return FPS_HIGH


@dataclass
class ResolutionTable:
    """Band edges (bps) per nominal frame rate row.

    Edges between adjacent bands sit at the midpoint of the gap between
    the observed peak-bandwidth ranges of the two bands.
    """

    edges_60: tuple[float, float] = (13_000_000.0, 22_000_000.0)  # sd<=, hd<=, fhd>
    edges_30: tuple[float, float] = (8_000_000.0, 14_000_000.0)
    nominal_fps_split: float = 45.0
    activity_floor_bps: float = ACTIVITY_FLOOR_BPS

    def __post_init__(self):
        for lo, hi in (self.edges_60, self.edges_30):
            if not lo < hi:
                raise ValueError("band edges must be strictly increasing")

    def infer(self, fps: float, peak_bitrate_bps: float) -> str:
        if peak_bitrate_bps < self.activity_floor_bps:
            return RES_UNKNOWN
        lo, hi = self.edges_60 if fps > self.nominal_fps_split else self.edges_30
        if peak_bitrate_bps <= lo:
            return RES_SD
        if peak_bitrate_bps <= hi:
            return RES_HD
        return RES_FHD


def infer_resolution(table: ResolutionTable, fps: float, peak_bitrate_bps: float) -> str:
    return table.infer(fps, peak_bitrate_bps)


@dataclass(slots=True)
class QoeSample:
    ts: float
    latency_ms: Optional[float]
    fps: Optional[float]
    fps_band: Optional[str]
    bitrate_mbps: float
    resolution: str
    warmup: bool = False


@dataclass
class QoeSeries:
    session_id: str
    samples: list[QoeSample] = field(default_factory=list)
