"""End-to-end analysis pipeline: capture -> flows -> sessions -> QoE."""

from __future__ import annotations

import itertools
from array import array
from dataclasses import dataclass, field
from typing import Optional

from .classify import (
    ClassifierCriteria,
    ROLE_COMBINED,
    ROLE_DOWN_VIDEO,
    ROLE_MGMT,
    ROLE_UNCLASSIFIED,
    classify_flow,
)
from .codebook import ServiceCodebook, default_codebooks, match_setup_signature
from .detector import STATE_ENDED, ServerRegistration, SessionDetector, SessionRecord
from .flows import FlowKey, FlowTable
from .packets import TCP, UDP, CaptureStats, Direction, read_capture
from .qoe import (
    WARMUP_INTERVALS,
    FrameRateTracker,
    LatencyTracker,
    QoeSample,
    ResolutionTable,
    fps_band,
)
from .tls import SniReassembler

PEAK_WINDOW_INTERVALS = 10


@dataclass
class AnalysisReport:
    sessions: list[SessionRecord] = field(default_factory=list)
    qoe: dict[str, list[QoeSample]] = field(default_factory=dict)
    signature_matches: list[dict] = field(default_factory=list)
    counters: dict = field(default_factory=dict)


class Analyzer:
    """Single-capture pipeline; one instance per input file."""

    def __init__(
        self,
        codebooks: Optional[list[ServiceCodebook]] = None,
        criteria: Optional[ClassifierCriteria] = None,
        client_nets: tuple = (),
        interval: float = 1.0,
        resolution_table: Optional[ResolutionTable] = None,
    ):
        if codebooks is None:
            codebooks, crit_dict = default_codebooks()
            if criteria is None and crit_dict:
                criteria = ClassifierCriteria.from_dict(crit_dict)
        self.codebooks = codebooks
        self.criteria = criteria or ClassifierCriteria()
        self.table = FlowTable(client_nets=client_nets, interval=interval)
        self.detector = SessionDetector(codebooks)
        self.resolution_table = resolution_table or ResolutionTable()
        self.mgmt_ports = {p for cb in codebooks for p in cb.mgmt_ports}
        # per-flow side state
        self._reassemblers: dict[FlowKey, SniReassembler] = {}
        self._latency: dict[FlowKey, LatencyTracker] = {}
        self._udp_store: dict[FlowKey, tuple[array, array, bytearray]] = {}
        self._sig_done: set[FlowKey] = set()
        self._sig_match: dict[FlowKey, tuple[str, str]] = {}

    # -- streaming ----------------------------------------------------

    def analyze_file(self, path: str) -> AnalysisReport:
        stats = CaptureStats()
        for pkt in read_capture(path, stats):
            self._feed(pkt)
        return self._finalize(stats)

    def _feed(self, pkt) -> None:
        flow = self.table.update(pkt)
        key = flow.key
        if key.proto == UDP:
            store = self._udp_store.get(key)
            if store is None:
                store = (array("d"), array("l"), bytearray())
                self._udp_store[key] = store
            store[0].append(pkt.ts)
            store[1].append(pkt.payload_len)
            store[2].append(1 if pkt.direction is Direction.UPSTREAM else 0)
            return

        tracker = self._latency.get(key)
        if tracker is not None:
            tracker.feed(pkt)
        if pkt.payload_len == 0:
            return

        if flow.sni is None and pkt.direction is Direction.UPSTREAM:
            reasm = self._reassemblers.get(key)
            if reasm is None and key not in self._sig_done:
                reasm = SniReassembler()
                self._reassemblers[key] = reasm
            if reasm is not None and not reasm.done:
                if pkt.payload is not None:
                    name = reasm.feed(pkt.payload)
                    if name:
                        self._on_sni(flow, name, pkt)
                if reasm.done:
                    del self._reassemblers[key]

        if (
            key.server_port in self.mgmt_ports
            and key not in self._sig_match
            and key not in self._sig_done
        ):
            self._try_signature(flow, pkt.ts)

    def _on_sni(self, flow, name: str, pkt) -> None:
        flow.sni = name
        key = flow.key
        self.detector.observe_service_name(key, name, pkt.ts)
        self.detector.evaluate_codebook(key.client_ip, pkt.ts)
        if key.server_port in self.mgmt_ports:
            reg = self.detector.register_gameplay_server(name, key, pkt.ts)
            if reg is not None and key not in self._latency:
                tracker = LatencyTracker()
                self._latency[key] = tracker
                tracker.feed(pkt)  # the registering packet starts a pending pair

    def _try_signature(self, flow, ts: float) -> None:
        key = flow.key
        up = flow.first_payload_sizes_up
        down = flow.first_payload_sizes_down
        for cb in self.codebooks:
            hit = match_setup_signature(cb.signatures, up, down, key.server_port, cb.mgmt_ports)
            if hit is not None:
                os_name, setup_class = hit
                self._sig_match[key] = hit
                self._sig_done.add(key)
                if key not in self.detector.registrations:
                    self.detector.register_by_signature(key, ts, cb.platform_id, setup_class)
                if key not in self._latency:
                    self._latency[key] = LatencyTracker()
                return
        if len(down) >= 4 and len(up) >= 4:
            self._sig_done.add(key)  # no signature will ever prefix-match now

    # -- finalization -------------------------------------------------

    def _finalize(self, stats: CaptureStats) -> AnalysisReport:
        report = AnalysisReport()
        now = self.table.now
        fallback_ids = itertools.count(1)
        unclassified = 0

        for key, reg in self.detector.registrations.items():
            session = reg.session
            if session is None:
                session = SessionRecord(
                    session_id="u%d" % next(fallback_ids),
                    client_ip=reg.client_ip,
                    platform_id=reg.platform_id,
                    setup=reg.setup_class if reg.via_signature else "unknown",
                    detected_at=reg.registered_at,
                    gameplay_server_ip=reg.server_ip,
                    gameplay_started_at=reg.registered_at,
                )
                self.detector.sessions.append(session)
            hit = self._sig_match.get(key)
            if hit is not None:
                session.os_hint = hit[0]
            session.gameplay_flows.append((key, ROLE_MGMT))
            video_flow = None
            for flow in self.table.flows.values():
                if flow.key.proto != UDP or flow.key.server_ip != reg.server_ip:
                    continue
                windows = self.table.window_series(flow)[:3]
                role = classify_flow(flow, windows, reg, self.criteria)
                if role == ROLE_UNCLASSIFIED:
                    if not (
                        reg.registered_at
                        <= flow.first_ts
                        <= reg.registered_at + self.criteria.mgmt_window_s
                    ):
                        continue  # unrelated to this gameplay start
                    unclassified += 1
                session.gameplay_flows.append((flow.key, role))
                if role in (ROLE_DOWN_VIDEO, ROLE_COMBINED):
                    video_flow = flow
            report.qoe[session.session_id] = self._session_qoe(key, video_flow)

        for session in self.detector.sessions:
            session.state = STATE_ENDED
            if session.ended_at is None:
                session.ended_at = now
            report.sessions.append(session)

        for key, (os_name, setup_class) in self._sig_match.items():
            report.signature_matches.append(
                {
                    "client_ip": key.client_ip,
                    "server_ip": key.server_ip,
                    "server_port": key.server_port,
                    "os": os_name,
                    "setup_class": setup_class,
                }
            )

        report.counters = {
            "packets": stats.packets,
            "skipped": stats.skipped,
            "skip_reasons": dict(stats.skip_reasons),
            "orientation_warnings": self.table.orientation_warnings,
            "flow_evictions": self.table.evictions,
            "unclassified_flows": unclassified,
            "negative_latency_discarded": sum(
                t.negative_discarded for t in self._latency.values()
            ),
        }
        return report

    def _session_qoe(self, mgmt_key: FlowKey, video_flow) -> list[QoeSample]:
        if video_flow is None:
            return []
        store = self._udp_store.get(video_flow.key)
        if store is None:
            return []
        ts_arr, size_arr, dir_arr = store
        tracker = FrameRateTracker()
        fps_samples = []
        t0 = None
        interval_bytes: dict[int, int] = {}
        for ts, size, d in zip(ts_arr, size_arr, dir_arr):
            if d:  # upstream never feeds the frame detector
                continue
            if t0 is None:
                t0 = ts
            interval_bytes[int((ts - t0) / tracker.interval_s)] = (
                interval_bytes.get(int((ts - t0) / tracker.interval_s), 0) + size
            )
            fps_samples.extend(tracker.feed(size, ts))
        if t0 is None:
            return []

        latency_buckets: dict[int, list[float]] = {}
        lat = self._latency.get(mgmt_key)
        if lat is not None:
            for sample in lat.samples:
                idx = int((sample.ts - t0) // 1.0)
                latency_buckets.setdefault(idx, []).append(sample.latency_ms)

        samples = []
        for k, fs in enumerate(fps_samples):
            bits = interval_bytes.get(k, 0) * 8
            peak = max(
                interval_bytes.get(j, 0) * 8
                for j in range(max(0, k - PEAK_WINDOW_INTERVALS + 1), k + 1)
            )
            lat_vals = latency_buckets.get(k)
            samples.append(
                QoeSample(
                    ts=fs.interval_start,
                    latency_ms=sum(lat_vals) / len(lat_vals) if lat_vals else None,
                    fps=fs.fps,
                    fps_band=fps_band(fs.fps),
                    bitrate_mbps=bits / 1e6,
                    resolution=self.resolution_table.infer(fs.fps, peak),
                    warmup=k < WARMUP_INTERVALS,
                )
            )
        return samples
