"""TCP session windows and the eleven per-window TCP features.

A flow is cut into windows on idle gaps, on a maximum duration, and after the
connection finishes (FIN both ways or RST).  Upload means initiator to
responder, as decided by :func:`~c2traffic.ingest.track_tcp`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dns_features import DEFAULT_PORT_WEIGHTS, port_abnormal
from .errors import EmptyWindow
from .features import FeatureTable
from .ingest.tcpflow import FlowKey, TcpSegmentEvent, track_tcp
from .ingest.types import PacketRecord
from .intel import UNKNOWN_REGION, IntelMaps, alexa_score, region_code, vt_score

DEFAULT_MAX_DURATION = 60.0
DEFAULT_IDLE_TIMEOUT = 15.0
TCP_SERVER_PORTS = frozenset({80, 443})

CONNECT_STATES = ("established", "closed", "syn_sent", "time_wait", "syn_received")


@dataclass
class TcpSessionWindow:
    flow_key: FlowKey
    index: int
    start_ts: float
    end_ts: float = 0.0
    packets_all: int = 0
    packets_out_of_order: int = 0
    packets_retransmission: int = 0
    upload_pkts: int = 0
    download_pkts: int = 0
    upload_bytes: int = 0
    download_bytes: int = 0
    syn: bool = False
    syn_ack: bool = False
    handshake_ack: bool = False
    fin_up: bool = False
    fin_down: bool = False
    rst: bool = False
    events: list[TcpSegmentEvent] = field(default_factory=list, repr=False)

    @property
    def server_ip(self) -> str:
        return self.flow_key.server_ip

    @property
    def server_port(self) -> int:
        return self.flow_key.server_port

    @property
    def finished(self) -> bool:
        return self.rst or (self.fin_up and self.fin_down)

    def add(self, ev: TcpSegmentEvent) -> None:
        rec = ev.record
        self.events.append(ev)
        self.end_ts = rec.ts
        self.packets_all += 1
        self.packets_retransmission += ev.is_retransmission
        self.packets_out_of_order += ev.is_out_of_order
        if ev.upload:
            self.upload_pkts += 1
            self.upload_bytes += rec.payload_len
        else:
            self.download_pkts += 1
            self.download_bytes += rec.payload_len
        syn, ack = rec.has_flag("SYN"), rec.has_flag("ACK")
        if syn and not ack:
            self.syn = True
        elif syn and ack:
            self.syn_ack = True
        elif ack and self.syn_ack and ev.upload:
            self.handshake_ack = True
        if rec.has_flag("FIN"):
            if ev.upload:
                self.fin_up = True
            else:
                self.fin_down = True
        if rec.has_flag("RST"):
            self.rst = True


def sessionize(events: Iterable[TcpSegmentEvent], max_duration: float = DEFAULT_MAX_DURATION,
               idle_timeout: float = DEFAULT_IDLE_TIMEOUT) -> list[TcpSessionWindow]:
    """Cut per-flow event streams into session windows.

    A window is closed before a segment that arrives more than
    ``idle_timeout`` after the previous one, more than ``max_duration`` after
    the window start, or (unless it is a bare ACK) after the connection
    finished.  An RST closes the window immediately.  Output is ordered by
    (flow_key, start_ts).
    """
    if not (max_duration > 0 and idle_timeout > 0):
        raise ValueError("max_duration and idle_timeout must be positive")
    open_: dict[FlowKey, TcpSessionWindow] = {}
    counts: dict[FlowKey, int] = {}
    done: list[TcpSessionWindow] = []
    for ev in events:
        key, ts = ev.flow_key, ev.record.ts
        win = open_.get(key)
        if win is not None and (ts - win.end_ts > idle_timeout
                                or ts - win.start_ts > max_duration
                                or (win.finished and not ev.record.is_pure_ack)):
            done.append(open_.pop(key))
            win = None
        if win is None:
            idx = counts.get(key, 0)
            counts[key] = idx + 1
            win = open_[key] = TcpSessionWindow(key, idx, ts)
        win.add(ev)
        if ev.record.has_flag("RST"):
            done.append(open_.pop(key))
    done.extend(open_.values())
    done.sort(key=lambda w: (w.flow_key, w.start_ts, w.index))
    return done


def bad_rate(window: TcpSessionWindow) -> float:
    if window.packets_all == 0:
        raise EmptyWindow("session window has no packets")
    return (window.packets_out_of_order + window.packets_retransmission) / window.packets_all


def connect_state(window: TcpSessionWindow) -> str:
    if window.rst or (window.fin_up and window.fin_down):
        return "closed"
    if window.fin_up or window.fin_down:
        return "time_wait"
    if window.syn and not window.syn_ack:
        return "syn_sent"
    if window.syn_ack and not window.handshake_ack:
        return "syn_received"
    return "established"


def build_domain_map(records: Iterable[PacketRecord]) -> dict[str, str]:
    """Address -> queried name, from DNS answers; the latest answer wins."""
    out: dict[str, str] = {}
    for rec in records:
        if rec.dns is not None and rec.dns.is_response:
            for addr in rec.dns.addrs:
                out[addr] = rec.dns.qname
    return out


def tcp_columns(regions: Sequence[str]) -> list[str]:
    return (["Alexa_score", "VT_score"]
            + [f"Local_abnormal={r}" for r in regions]
            + ["Duration_T", "Bad_rate", "Upload_num", "Upload_load", "Upload_numRate",
               "Upload_loadRate", "Port_abnormal"]
            + [f"TCP_connectState={s}" for s in CONNECT_STATES])


def port_histories(windows: Sequence[TcpSessionWindow]) -> dict[int, list[int]]:
    """For each window (by position), the client ports of all windows between
    the same client and server IPs that started no later, in start order."""
    by_pair: dict[tuple[str, str], list[tuple[float, int, int]]] = {}
    for pos, w in enumerate(windows):
        by_pair.setdefault((w.flow_key.client_ip, w.server_ip), []).append(
            (w.start_ts, pos, w.flow_key.client_port))
    out: dict[int, list[int]] = {}
    for items in by_pair.values():
        items.sort()
        ports: list[int] = []
        for _, pos, port in items:
            if not ports or ports[-1] != port:
                ports.append(port)
            out[pos] = list(ports)
    return out


def build_tcp_vector(window: TcpSessionWindow, maps: IntelMaps, domain_map: Mapping[str, str],
                     regions: Sequence[str], client_ports: Sequence[int] | None = None,
                     weights: Sequence[float] = DEFAULT_PORT_WEIGHTS) -> list[float]:
    domain = domain_map.get(window.server_ip)
    region = region_code(maps, window.server_ip)
    if region not in regions:
        region = UNKNOWN_REGION
    total_bytes = window.upload_bytes + window.download_bytes
    ports = list(client_ports) if client_ports is not None else [window.flow_key.client_port]
    state = connect_state(window)
    values = [alexa_score(maps, domain), vt_score(maps, domain or window.server_ip)]
    values += [1.0 if r == region else 0.0 for r in regions]
    values += [window.end_ts - window.start_ts, bad_rate(window),
               float(window.upload_pkts), float(window.upload_bytes),
               window.upload_pkts / window.packets_all,
               window.upload_bytes / max(1, total_bytes),
               port_abnormal(ports, [window.server_port], weights, TCP_SERVER_PORTS)]
    values += [1.0 if s == state else 0.0 for s in CONNECT_STATES]
    return values


TCP_PROVENANCE = ["ts", "client_ip", "client_port", "server_ip", "server_port",
                  "window_index", "domain"]


def tcp_table(records: Sequence[PacketRecord], maps: IntelMaps,
              max_duration: float = DEFAULT_MAX_DURATION,
              idle_timeout: float = DEFAULT_IDLE_TIMEOUT,
              weights: Sequence[float] = DEFAULT_PORT_WEIGHTS) -> FeatureTable:
    """Track, sessionize and featurize TCP records (unlabelled table)."""
    records = list(records)
    regions = maps.regions()
    domain_map = build_domain_map(records)
    windows = sessionize(track_tcp(records), max_duration, idle_timeout)
    histories = port_histories(windows)
    cols = tcp_columns(regions)
    rows = [build_tcp_vector(w, maps, domain_map, regions, histories[i], weights)
            for i, w in enumerate(windows)]
    X = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    prov = [(f"{w.start_ts:.6f}", w.flow_key.client_ip, str(w.flow_key.client_port),
             w.server_ip, str(w.server_port), str(w.index), domain_map.get(w.server_ip, ""))
            for w in windows]
    return FeatureTable("tcp", cols, X, [None] * len(rows), list(TCP_PROVENANCE), prov)
