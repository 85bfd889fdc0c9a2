"""DNS window grouping and the ten per-group DNS features.

Records are grouped into tumbling windows of ``W`` seconds keyed by
``(floor(ts / W), client_ip, qname)``.  The client is the query sender, so a
query and its response land in the same group.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .features import FeatureTable
from .ingest.types import RTYPES, PacketRecord
from .intel import UNKNOWN_REGION, IntelMaps, alexa_score, region_code, vt_score

DEFAULT_WINDOW = 60.0
DEFAULT_PORT_WEIGHTS = (1.0, 1.0, 1.0)
DNS_SERVER_PORTS = frozenset({53})
JUMP_DELTA = 10000

FLAG_NO_RESPONSES = "no_responses"
FLAG_NO_QUERIES = "no_queries"


@dataclass
class DnsWindowGroup:
    window_index: int
    src_ip: str
    qname: str
    W: float
    queries: list[PacketRecord] = field(default_factory=list)
    responses: list[PacketRecord] = field(default_factory=list)

    @property
    def qname_len(self) -> int:
        return len(self.qname)

    @property
    def key(self) -> tuple[int, str, str]:
        return (self.window_index, self.src_ip, self.qname)

    def records(self) -> list[PacketRecord]:
        return sorted(self.queries + self.responses, key=lambda r: r.ts)


def client_ip(rec: PacketRecord) -> str:
    return rec.dst_ip if rec.dns.is_response else rec.src_ip


def window_dns(records: Iterable[PacketRecord], W: float = DEFAULT_WINDOW) -> list[DnsWindowGroup]:
    """Partition DNS-bearing records into window groups, canonically ordered."""
    if not W > 0:
        raise ValueError("window length must be positive")
    groups: dict[tuple[int, str, str], DnsWindowGroup] = {}
    for rec in records:
        if rec.dns is None:
            continue
        key = (math.floor(rec.ts / W), client_ip(rec), rec.dns.qname)
        grp = groups.get(key)
        if grp is None:
            grp = groups[key] = DnsWindowGroup(key[0], key[1], key[2], W)
        (grp.responses if rec.dns.is_response else grp.queries).append(rec)
    return [groups[k] for k in sorted(groups)]


def c2load_fluct(group: DnsWindowGroup) -> float:
    """Mean response body size per character of the queried name; 0 without responses."""
    if not group.responses:
        return 0.0
    mu = sum(r.dns.answer_payload_len for r in group.responses) / len(group.responses)
    return mu / group.qname_len


def ask_res_rate(group: DnsWindowGroup) -> float:
    return len(group.queries) / max(1, len(group.responses))


def _incrementing(ports: Sequence[int]) -> bool:
    run = 1
    stride = None
    for a, b in zip(ports, ports[1:]):
        d = b - a
        if d > 0 and d == stride:
            run += 1
        elif d > 0:
            run, stride = 2, d
        else:
            run, stride = 1, None
        if run >= 3:
            return True
    return False


def _jumping(ports: Sequence[int]) -> bool:
    return sum(abs(b - a) > JUMP_DELTA for a, b in zip(ports, ports[1:])) >= 2


def port_flags(source_ports: Sequence[int], server_ports: Iterable[int],
               conventional: frozenset[int] = DNS_SERVER_PORTS) -> tuple[int, int, int]:
    """(increment, jump, unconventional) indicators for a port history."""
    return (int(_incrementing(source_ports)), int(_jumping(source_ports)),
            int(any(p not in conventional for p in server_ports)))


def port_abnormal(source_ports: Sequence[int], server_ports: Iterable[int],
                  weights: Sequence[float] = DEFAULT_PORT_WEIGHTS,
                  conventional: frozenset[int] = DNS_SERVER_PORTS) -> float:
    """Weighted sum of the increment, jump and unconventional-port indicators."""
    if len(weights) != 3 or any(w < 0 for w in weights):
        raise ValueError("port weights must be three non-negative numbers")
    flags = port_flags(source_ports, server_ports, conventional)
    return float(sum(w * p for w, p in zip(weights, flags)))


def group_ports(group: DnsWindowGroup) -> tuple[list[int], list[int]]:
    """Client source ports in time order and the server ports seen."""
    if group.queries:
        src = [r.src_port for r in sorted(group.queries, key=lambda r: r.ts)]
    else:
        src = [r.dst_port for r in sorted(group.responses, key=lambda r: r.ts)]
    server = [r.dst_port for r in group.queries] + [r.src_port for r in group.responses]
    return src, server


def modal_rtype(records: Sequence[PacketRecord]) -> str:
    counts = Counter(r.dns.rtype for r in records)
    best = max(counts.values())
    return next(t for t in RTYPES if counts.get(t) == best)


def dns_columns(regions: Sequence[str]) -> list[str]:
    return (["Alexa_score", "VT_score", "Port_abnormal"]
            + [f"Local_abnormal={r}" for r in regions]
            + ["C2Load_fluct", "Ask_Res_rate", "ClientLen_max", "C2Len_max", "TTL"]
            + [f"Response_type={t}" for t in RTYPES])


@dataclass(frozen=True)
class DnsFeatureVector:
    values: tuple[float, ...]
    provenance: tuple[int, str, str]
    flags: tuple[str, ...] = ()
    label: str | None = None


def build_dns_vector(group: DnsWindowGroup, maps: IntelMaps,
                     regions: Sequence[str] | None = None,
                     weights: Sequence[float] = DEFAULT_PORT_WEIGHTS) -> DnsFeatureVector:
    regions = list(regions) if regions is not None else maps.regions()
    flags = []
    if not group.responses:
        flags.append(FLAG_NO_RESPONSES)
    if not group.queries:
        flags.append(FLAG_NO_QUERIES)

    addrs = [a for r in group.responses for a in r.dns.addrs]
    # first resolved address with a known region; the region list comes from the maps
    region = next((c for c in (region_code(maps, a) for a in addrs) if c != UNKNOWN_REGION),
                  UNKNOWN_REGION)
    if region not in regions:
        region = UNKNOWN_REGION
    src_ports, server_ports = group_ports(group)

    resp = group.responses
    rtype = modal_rtype(resp if resp else group.queries)
    ttls = [r.dns.ttl for r in resp if r.dns.ttl is not None]

    values = [alexa_score(maps, group.qname), vt_score(maps, group.qname),
              port_abnormal(src_ports, server_ports, weights)]
    values += [1.0 if r == region else 0.0 for r in regions]
    values += [c2load_fluct(group), ask_res_rate(group),
               float(max((r.payload_len for r in group.queries), default=0)),
               float(max((r.payload_len for r in resp), default=0)),
               float(sum(ttls) / len(ttls)) if ttls else 0.0]
    values += [1.0 if t == rtype else 0.0 for t in RTYPES]
    return DnsFeatureVector(tuple(values), group.key, tuple(flags))


DNS_PROVENANCE = ["ts", "window_index", "src_ip", "qname", "flags"]


def dns_table(records: Iterable[PacketRecord], maps: IntelMaps, W: float = DEFAULT_WINDOW,
              weights: Sequence[float] = DEFAULT_PORT_WEIGHTS) -> FeatureTable:
    """Group records and build the DNS feature table (unlabelled)."""
    regions = maps.regions()
    groups = window_dns(records, W)
    vecs = [build_dns_vector(g, maps, regions, weights) for g in groups]
    cols = dns_columns(regions)
    X = np.array([v.values for v in vecs], dtype=float).reshape(len(vecs), len(cols))
    prov = [(f"{g.window_index * W:.6f}", str(g.window_index), g.src_ip, g.qname,
             ";".join(v.flags)) for g, v in zip(groups, vecs)]
    return FeatureTable("dns", cols, X, [None] * len(vecs), list(DNS_PROVENANCE), prov)
