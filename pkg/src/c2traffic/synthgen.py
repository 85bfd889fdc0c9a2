"""Seeded generator of labelled synthetic DNS and TCP traffic.

Each generated unit is built to hit feature-level targets: a DNS window group
is given a target response-load ratio (mean response body over name length)
and the response sizes are back-solved from it; a TCP session is given a
packet count and a bad-packet rate, and exactly that many retransmitted or
reordered segments are produced with consistent sequence numbers.

Class profiles
--------------
DNS ``DnsTunnel``
    long random subdomains, TXT answers with short TTLs, 5-15 queries per
    window, load ratio near 3 (most) or uniform in [1.6, 4].
DNS ``MaliciousDns``
    periodic A/AAAA beacons, load ratio in [4.6, 5.4] or [20.3, 22].
DNS ``Normal``
    mixed record types, half the TTLs short, 1-4 queries, 5 % of groups
    unanswered, load ratio log-uniform over [5.8, 120] with the [19, 23.5]
    band left out.
TCP ``Malicious``
    bad-packet rate clustered at 0.17 / 0.20 / 0.25, durations near 1, 3 or
    5 s, upload-heavy.
TCP ``Normal``
    mostly clean sessions (>= 90 % at rate <= 0.04), short durations.

Features that are not the defining signature (rtype, TTL, ports, upload
shape, duration) deliberately overlap between classes.
"""
from __future__ import annotations

import ipaddress
import math
import string
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InfeasibleProfile
from .ingest.dnswire import min_body_len
from .ingest.types import QUERY, RESPONSE, TCP, UDP, DnsMessage, PacketRecord

PAYLOAD_CAP = 4096
PAD_RR_MIN = 11          # smallest padding record the DNS encoder can emit
SHORT_TTL = (30, 900)
DNS_MIX = {"Normal": 310, "MaliciousDns": 3, "DnsTunnel": 2}
TCP_MIX = {"Normal": 50, "Malicious": 1}

_ALNUM = string.ascii_lowercase + string.digits
_WORDS = ("mail", "cdn", "api", "static", "img", "login", "news", "shop", "video", "docs",
          "update", "cloud", "web", "app", "media", "data", "files", "portal", "search", "m")
_TLDS = ("com", "net", "org", "io", "cn", "de", "info")


@dataclass(frozen=True)
class DnsProfile:
    label: str
    ratio_modes: tuple                  # ((weight, kind, a, b), ...) kind in normal/uniform/loguniform
    ratio_exclude: tuple = ()           # (lo, hi) bands to redraw out of
    qname_len: tuple = (12, 30)
    queries: tuple = (1, 4)
    answer_prob: float = 0.97
    rtypes: dict = field(default_factory=dict)
    ttl: tuple = (30, 86400)
    short_ttl: float = 0.0              # share of groups with a TTL in SHORT_TTL instead
    unanswered: float = 0.0             # share of groups that get no response at all
    periodic: bool = False
    periods: tuple = (10, 15, 20, 30)
    increment_prob: float = 0.0
    query_pad_prob: float = 0.5


@dataclass(frozen=True)
class TcpProfile:
    label: str
    bad_centers: tuple = ()             # malicious rate clusters
    bad_jitter: float = 0.005
    clean_share: float = 0.8            # normal: fraction with zero bad packets
    low_share: float = 0.12             # normal: fraction with rate in (0, 0.04]
    packets: tuple = (4, 60)
    duration: tuple = ("exp", 1.2)
    upload_heavy: float = 0.15
    states: dict = field(default_factory=dict)
    server_ports: dict = field(default_factory=dict)
    increment_prob: float = 0.0


TUNNEL = DnsProfile(
    "DnsTunnel", ((0.6, "normal", 3.0, 0.12), (0.4, "uniform", 1.6, 4.0)),
    qname_len=(36, 90), queries=(5, 15), answer_prob=1.0,
    rtypes={"TXT": 0.85, "CNAME": 0.1, "NULL": 0.0, "MX": 0.05}, ttl=(0, 5))
MALICIOUS_DNS = DnsProfile(
    "MaliciousDns", ((0.7, "uniform", 4.6, 5.4), (0.3, "uniform", 20.3, 22.0)),
    queries=(2, 6), answer_prob=1.0, rtypes={"A": 0.8, "AAAA": 0.2}, ttl=(60, 600),
    periodic=True, increment_prob=0.4)
NORMAL_DNS = DnsProfile(
    "Normal", ((1.0, "loguniform", 5.8, 120.0),), ratio_exclude=((19.0, 23.5),),
    rtypes={"A": 0.55, "AAAA": 0.12, "CNAME": 0.1, "MX": 0.05, "TXT": 0.08, "NS": 0.03,
            "SOA": 0.02, "PTR": 0.02, "SRV": 0.02, "OTHER": 0.01},
    ttl=(0, 86400), short_ttl=0.5, unanswered=0.05, increment_prob=0.1)

MALICIOUS_TCP = TcpProfile(
    "Malicious", bad_centers=(0.17, 0.20, 0.25), packets=(30, 80), duration=("peaks", 1, 3, 5),
    upload_heavy=0.9, states={"established": 0.3, "closed": 0.5, "time_wait": 0.2},
    server_ports={443: 0.5, 8443: 0.2, 4444: 0.15, 8080: 0.15}, increment_prob=0.6)
NORMAL_TCP = TcpProfile(
    "Normal", packets=(4, 60), duration=("exp", 1.2), upload_heavy=0.15,
    states={"closed": 0.7, "established": 0.15, "time_wait": 0.08, "syn_sent": 0.04,
            "syn_received": 0.03},
    server_ports={443: 0.6, 80: 0.3, 8080: 0.05, 8443: 0.05}, increment_prob=0.2)

DNS_PROFILES = {p.label: p for p in (NORMAL_DNS, MALICIOUS_DNS, TUNNEL)}
TCP_PROFILES = {p.label: p for p in (NORMAL_TCP, MALICIOUS_TCP)}


@dataclass
class Generated:
    records: list[PacketRecord]
    label_columns: list[str]
    labels: list[tuple[tuple[str, ...], str]]


def class_counts(n: int, mix: dict) -> dict:
    """Split ``n`` units by ``mix`` weights (largest remainder, minorities >= 1 when n allows)."""
    total = sum(mix.values())
    raw = {k: n * v / total for k, v in mix.items()}
    out = {k: math.floor(v) for k, v in raw.items()}
    rest = n - sum(out.values())
    for k in sorted(raw, key=lambda k: (-(raw[k] - out[k]), k))[:rest]:
        out[k] += 1
    return out


def _choice(rng, table: dict):
    keys = list(table)
    p = np.array([table[k] for k in keys], dtype=float)
    return keys[int(rng.choice(len(keys), p=p / p.sum()))]


def _draw_ratio(rng, profile: DnsProfile) -> float:
    weights = [m[0] for m in profile.ratio_modes]
    for _ in range(1000):
        w, kind, a, b = profile.ratio_modes[int(rng.choice(len(weights),
                                                           p=np.array(weights) / sum(weights)))]
        if kind == "normal":
            r = rng.normal(a, b)
        elif kind == "uniform":
            r = rng.uniform(a, b)
        else:
            r = math.exp(rng.uniform(math.log(a), math.log(b)))
        if r > 0 and not any(lo <= r <= hi for lo, hi in profile.ratio_exclude):
            return float(r)
    raise InfeasibleProfile(f"{profile.label}: cannot draw a load ratio")


def _label(rng, n: int) -> str:
    return "".join(_ALNUM[int(i)] for i in rng.integers(0, len(_ALNUM), size=n))


def _qname(rng, length: int, tunnel: bool) -> str:
    """A plausible name of exactly ``length`` characters."""
    if tunnel:
        base = f"{_label(rng, 5)}.{_TLDS[int(rng.integers(len(_TLDS)))]}"
        room = length - len(base) - 1
        parts = []
        while room > 0:
            n = min(room, int(rng.integers(8, 40)), 63)
            if room - n == 1:
                n -= 1
            parts.append(_label(rng, n))
            room -= n + 1
        return ".".join(parts + [base])
    tld = _TLDS[int(rng.integers(len(_TLDS)))]
    head = _WORDS[int(rng.integers(len(_WORDS)))]
    mid_len = length - len(head) - len(tld) - 2
    if mid_len < 1:
        return _label(rng, length - len(tld) - 1) + "." + tld
    return f"{head}.{_label(rng, mid_len)}.{tld}"


def _rand_ip(rng, prefix: str) -> str:
    a, b = (int(v) for v in rng.integers(1, 255, size=2))
    return f"{prefix}.{a}.{b}"


def _addrs(rng, rtype: str) -> tuple[str, ...]:
    n = int(rng.integers(1, 3))
    if rtype == "A":
        return tuple(str(ipaddress.IPv4Address(int(rng.integers(0x0B000000, 0xDF000000))))
                     for _ in range(n))
    if rtype == "AAAA":
        return tuple(str(ipaddress.IPv6Address((0x2001 << 112) | int(rng.integers(1, 2**62))))
                     for _ in range(n))
    return ()


def _feasible_body(msg: DnsMessage, target: int) -> int:
    """Nearest body size >= the message minimum that the encoder can pad to."""
    lo = min_body_len(msg)
    if target > PAYLOAD_CAP:
        raise InfeasibleProfile(f"body {target} exceeds payload cap {PAYLOAD_CAP}")
    if target < lo:
        raise InfeasibleProfile(f"body {target} below minimum {lo} for {msg.qname}")
    extra = target - lo
    txt_answer = msg.rtype == "TXT" and msg.ttl is not None
    if 0 < extra < PAD_RR_MIN and not txt_answer:
        return lo if extra < PAD_RR_MIN / 2 else lo + PAD_RR_MIN
    return target


def _split_even(total: int, k: int) -> list[int]:
    base, rem = divmod(total, k)
    return [base + (i < rem) for i in range(k)]


def gen_dns(n_groups: int, W: float = 60.0, seed: int = 0, mix: dict | None = None,
            profiles: dict | None = None, groups_per_window: int = 40) -> Generated:
    """Generate ``n_groups`` labelled DNS window groups as packet records."""
    profiles = profiles or DNS_PROFILES
    counts = class_counts(n_groups, mix or DNS_MIX)
    rng = np.random.default_rng([seed, 1])
    plan = [lab for lab in sorted(counts) for _ in range(counts[lab])]
    order = rng.permutation(len(plan))
    records: list[PacketRecord] = []
    labels = []
    used = set()
    for g, idx in enumerate(order):
        profile = profiles[plan[idx]]
        window = g // groups_per_window
        grng = np.random.default_rng([seed, 2, g])
        recs, client, qname = _dns_group(grng, profile, window, W, used)
        records.extend(recs)
        labels.append(((client, qname, "*"), profile.label))
    records.sort(key=lambda r: r.ts)
    return Generated(records, ["src_ip", "qname", "window_index"], labels)


def _dns_group(rng, profile: DnsProfile, window: int, W: float, used: set):
    tunnel = profile.label == "DnsTunnel"
    while True:
        L = int(rng.integers(profile.qname_len[0], profile.qname_len[1] + 1))
        qname = _qname(rng, L, tunnel)
        client = _rand_ip(rng, "10.20")
        if (client, qname) not in used:
            used.add((client, qname))
            break
    L = len(qname)
    server = ("8.8.8.8", "1.1.1.1", "9.9.9.9")[int(rng.integers(3))]
    rtype = _choice(rng, {k: v for k, v in profile.rtypes.items() if v > 0})
    lo, hi = SHORT_TTL if rng.random() < profile.short_ttl else profile.ttl
    ttl = int(rng.integers(lo, hi + 1))
    addrs = _addrs(rng, rtype)

    # query times, all inside the window with room for the answers
    start = window * W
    if profile.periodic:
        period = float(profile.periods[int(rng.integers(len(profile.periods)))])
        max_n = int((W - 2.0) // period) + 1
        n = int(rng.integers(profile.queries[0], max(profile.queries[0], min(profile.queries[1], max_n)) + 1))
        n = min(n, max_n)
        offset = rng.uniform(0.0, W - 1.5 - (n - 1) * period)
        times = [offset + i * period for i in range(n)]
    else:
        n = int(rng.integers(profile.queries[0], profile.queries[1] + 1))
        times = sorted(rng.uniform(0.0, W - 1.5, size=n).tolist())
    times = [round(start + t, 6) for t in times]

    if rng.random() < profile.increment_prob and n >= 3:
        p0 = int(rng.integers(1024, 60000))
        ports = [p0 + i for i in range(n)]
    else:
        ports = rng.integers(1024, 65536, size=n).tolist()

    silent = rng.random() < profile.unanswered
    answered = [not silent and rng.random() < profile.answer_prob for _ in range(n)]
    ratio = _draw_ratio(rng, profile)
    k = sum(answered)
    bodies: list[int] = []
    if k:
        proto = DnsMessage(RESPONSE, qname, rtype, ttl, 0, addrs)
        total = round(ratio * L * k)
        # fewer answer addresses when a small target cannot hold them all
        while len(addrs) > 1 and min_body_len(proto) > total // k:
            addrs = addrs[:-1]
            proto = replace(proto, addrs=addrs)
        bodies = [_feasible_body(proto, b) for b in _split_even(total, k)]

    out = []
    bi = 0
    for t, port, ans in zip(times, ports, answered):
        qmsg = DnsMessage(QUERY, qname, rtype, None, 0)
        qbody = min_body_len(qmsg)
        if rng.random() < profile.query_pad_prob:
            qbody += int(rng.integers(PAD_RR_MIN, 61))
        out.append(PacketRecord(t, client, server, int(port), 53, UDP, qbody + 12,
                                dns=replace(qmsg, answer_payload_len=qbody)))
        if ans:
            rt = round(t + float(rng.uniform(0.005, 0.3)), 6)
            body = bodies[bi]
            bi += 1
            out.append(PacketRecord(rt, server, client, 53, int(port), UDP, body + 12,
                                    dns=DnsMessage(RESPONSE, qname, rtype, ttl, body, addrs)))
    return out, client, qname


# -- TCP --------------------------------------------------------------------

def gen_tcp(n_windows: int, seed: int = 0, mix: dict | None = None,
            profiles: dict | None = None, idle_timeout: float = 15.0) -> Generated:
    """Generate ``n_windows`` labelled TCP sessions, one session window each."""
    profiles = profiles or TCP_PROFILES
    counts = class_counts(n_windows, mix or TCP_MIX)
    rng = np.random.default_rng([seed, 3])
    plan = [lab for lab in sorted(counts) for _ in range(counts[lab])]
    order = rng.permutation(len(plan))

    # client/server pairs; some pairs carry several sessions with sequential ports
    records: list[PacketRecord] = []
    labels = []
    used = set()
    pair_state: dict = {}
    t = 0.0
    for g, idx in enumerate(order):
        profile = profiles[plan[idx]]
        srng = np.random.default_rng([seed, 4, g])
        t += float(srng.exponential(0.5))
        recs, key = _tcp_session(srng, profile, round(t, 6), used, pair_state, idle_timeout)
        records.extend(recs)
        labels.append((tuple(str(v) for v in key) + ("*",), profile.label))
    records.sort(key=lambda r: r.ts)
    return Generated(records, ["client_ip", "client_port", "server_ip", "server_port",
                               "window_index"], labels)


def _pick_endpoints(rng, profile: TcpProfile, used: set, pair_state: dict):
    mal = profile.label == "Malicious"
    sport = int(_choice(rng, profile.server_ports))
    sequential = rng.random() < profile.increment_prob
    if sequential:
        # reuse a recent pair of this class so its client ports run upward
        pool_key = (profile.label, sport)
        pairs = pair_state.setdefault(pool_key, [])
        if pairs and rng.random() < 0.8:
            i = int(rng.integers(len(pairs)))
            client, server, last = pairs[i]
            port = last + 1
            pairs[i] = (client, server, port)
        else:
            client = _rand_ip(rng, "10.30" if mal else "10.40")
            server = _rand_ip(rng, "203.0" if mal else "151.101")
            port = int(rng.integers(20000, 60000))
            pairs.append((client, server, port))
    else:
        client = _rand_ip(rng, "10.30" if mal else "10.40")
        server = _rand_ip(rng, "203.0" if mal else "151.101")
        port = int(rng.integers(1024, 65536))
    key = (client, port, server, sport)
    while key in used:
        port = (port % 64511) + 1025
        key = (client, port, server, sport)
    used.add(key)
    return key


def _tcp_plan(rng, profile: TcpProfile):
    """(state, total packets, bad count, duration)."""
    state = _choice(rng, profile.states)
    if state == "syn_sent":
        return state, 1, 0, 0.0
    if state == "syn_received":
        return state, 2, 0, float(rng.uniform(0, 0.05))
    N = int(rng.integers(profile.packets[0], profile.packets[1] + 1))
    if profile.bad_centers:
        center = profile.bad_centers[int(rng.integers(len(profile.bad_centers)))]
        rate = center + float(rng.normal(0, profile.bad_jitter))
    else:
        u = rng.random()
        if u < profile.clean_share:
            rate = 0.0
        elif u < profile.clean_share + profile.low_share:
            N = max(N, 25)
            rate = float(rng.uniform(1.0 / N, math.floor(0.04 * N) / N))
        else:
            N = max(N, 20)
            rate = float(rng.uniform(0.05, 0.12))
    bad = int(round(rate * N))
    kind = profile.duration[0]
    if kind == "peaks":
        dur = float(profile.duration[1 + int(rng.integers(len(profile.duration) - 1))])
        dur = max(0.2, dur + float(rng.normal(0, 0.1)))
    else:
        dur = min(40.0, float(rng.exponential(profile.duration[1])))
    return state, N, bad, dur


def _tcp_session(rng, profile: TcpProfile, t0: float, used: set, pair_state: dict,
                 idle_timeout: float):
    client, cport, server, sport = _pick_endpoints(rng, profile, used, pair_state)
    state, N, bad, dur = _tcp_plan(rng, profile)
    heavy_up = rng.random() < profile.upload_heavy
    up_share = float(rng.uniform(0.6, 0.9) if heavy_up else rng.uniform(0.1, 0.4))
    isn = {True: int(rng.integers(0, 2**32)), False: int(rng.integers(0, 2**32))}
    nxt = dict(isn)

    pkts: list[tuple[bool, tuple, int, int]] = []     # (upload, flags, seq, size)

    def emit(up, flags, size=0, seq=None):
        s = nxt[up] if seq is None else seq
        pkts.append((up, flags, s % 2**32, size))
        if seq is None:
            nxt[up] += size + ("SYN" in flags) + ("FIN" in flags)

    emit(True, ("SYN",))
    if state == "syn_sent":
        return _stamp(pkts, client, cport, server, sport, t0, dur, idle_timeout), \
            (client, cport, server, sport)
    emit(False, ("SYN", "ACK"))
    if state == "syn_received":
        return _stamp(pkts, client, cport, server, sport, t0, dur, idle_timeout), \
            (client, cport, server, sport)
    emit(True, ("ACK",))

    tail = {"closed": 3, "time_wait": 1, "established": 0}[state]
    data = max(1, N - 3 - tail)
    bad = min(bad, data - 1)
    swaps = int(rng.integers(0, bad // 2 + 1))
    retrans = bad - 2 * swaps
    originals = data - retrans

    # reorder disjoint adjacent pairs (forced to one direction): each swap
    # yields two out-of-order segments
    pair_starts = list(range(0, originals - 1, 2))
    swap_at = set(int(v) for v in rng.choice(pair_starts, size=swaps, replace=False)) \
        if swaps else set()

    # original data segments; the heavy direction carries the larger payloads
    segs = []
    for i in range(originals):
        up = segs[i - 1][0] if i - 1 in swap_at else bool(rng.random() < up_share)
        size = int(rng.integers(200, 1400)) if up == heavy_up else int(rng.integers(20, 300))
        segs.append((up, size))
    seqs = []
    for up, size in segs:
        seqs.append(nxt[up])
        nxt[up] += size

    stream = []
    i = 0
    while i < originals:
        if i in swap_at:
            stream += [i + 1, i]
            i += 2
        else:
            stream.append(i)
            i += 1

    # each retransmission repeats a segment already sent at that point
    inserts = sorted(int(v) for v in rng.integers(1, originals + 1, size=retrans))
    ordered = []
    ri = 0
    for pos in range(originals + 1):
        while ri < len(inserts) and inserts[ri] == pos:
            ordered.append(stream[int(rng.integers(pos))])
            ri += 1
        if pos < originals:
            ordered.append(stream[pos])
    for j in ordered:
        up, size = segs[j]
        pkts.append((up, ("ACK", "PSH"), seqs[j] % 2**32, size))

    if state == "closed":
        emit(True, ("FIN", "ACK"))
        emit(False, ("FIN", "ACK"))
        emit(True, ("ACK",))
    elif state == "time_wait":
        emit(True, ("FIN", "ACK"))
    return _stamp(pkts, client, cport, server, sport, t0, dur, idle_timeout), \
        (client, cport, server, sport)


def _stamp(pkts, client, cport, server, sport, t0, dur, idle_timeout) -> list[PacketRecord]:
    """Spread packets over ``dur`` seconds starting at ``t0``, microsecond resolution."""
    n = len(pkts)
    if n == 1:
        offs = [0.0]
    else:
        cuts = np.sort(np.random.default_rng(int(t0 * 1e6) % 2**63).uniform(0, dur, size=n - 2))
        offs = [0.0] + cuts.tolist() + [dur]
    # keep gaps strictly below the idle timeout
    limit = 0.9 * idle_timeout
    times = []
    prev = None
    for o in offs:
        ts = t0 + o
        if prev is not None:
            ts = min(max(ts, prev + 1e-6), prev + limit)
        ts = round(ts, 6)
        if prev is not None and ts <= prev:
            ts = round(prev + 1e-6, 6)
        times.append(ts)
        prev = ts
    out = []
    for (up, flags, seq, size), ts in zip(pkts, times):
        src, dst = ((client, cport), (server, sport)) if up else ((server, sport), (client, cport))
        out.append(PacketRecord(ts, src[0], dst[0], src[1], dst[1], TCP, size,
                                tcp_flags=frozenset(flags), tcp_seq=seq))
    return out
