"""Random PacketRecord streams for round-trip and fuzz tests."""
import ipaddress
import random

from c2traffic.ingest import QUERY, RESPONSE, RTYPES, TCP, TCP_FLAGS, UDP
from c2traffic.ingest.dnswire import min_body_len
from c2traffic.ingest.types import DnsMessage, PacketRecord

_ALNUM = "abcdefghijklmnopqrstuvwxyz0123456789-"


def random_ip(rnd: random.Random) -> str:
    return str(ipaddress.IPv4Address(rnd.getrandbits(32)))


def random_qname(rnd: random.Random) -> str:
    labels = ["".join(rnd.choice(_ALNUM) for _ in range(rnd.randint(1, 20)))
              for _ in range(rnd.randint(1, 4))]
    return ".".join(labels)


def random_dns(rnd: random.Random) -> DnsMessage:
    qname = random_qname(rnd)
    rtype = rnd.choice(RTYPES)
    if rnd.random() < 0.5:
        msg = DnsMessage(QUERY, qname, rtype, None, 0)
    elif rnd.random() < 0.2:
        msg = DnsMessage(RESPONSE, qname, rtype, None, 0)
    else:
        addrs = ()
        if rtype == "A":
            addrs = tuple(random_ip(rnd) for _ in range(rnd.randint(1, 3)))
        elif rtype == "AAAA":
            addrs = tuple(str(ipaddress.IPv6Address(rnd.getrandbits(128)))
                          for _ in range(rnd.randint(1, 2)))
        msg = DnsMessage(RESPONSE, qname, rtype, rnd.randint(0, 2**32 - 1), 0, addrs)
    base = min_body_len(msg)
    extra = rnd.choice([0, 0, 11, rnd.randint(11, 300)])
    if msg.rtype == "TXT" and msg.ttl is not None:
        extra = rnd.randint(0, 300)
    body = base + extra
    return DnsMessage(msg.qr, msg.qname, msg.rtype, msg.ttl, body, msg.addrs)


def random_record(rnd: random.Random, ts: float) -> PacketRecord:
    src, dst = random_ip(rnd), random_ip(rnd)
    sport, dport = rnd.randint(0, 65535), rnd.randint(0, 65535)
    if rnd.random() < 0.5:
        flags = frozenset(f for f in TCP_FLAGS if rnd.random() < 0.4)
        return PacketRecord(ts, src, dst, sport, dport, TCP, rnd.randint(0, 1500),
                            tcp_flags=flags, tcp_seq=rnd.getrandbits(32))
    if rnd.random() < 0.6:
        dns = random_dns(rnd)
        if dns.qr == QUERY:
            dport = 53
        else:
            sport = 53
        return PacketRecord(ts, src, dst, sport, dport, UDP,
                            dns.answer_payload_len + 12, dns=dns)
    # UDP off port 53 so the payload is never interpreted as DNS
    return PacketRecord(ts, src, dst, rnd.choice([1000, 5000, 40000]),
                        rnd.choice([123, 443, 8000]), UDP, rnd.randint(0, 1400))


def random_stream(seed: int, max_len: int = 20) -> list[PacketRecord]:
    rnd = random.Random(seed)
    sec = rnd.randint(0, 2**31)
    usec = 0
    out = []
    for _ in range(rnd.randint(0, max_len)):
        usec += rnd.randint(0, 3_000_000)
        ts = sec + usec // 1_000_000 + (usec % 1_000_000) / 1e6
        out.append(random_record(rnd, ts))
    return out
