from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

QUERY = "Query"
RESPONSE = "Response"

UDP = "UDP"
TCP = "TCP"

# Fixed enum order; also the tie-break order for modal record types.
RTYPES = ("A", "AAAA", "CNAME", "MX", "TXT", "NS", "SOA", "PTR", "SRV", "OTHER")
RTYPE_CODES = {
    "A": 1, "NS": 2, "CNAME": 5, "SOA": 6, "PTR": 12,
    "MX": 15, "TXT": 16, "AAAA": 28, "SRV": 33,
}
CODE_RTYPES = {code: name for name, code in RTYPE_CODES.items()}
# Wire code used when encoding an OTHER record (SPF, long obsolete).
OTHER_CODE = 99

TCP_FLAGS = ("SYN", "ACK", "FIN", "RST", "PSH")
TCP_FLAG_BITS = {"FIN": 0x01, "SYN": 0x02, "RST": 0x04, "PSH": 0x08, "ACK": 0x10}

DNS_HEADER_LEN = 12


@dataclass(frozen=True)
class DnsMessage:
    """Decoded DNS facts needed by the feature extractors.

    ``answer_payload_len`` is the size of the message body, i.e. everything
    after the fixed 12-byte header.  ``addrs`` holds the IPv4/IPv6 addresses
    carried by A/AAAA answers; it feeds the domain-to-IP mapping.
    """

    qr: str
    qname: str
    rtype: str
    ttl: Optional[int] = None
    answer_payload_len: int = 0
    addrs: tuple[str, ...] = ()

    @property
    def qname_len(self) -> int:
        return len(self.qname)

    @property
    def is_response(self) -> bool:
        return self.qr == RESPONSE


@dataclass(frozen=True)
class PacketRecord:
    """One decoded UDP or TCP packet.

    ``retrans``/``ooo`` are externally supplied analyzer verdicts (line-record
    input only).  When not None they override :func:`track_tcp` inference.
    """

    ts: float
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    transport: str
    payload_len: int
    tcp_flags: Optional[frozenset] = None
    tcp_seq: Optional[int] = None
    dns: Optional[DnsMessage] = None
    retrans: Optional[bool] = None
    ooo: Optional[bool] = None

    @property
    def is_tcp(self) -> bool:
        return self.transport == TCP

    def has_flag(self, flag: str) -> bool:
        return bool(self.tcp_flags) and flag in self.tcp_flags

    @property
    def is_pure_ack(self) -> bool:
        return self.payload_len == 0 and self.tcp_flags == frozenset({"ACK"})


def sort_flags(flags) -> list[str]:
    return [f for f in TCP_FLAGS if f in flags]
