"""Tab-separated line-record format (one PacketRecord per line).

Field order::

    ts src_ip dst_ip src_port dst_port proto payload_len tcp_flags tcp_seq
    dns_qr dns_qname dns_rtype dns_ttl retrans_flag ooo_flag

``-`` marks an absent value.  See docs/line-records.md for the full schema.
"""
from __future__ import annotations

import ipaddress
from pathlib import Path
from typing import Iterable, Iterator, Optional, TextIO, Union

from ..errors import ParseError
from .types import (DNS_HEADER_LEN, QUERY, RESPONSE, RTYPES, TCP, TCP_FLAGS, UDP,
                    DnsMessage, PacketRecord, sort_flags)

FIELDS = ("ts", "src_ip", "dst_ip", "src_port", "dst_port", "proto",
          "payload_len", "tcp_flags", "tcp_seq", "dns_qr", "dns_qname",
          "dns_rtype", "dns_ttl", "retrans_flag", "ooo_flag")
NA = "-"

_QR_TOKENS = {"Q": QUERY, "R": RESPONSE}
_QR_NAMES = {QUERY: "Q", RESPONSE: "R"}


def parse_ts(text: str) -> float:
    """Seconds with up to microsecond precision, combined like pcap sec+usec."""
    sec_text, _, frac = text.partition(".")
    if not sec_text.isdigit() or (frac and not frac.isdigit()) or len(frac) > 6:
        raise ValueError(f"bad timestamp {text!r}")
    return round(int(sec_text) + int(frac.ljust(6, "0")) / 1e6, 6)


def format_ts(ts: float) -> str:
    sec, usec = divmod(round(ts * 1_000_000), 1_000_000)
    return f"{sec}.{usec:06d}"


def _int(text: str, lo: int, hi: int, name: str) -> int:
    if not text.isdigit():
        raise ValueError(f"{name} must be a non-negative integer, got {text!r}")
    value = int(text)
    if not lo <= value <= hi:
        raise ValueError(f"{name} {value} out of range [{lo}, {hi}]")
    return value


def _ipv4(text: str, name: str) -> str:
    try:
        return str(ipaddress.IPv4Address(text))
    except ValueError:
        raise ValueError(f"{name} is not an IPv4 address: {text!r}") from None


def _flag(text: str, name: str) -> Optional[bool]:
    if text == NA:
        return None
    if text in ("0", "1"):
        return text == "1"
    raise ValueError(f"{name} must be 0, 1 or -")


def parse_line(line: str) -> PacketRecord:
    parts = line.rstrip("\r\n").split("\t")
    if len(parts) != len(FIELDS):
        raise ValueError(f"expected {len(FIELDS)} fields, got {len(parts)}")
    (ts, src_ip, dst_ip, sport, dport, proto, plen, flags, seq,
     qr, qname, rtype, ttl, retrans, ooo) = parts
    if not ts:
        raise ValueError("missing ts")
    if proto not in (UDP, TCP):
        raise ValueError(f"proto must be UDP or TCP, got {proto!r}")
    payload_len = _int(plen, 0, 0xFFFF, "payload_len")

    tcp_flags = tcp_seq = None
    if proto == TCP:
        tcp_flags = frozenset() if flags == NA else frozenset(flags.split(","))
        unknown = tcp_flags - set(TCP_FLAGS)
        if unknown:
            raise ValueError(f"unknown tcp flags {sorted(unknown)}")
        if seq == NA:
            raise ValueError("TCP record needs tcp_seq")
        tcp_seq = _int(seq, 0, 0xFFFFFFFF, "tcp_seq")
    elif flags != NA or seq != NA:
        raise ValueError("tcp_flags/tcp_seq must be '-' for UDP")

    dns = None
    if qr == NA:
        if (qname, rtype, ttl) != (NA, NA, NA):
            raise ValueError("dns fields given without dns_qr")
    else:
        if proto != UDP:
            raise ValueError("DNS records must be UDP")
        if qr not in _QR_TOKENS:
            raise ValueError("dns_qr must be Q, R or -")
        if not qname or qname == NA:
            raise ValueError("dns_qname missing")
        if rtype not in RTYPES:
            raise ValueError(f"unknown dns_rtype {rtype!r}")
        if payload_len < DNS_HEADER_LEN:
            raise ValueError("DNS payload shorter than header")
        dns_ttl = None if ttl == NA else _int(ttl, 0, 0xFFFFFFFF, "dns_ttl")
        if dns_ttl is not None and qr != "R":
            raise ValueError("dns_ttl only allowed on responses")
        dns = DnsMessage(_QR_TOKENS[qr], qname.lower(), rtype, dns_ttl,
                         payload_len - DNS_HEADER_LEN)

    retrans_flag = _flag(retrans, "retrans_flag")
    ooo_flag = _flag(ooo, "ooo_flag")
    if retrans_flag and ooo_flag:
        raise ValueError("retrans_flag and ooo_flag are mutually exclusive")
    if (retrans_flag or ooo_flag) and payload_len == 0:
        raise ValueError("zero-payload segments cannot be retransmissions/out-of-order")
    if proto == UDP and (retrans_flag is not None or ooo_flag is not None):
        raise ValueError("retrans/ooo flags only apply to TCP")

    return PacketRecord(
        ts=parse_ts(ts), src_ip=_ipv4(src_ip, "src_ip"), dst_ip=_ipv4(dst_ip, "dst_ip"),
        src_port=_int(sport, 0, 0xFFFF, "src_port"),
        dst_port=_int(dport, 0, 0xFFFF, "dst_port"),
        transport=proto, payload_len=payload_len, tcp_flags=tcp_flags,
        tcp_seq=tcp_seq, dns=dns, retrans=retrans_flag, ooo=ooo_flag)


def format_line(rec: PacketRecord) -> str:
    def opt(value) -> str:
        return NA if value is None else str(value)

    def opt_flag(value) -> str:
        return NA if value is None else ("1" if value else "0")

    if rec.transport == TCP:
        flags = ",".join(sort_flags(rec.tcp_flags or ())) or NA
    else:
        flags = NA
    dns = rec.dns
    return "\t".join([
        format_ts(rec.ts), rec.src_ip, rec.dst_ip, str(rec.src_port),
        str(rec.dst_port), rec.transport, str(rec.payload_len), flags,
        opt(rec.tcp_seq),
        _QR_NAMES[dns.qr] if dns else NA,
        dns.qname if dns else NA,
        dns.rtype if dns else NA,
        opt(dns.ttl) if dns else NA,
        opt_flag(rec.retrans), opt_flag(rec.ooo),
    ])


def iter_records(fh: TextIO) -> Iterator[PacketRecord]:
    for lineno, line in enumerate(fh, 1):
        if not line.strip() or line.startswith("#"):
            continue
        try:
            yield parse_line(line)
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None


def read_records(path: Union[str, Path]) -> Iterator[PacketRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        yield from iter_records(fh)


def write_records(records: Iterable[PacketRecord], path: Union[str, Path]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(format_line(rec) + "\n")
            n += 1
    return n
