"""Classic libpcap reading and writing (Ethernet / IPv4 / UDP+TCP only)."""
from __future__ import annotations

import ipaddress
import logging
import struct
from collections import Counter
from pathlib import Path
from typing import BinaryIO, Iterable, Iterator, Optional, Union

from ..errors import BadMagic, DataError, Truncated, Undecodable
from .dnswire import decode_dns, encode_dns
from .types import (DNS_HEADER_LEN, TCP, TCP_FLAG_BITS, UDP, PacketRecord)

log = logging.getLogger(__name__)

MAGIC_LE = 0xA1B2C3D4
LINKTYPE_ETHERNET = 1
ETH_HLEN = 14
ETHERTYPE_IPV4 = 0x0800
IPPROTO_TCP = 6
IPPROTO_UDP = 17
DNS_PORTS = (53,)

_SRC_MAC = bytes.fromhex("020000000001")
_DST_MAC = bytes.fromhex("020000000002")

PathLike = Union[str, Path]


class PcapReader:
    """Iterate the UDP/TCP packets of a classic pcap file as PacketRecords.

    Frames that are not Ethernet/IPv4/UDP-or-TCP are skipped and tallied in
    ``skipped`` by reason.  UDP payloads on ``dns_ports`` are decoded as DNS;
    failures are tallied under ``dns_undecodable`` and the record keeps
    ``dns=None``.
    """

    def __init__(self, path: PathLike, dns_ports: Iterable[int] = DNS_PORTS):
        self.path = Path(path)
        self.dns_ports = frozenset(dns_ports)
        self.skipped: Counter = Counter()
        self.dns_undecodable = 0

    @property
    def skip_count(self) -> int:
        return sum(self.skipped.values())

    def __iter__(self) -> Iterator[PacketRecord]:
        data = self.path.read_bytes()
        if len(data) < 24:
            if len(data) >= 4:
                self._check_magic(data)
            raise Truncated(0, "global header")
        endian = self._check_magic(data)
        linktype = struct.unpack_from(endian + "I", data, 20)[0]
        if linktype != LINKTYPE_ETHERNET:
            raise DataError(f"unsupported link type {linktype}")
        rec_hdr = struct.Struct(endian + "IIII")
        pos = 24
        while pos < len(data):
            if pos + rec_hdr.size > len(data):
                raise Truncated(pos, "record header")
            ts_sec, ts_usec, incl_len, _ = rec_hdr.unpack_from(data, pos)
            start = pos + rec_hdr.size
            if start + incl_len > len(data):
                raise Truncated(pos, f"record claims {incl_len} bytes")
            frame = data[start:start + incl_len]
            pos = start + incl_len
            rec = self._decode_frame(round(ts_sec + ts_usec / 1e6, 6), frame)
            if rec is not None:
                yield rec

    @staticmethod
    def _check_magic(data: bytes) -> str:
        magic = struct.unpack_from("<I", data)[0]
        if magic == MAGIC_LE:
            return "<"
        if magic == 0xD4C3B2A1:
            return ">"
        raise BadMagic(struct.unpack_from(">I", data)[0])

    def _skip(self, reason: str) -> None:
        self.skipped[reason] += 1

    def _decode_frame(self, ts: float, frame: bytes) -> Optional[PacketRecord]:
        if len(frame) < ETH_HLEN:
            return self._skip("short_frame")
        if struct.unpack_from("!H", frame, 12)[0] != ETHERTYPE_IPV4:
            return self._skip("non_ipv4")
        ip = frame[ETH_HLEN:]
        if len(ip) < 20 or ip[0] >> 4 != 4:
            return self._skip("non_ipv4")
        ihl = (ip[0] & 0x0F) * 4
        total_len, frag = struct.unpack_from("!H2xH", ip, 2)
        if ihl < 20 or len(ip) < ihl or total_len < ihl:
            return self._skip("malformed_ip")
        if frag & 0x3FFF:
            return self._skip("fragment")
        proto = ip[9]
        src_ip = str(ipaddress.IPv4Address(ip[12:16]))
        dst_ip = str(ipaddress.IPv4Address(ip[16:20]))
        l4 = ip[ihl:total_len]

        if proto == IPPROTO_UDP:
            if len(l4) < 8:
                return self._skip("malformed_l4")
            sport, dport = struct.unpack_from("!HH", l4)
            payload = l4[8:]
            payload_len = total_len - ihl - 8
            dns = None
            if sport in self.dns_ports or dport in self.dns_ports:
                try:
                    dns = decode_dns(payload)
                except Undecodable:
                    self.dns_undecodable += 1
            return PacketRecord(ts, src_ip, dst_ip, sport, dport, UDP,
                                payload_len, dns=dns)

        if proto == IPPROTO_TCP:
            if len(l4) < 20:
                return self._skip("malformed_l4")
            sport, dport, seq, off_flags = struct.unpack_from("!HHI4xH", l4)
            doff = (off_flags >> 12) * 4
            if doff < 20 or doff > total_len - ihl:
                return self._skip("malformed_l4")
            flags = frozenset(name for name, bit in TCP_FLAG_BITS.items()
                              if off_flags & bit)
            return PacketRecord(ts, src_ip, dst_ip, sport, dport, TCP,
                                total_len - ihl - doff, tcp_flags=flags,
                                tcp_seq=seq)
        return self._skip("non_transport")


def read_pcap(path: PathLike, dns_ports: Iterable[int] = DNS_PORTS) -> PcapReader:
    return PcapReader(path, dns_ports)


# -- writing ---------------------------------------------------------------

def _ip_checksum(header: bytes) -> int:
    total = sum(struct.unpack(f"!{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def build_frame(rec: PacketRecord) -> bytes:
    """Ethernet/IPv4/UDP-or-TCP frame reproducing ``rec`` on decode."""
    if rec.dns is not None:
        if rec.transport != UDP:
            raise ValueError("DNS is only supported over UDP")
        payload = encode_dns(rec.dns)
        if len(payload) != rec.payload_len:
            raise ValueError(
                f"payload_len {rec.payload_len} != encoded DNS size {len(payload)}")
        if rec.dns.answer_payload_len != rec.payload_len - DNS_HEADER_LEN:
            raise ValueError("answer_payload_len inconsistent with payload_len")
    else:
        payload = bytes(rec.payload_len)

    if rec.transport == UDP:
        l4 = struct.pack("!HHHH", rec.src_port, rec.dst_port, 8 + len(payload), 0)
        proto = IPPROTO_UDP
    elif rec.transport == TCP:
        bits = 0
        for flag in rec.tcp_flags or ():
            bits |= TCP_FLAG_BITS[flag]
        l4 = struct.pack("!HHIIHHHH", rec.src_port, rec.dst_port,
                         rec.tcp_seq or 0, 0, (5 << 12) | bits, 65535, 0, 0)
        proto = IPPROTO_TCP
    else:
        raise ValueError(f"unknown transport {rec.transport!r}")

    total_len = 20 + len(l4) + len(payload)
    if total_len > 0xFFFF:
        raise ValueError("packet too large for IPv4")
    hdr = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total_len, 0, 0x4000, 64, proto, 0,
                      ipaddress.IPv4Address(rec.src_ip).packed,
                      ipaddress.IPv4Address(rec.dst_ip).packed)
    hdr = hdr[:10] + struct.pack("!H", _ip_checksum(hdr)) + hdr[12:]
    eth = _DST_MAC + _SRC_MAC + struct.pack("!H", ETHERTYPE_IPV4)
    return eth + hdr + l4 + payload


class PcapWriter:
    def __init__(self, fh: BinaryIO, big_endian: bool = False, snaplen: int = 65535):
        self.fh = fh
        self.endian = ">" if big_endian else "<"
        fh.write(struct.pack(self.endian + "IHHiIII", MAGIC_LE, 2, 4, 0, 0,
                             snaplen, LINKTYPE_ETHERNET))

    def write(self, rec: PacketRecord) -> None:
        frame = build_frame(rec)
        total_us = round(rec.ts * 1_000_000)
        sec, usec = divmod(total_us, 1_000_000)
        self.fh.write(struct.pack(self.endian + "IIII", sec, usec, len(frame), len(frame)))
        self.fh.write(frame)


def write_pcap(records: Iterable[PacketRecord], path: PathLike,
               big_endian: bool = False) -> int:
    n = 0
    with open(path, "wb") as fh:
        writer = PcapWriter(fh, big_endian=big_endian)
        for rec in records:
            writer.write(rec)
            n += 1
    return n
