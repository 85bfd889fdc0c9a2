"""DNS wire-format decoding, plus a small encoder used by the packet builder.

The decoder is defensive: any malformed input raises :class:`Undecodable`
and nothing else.  Only the header, the question section and the answer
section are interpreted; authority/additional records are ignored.
"""
from __future__ import annotations

import ipaddress
import struct

from ..errors import Undecodable
from .types import (CODE_RTYPES, DNS_HEADER_LEN, OTHER_CODE, QUERY, RESPONSE,
                    RTYPE_CODES, DnsMessage)

MAX_NAME_LEN = 255
MAX_LABEL_LEN = 63

_HEADER = struct.Struct("!6H")
_RR_FIXED = struct.Struct("!HHIH")


def _label_text(label: bytes) -> str:
    out = []
    for b in label:
        if 0x21 <= b <= 0x7E and b not in (0x2E, 0x5C):
            out.append(chr(b).lower())
        else:
            out.append(f"\\{b:03d}")
    return "".join(out)


def _read_name(buf: bytes, offset: int) -> tuple[list[bytes], int]:
    labels: list[bytes] = []
    end = None
    seen: set[int] = set()
    total = 0
    n = len(buf)
    while True:
        if offset >= n:
            raise Undecodable("label overrun")
        length = buf[offset]
        kind = length & 0xC0
        if kind == 0xC0:
            if offset + 1 >= n:
                raise Undecodable("truncated pointer")
            ptr = ((length & 0x3F) << 8) | buf[offset + 1]
            if end is None:
                end = offset + 2
            if ptr in seen:
                raise Undecodable("pointer loop")
            seen.add(ptr)
            offset = ptr
            continue
        if kind:
            raise Undecodable("reserved label type")
        if length == 0:
            if end is None:
                end = offset + 1
            return labels, end
        start = offset + 1
        stop = start + length
        if stop > n:
            raise Undecodable("label overrun")
        total += length + 1
        if total > MAX_NAME_LEN:
            raise Undecodable("name too long")
        labels.append(buf[start:stop])
        offset = stop


def decode_dns(payload: bytes) -> DnsMessage:
    """Decode a UDP payload into a :class:`DnsMessage`.

    Raises :class:`Undecodable` for short headers, label overruns, pointer
    loops, or a missing/empty question name.
    """
    buf = bytes(payload)
    if len(buf) < DNS_HEADER_LEN:
        raise Undecodable("shorter than DNS header")
    _, flags, qdcount, ancount, _, _ = _HEADER.unpack_from(buf)
    if qdcount == 0:
        raise Undecodable("no question")

    labels, offset = _read_name(buf, DNS_HEADER_LEN)
    if not labels:
        raise Undecodable("empty question name")
    if offset + 4 > len(buf):
        raise Undecodable("truncated question")
    qtype = struct.unpack_from("!H", buf, offset)[0]
    offset += 4
    for _ in range(qdcount - 1):
        _, offset = _read_name(buf, offset)
        offset += 4
        if offset > len(buf):
            raise Undecodable("truncated question")

    is_response = bool(flags & 0x8000)
    first_type = None
    ttl = None
    addrs: list[str] = []
    if is_response:
        for _ in range(ancount):
            _, offset = _read_name(buf, offset)
            if offset + _RR_FIXED.size > len(buf):
                raise Undecodable("truncated answer")
            rtype, _, rttl, rdlen = _RR_FIXED.unpack_from(buf, offset)
            offset += _RR_FIXED.size
            if offset + rdlen > len(buf):
                raise Undecodable("rdata overrun")
            rdata = buf[offset:offset + rdlen]
            offset += rdlen
            if first_type is None:
                first_type = rtype
            ttl = rttl if ttl is None else min(ttl, rttl)
            if rtype == 1 and rdlen == 4:
                addrs.append(str(ipaddress.IPv4Address(rdata)))
            elif rtype == 28 and rdlen == 16:
                addrs.append(str(ipaddress.IPv6Address(rdata)))

    code = first_type if first_type is not None else qtype
    return DnsMessage(
        qr=RESPONSE if is_response else QUERY,
        qname=".".join(_label_text(lb) for lb in labels),
        rtype=CODE_RTYPES.get(code, "OTHER"),
        ttl=ttl,
        answer_payload_len=len(buf) - DNS_HEADER_LEN,
        addrs=tuple(addrs),
    )


# -- encoder ---------------------------------------------------------------

def encode_name(name: str) -> bytes:
    """Encode a presentation-form name (``\\DDD`` escapes allowed)."""
    labels: list[bytearray] = [bytearray()]
    i = 0
    while i < len(name):
        ch = name[i]
        if ch == "\\":
            digits = name[i + 1:i + 4]
            if len(digits) != 3 or not digits.isdigit() or int(digits) > 255:
                raise ValueError(f"bad escape in {name!r}")
            labels[-1].append(int(digits))
            i += 4
            continue
        if ch == ".":
            labels.append(bytearray())
        else:
            code = ord(ch)
            if code > 0x7E:
                raise ValueError(f"non-ASCII character in {name!r}")
            labels[-1].append(code)
        i += 1
    out = bytearray()
    for label in labels:
        if not 1 <= len(label) <= MAX_LABEL_LEN:
            raise ValueError(f"bad label length in {name!r}")
        out.append(len(label))
        out += label
    out.append(0)
    if len(out) > MAX_NAME_LEN:
        raise ValueError(f"name too long: {name!r}")
    return bytes(out)


_QNAME_PTR = b"\xc0\x0c"
_MIN_RDATA = {
    "TXT": b"\x00",
    "CNAME": _QNAME_PTR,
    "NS": _QNAME_PTR,
    "PTR": _QNAME_PTR,
    "MX": b"\x00\x0a" + _QNAME_PTR,
    "SOA": _QNAME_PTR + _QNAME_PTR + bytes(20),
    "SRV": bytes(6) + _QNAME_PTR,
    "OTHER": b"",
}
# root name + type/class/ttl/rdlength
_PAD_RR_OVERHEAD = 1 + _RR_FIXED.size


def _type_code(rtype: str) -> int:
    return RTYPE_CODES.get(rtype, OTHER_CODE)


def _rr(rtype: str, ttl: int, rdata: bytes) -> bytes:
    return _QNAME_PTR + _RR_FIXED.pack(_type_code(rtype), 1, ttl, len(rdata)) + rdata


def _txt_rdata(size: int) -> bytes:
    out = bytearray()
    remaining = size
    while remaining > 0:
        chunk = min(255, remaining - 1)
        out.append(chunk)
        out += b"x" * chunk
        remaining -= chunk + 1
    return bytes(out)


def _sections(msg: DnsMessage) -> tuple[bytes, list[bytes]]:
    """Question and minimal answer records for ``msg``, validating consistency."""
    is_response = msg.qr == RESPONSE
    if not is_response and msg.ttl is not None:
        raise ValueError("queries carry no ttl")
    question = encode_name(msg.qname) + struct.pack("!HH", _type_code(msg.rtype), 1)

    answers: list[bytes] = []
    if is_response and msg.ttl is not None:
        if not 0 <= msg.ttl <= 0xFFFFFFFF:
            raise ValueError("ttl out of range")
        if msg.rtype in ("A", "AAAA"):
            if not msg.addrs:
                raise ValueError(f"{msg.rtype} answer needs at least one address")
            for addr in msg.addrs:
                ip = ipaddress.ip_address(addr)
                if (ip.version == 4) != (msg.rtype == "A"):
                    raise ValueError(f"address {addr} does not match {msg.rtype}")
                answers.append(_rr(msg.rtype, msg.ttl, ip.packed))
        else:
            answers.append(_rr(msg.rtype, msg.ttl, _MIN_RDATA[msg.rtype]))
    if msg.addrs and not answers:
        raise ValueError("addresses given without A/AAAA answers")
    return question, answers


def min_body_len(msg: DnsMessage) -> int:
    """Smallest ``answer_payload_len`` that :func:`encode_dns` can produce for ``msg``."""
    question, answers = _sections(msg)
    return len(question) + sum(map(len, answers))


def encode_dns(msg: DnsMessage, txid: int = 0) -> bytes:
    """Build a DNS message whose decoding reproduces ``msg`` exactly.

    Layout: one question; for responses with a TTL, either one A/AAAA answer
    per address or a single minimal answer of ``msg.rtype``.  The body is
    padded to ``msg.answer_payload_len`` inside the TXT rdata, or else with a
    NULL record in the additional section.  Raises ValueError when the
    requested body size cannot be produced.
    """
    is_response = msg.qr == RESPONSE
    question, answers = _sections(msg)

    remaining = msg.answer_payload_len - len(question) - sum(map(len, answers))
    if remaining < 0:
        raise ValueError(f"body of {msg.answer_payload_len} bytes too small")
    additional = b""
    if remaining:
        if answers and msg.rtype == "TXT":
            answers = [_rr("TXT", msg.ttl, _txt_rdata(1 + remaining))]
        elif remaining >= _PAD_RR_OVERHEAD:
            pad = remaining - _PAD_RR_OVERHEAD
            additional = b"\x00" + _RR_FIXED.pack(10, 1, 0, pad) + bytes(pad)
        else:
            raise ValueError(f"cannot pad body by {remaining} bytes")

    flags = 0x8180 if is_response else 0x0100
    header = _HEADER.pack(txid & 0xFFFF, flags, 1, len(answers), 0,
                          1 if additional else 0)
    return header + question + b"".join(answers) + additional
