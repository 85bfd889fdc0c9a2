"""Per-flow TCP sequence tracking: retransmission and out-of-order flags."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .types import PacketRecord

_MOD = 1 << 32
_HALF = 1 << 31


@dataclass(frozen=True, order=True)
class FlowKey:
    """Connection identity oriented initiator (client) -> responder (server)."""

    client_ip: str
    client_port: int
    server_ip: str
    server_port: int

    def reversed(self) -> "FlowKey":
        return FlowKey(self.server_ip, self.server_port, self.client_ip, self.client_port)


@dataclass(frozen=True)
class TcpSegmentEvent:
    flow_key: FlowKey
    upload: bool
    record: PacketRecord
    is_retransmission: bool = False
    is_out_of_order: bool = False


def initiator_side(rec: PacketRecord) -> bool:
    """True if the sender of ``rec`` is the connection initiator."""
    syn = rec.has_flag("SYN")
    if syn and rec.has_flag("ACK"):
        return False
    return True


class _Direction:
    """Sequence-space bookkeeping for one direction of one flow.

    Sequence numbers are unwrapped into an unbounded integer space relative
    to ``next_expected``, so 32-bit wraparound is transparent.
    """

    __slots__ = ("base", "next_expected", "ranges")

    def __init__(self) -> None:
        self.base: Optional[int] = None
        self.next_expected: Optional[int] = None
        self.ranges: list[list[int]] = []   # sorted, merged [start, end)

    def unwrap(self, seq: int) -> int:
        if self.next_expected is None:
            return seq
        ref = self.next_expected
        diff = (seq - ref) % _MOD
        if diff >= _HALF:
            diff -= _MOD
        return ref + diff

    def covered(self, start: int, end: int) -> bool:
        for s, e in self.ranges:
            if s <= start and end <= e:
                return True
        return False

    def has_hole(self, start: int, end: int) -> bool:
        lo = max(start, self.base)
        hi = min(end, self.next_expected)
        if lo >= hi:
            return False
        pos = lo
        for s, e in self.ranges:
            if e <= pos:
                continue
            if s > pos:
                return True
            pos = e
            if pos >= hi:
                return False
        return pos < hi

    def add(self, start: int, end: int) -> None:
        merged: list[list[int]] = []
        placed = False
        for s, e in self.ranges:
            if e < start:
                merged.append([s, e])
            elif end < s:
                if not placed:
                    merged.append([start, end])
                    placed = True
                merged.append([s, e])
            else:
                start, end = min(s, start), max(e, end)
        if not placed:
            merged.append([start, end])
        merged.sort()
        self.ranges = merged

    def observe(self, rec: PacketRecord) -> tuple[bool, bool]:
        seqlen = rec.payload_len + rec.has_flag("SYN") + rec.has_flag("FIN")
        if seqlen == 0 or rec.tcp_seq is None:
            return False, False
        start = self.unwrap(rec.tcp_seq)
        end = start + seqlen
        retrans = ooo = False
        if self.next_expected is None:
            self.base = start
            self.next_expected = end
        else:
            if rec.payload_len > 0:
                if self.covered(start, end):
                    retrans = True
                elif start > self.next_expected or self.has_hole(start, end):
                    ooo = True
            self.next_expected = max(self.next_expected, end)
        self.add(start, end)
        return retrans, ooo


def track_tcp(records: Iterable[PacketRecord]) -> Iterator[TcpSegmentEvent]:
    """Turn TCP PacketRecords into TcpSegmentEvents.

    A payload-bearing segment whose byte range was already fully observed is a
    retransmission.  One starting beyond ``next_expected`` (opening a gap) or
    overlapping a previously opened gap is out-of-order.  Zero-payload
    segments are never flagged.  Records carrying external ``retrans``/``ooo``
    verdicts keep them; the tracker state is still updated.
    Non-TCP records are ignored.
    """
    flows: dict[tuple, FlowKey] = {}
    directions: dict[tuple, _Direction] = {}
    for rec in records:
        if not rec.is_tcp:
            continue
        sender = (rec.src_ip, rec.src_port)
        receiver = (rec.dst_ip, rec.dst_port)
        pair = (sender, receiver) if sender <= receiver else (receiver, sender)
        key = flows.get(pair)
        if key is None:
            client, server = (sender, receiver) if initiator_side(rec) else (receiver, sender)
            key = FlowKey(client[0], client[1], server[0], server[1])
            flows[pair] = key
        upload = sender == (key.client_ip, key.client_port)

        dkey = (sender, receiver)
        state = directions.get(dkey)
        if state is None:
            state = directions[dkey] = _Direction()
        retrans, ooo = state.observe(rec)
        if rec.retrans is not None or rec.ooo is not None:
            retrans, ooo = bool(rec.retrans), bool(rec.ooo)
        yield TcpSegmentEvent(key, upload, rec, retrans, ooo)
