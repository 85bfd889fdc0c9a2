"""Packet ingestion: pcap and line-record readers, DNS decoding, TCP tracking."""
from .dnswire import decode_dns, encode_dns, min_body_len
from .pcap import PcapReader, PcapWriter, build_frame, read_pcap, write_pcap
from .records import format_line, parse_line, read_records, write_records
from .tcpflow import FlowKey, TcpSegmentEvent, track_tcp
from .types import (QUERY, RESPONSE, RTYPES, TCP, TCP_FLAGS, UDP, DnsMessage,
                    PacketRecord)

__all__ = [
    "decode_dns", "encode_dns", "min_body_len", "PcapReader", "PcapWriter", "build_frame",
    "read_pcap", "write_pcap", "format_line", "parse_line", "read_records",
    "write_records", "FlowKey", "TcpSegmentEvent", "track_tcp", "QUERY",
    "RESPONSE", "RTYPES", "TCP", "TCP_FLAGS", "UDP", "DnsMessage", "PacketRecord",
]
