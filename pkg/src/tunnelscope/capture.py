"""Classic-pcap reading/writing and per-packet decoding.

Supported file dialect: the de-facto libpcap layout. 24-byte global header
(magic, version 2.4, snaplen, linktype) followed by 16-byte record headers
(ts_sec, ts_subsec, incl_len, orig_len). Accepted magics: 0xa1b2c3d4
(microsecond) and 0xa1b23c4d (nanosecond), either endianness. pcapng is not
supported.

Decoding normalizes frames to the IPv4 layer: Ethernet (linktype 1) and
raw-IP (linktype 101) captures both yield the same PacketRecord values.
Anything that is not a well-formed first-fragment IPv4 packet is skipped,
never raised: read_capture counts skips in a tally so a surprising linktype
or a burst of ARP/IPv6 shows up in the numbers rather than as an exception.
"""

from __future__ import annotations

import enum
import socket
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .errors import (
    BadMagic,
    CompressedName,
    DnsParseError,
    MalformedName,
    NoQuestion,
    TruncatedRecord,
)
from .wire import LINKTYPE_ETHERNET, LINKTYPE_RAW_IP, PROTO_TCP, PROTO_UDP

DNS_PORT = 53

_MAGICS = {
    b"\xa1\xb2\xc3\xd4": (">", 1_000_000),
    b"\xd4\xc3\xb2\xa1": ("<", 1_000_000),
    b"\xa1\xb2\x3c\x4d": (">", 1_000_000_000),
    b"\x4d\x3c\xb2\xa1": ("<", 1_000_000_000),
}

PCAP_MAGIC_USEC = 0xA1B2C3D4


class Transport(enum.Enum):
    TCP = "tcp"
    UDP = "udp"
    OTHER = "other"


@dataclass(frozen=True)
class DnsQueryView:
    """First question of a DNS message.

    qname_presentation is the '.'-join of the raw labels, no trailing dot;
    a lone root name yields an empty presentation and zero labels.
    """

    qname_presentation: bytes
    qname_labels: tuple[bytes, ...]
    qtype: int
    is_query: bool


@dataclass(frozen=True)
class PacketRecord:
    """One decoded captured packet, normalized to the IPv4 layer.

    index is the frame's 0-based ordinal in the source capture (skipped
    frames consume indices too, so values can be cross-referenced with the
    file). ip_bytes holds the full datagram trimmed to the IPv4 total-length
    field; app_payload is ip_bytes minus IP and transport headers.
    """

    index: int
    timestamp: float
    ip_bytes: bytes
    src_addr: str
    dst_addr: str
    transport: Transport
    src_port: Optional[int]
    dst_port: Optional[int]
    app_payload: bytes
    dns_query: Optional[DnsQueryView]


@dataclass
class Capture:
    path: str
    linktype: int
    packets: list[PacketRecord]
    skipped: int

    def __len__(self) -> int:
        return len(self.packets)

    def __iter__(self):
        return iter(self.packets)


def parse_dns_qname(dns_message: bytes) -> DnsQueryView:
    """Extract the first question's name and type from a DNS message.

    Only uncompressed names are accepted; a compression pointer in the
    question raises CompressedName. Raises NoQuestion when QDCOUNT is zero
    and MalformedName for overruns, oversize names, or truncation.
    """
    if len(dns_message) < 12:
        raise MalformedName("message shorter than the 12-byte DNS header")
    flags, qdcount = struct.unpack("!HH", dns_message[2:6])
    if qdcount == 0:
        raise NoQuestion("QDCOUNT is 0")
    pos = 12
    labels: list[bytes] = []
    wire_len = 0
    while True:
        if pos >= len(dns_message):
            raise MalformedName("name runs past the end of the message")
        length = dns_message[pos]
        if length == 0:
            pos += 1
            wire_len += 1
            break
        if length & 0xC0 == 0xC0:
            raise CompressedName("compression pointer in question name")
        if length > 63:
            raise MalformedName(f"label length {length} exceeds 63")
        if pos + 1 + length > len(dns_message):
            raise MalformedName("label overruns the message buffer")
        labels.append(dns_message[pos + 1 : pos + 1 + length])
        wire_len += 1 + length
        pos += 1 + length
    if wire_len > 255:
        raise MalformedName(f"wire-format name is {wire_len} octets (max 255)")
    if pos + 2 > len(dns_message):
        raise MalformedName("question truncated before QTYPE")
    qtype = int.from_bytes(dns_message[pos : pos + 2], "big")
    return DnsQueryView(
        qname_presentation=b".".join(labels),
        qname_labels=tuple(labels),
        qtype=qtype,
        is_query=(flags & 0x8000) == 0,
    )


def decode_packet(
    frame_bytes: bytes,
    link_type: int,
    *,
    index: int = 0,
    timestamp: float = 0.0,
    dns_port: int = DNS_PORT,
) -> Optional[PacketRecord]:
    """Decode one captured frame; returns None (skip) instead of raising.

    Skips: unknown link types, non-IPv4 ethertypes, malformed or truncated
    IP/transport headers, and IP fragments other than the first. A DNS
    parse is attempted only when a port matches dns_port; parse failures
    leave dns_query unset without skipping the packet.
    """
    if link_type == LINKTYPE_ETHERNET:
        if len(frame_bytes) < 14 or frame_bytes[12:14] != b"\x08\x00":
            return None
        ip = frame_bytes[14:]
    elif link_type == LINKTYPE_RAW_IP:
        ip = frame_bytes
    else:
        return None

    if len(ip) < 20 or ip[0] >> 4 != 4:
        return None
    ihl = (ip[0] & 0x0F) * 4
    total_len = int.from_bytes(ip[2:4], "big")
    if ihl < 20 or total_len < ihl or total_len > len(ip):
        return None
    ip = bytes(ip[:total_len])
    if int.from_bytes(ip[6:8], "big") & 0x1FFF:
        return None  # non-first fragment
    proto = ip[9]
    src_addr = socket.inet_ntoa(ip[12:16])
    dst_addr = socket.inet_ntoa(ip[16:20])
    transport_payload = ip[ihl:]

    if proto == PROTO_TCP:
        if len(transport_payload) < 20:
            return None
        src_port, dst_port = struct.unpack("!HH", transport_payload[:4])
        data_off = (transport_payload[12] >> 4) * 4
        if data_off < 20 or data_off > len(transport_payload):
            return None
        transport = Transport.TCP
        app_payload = transport_payload[data_off:]
    elif proto == PROTO_UDP:
        if len(transport_payload) < 8:
            return None
        src_port, dst_port = struct.unpack("!HH", transport_payload[:4])
        transport = Transport.UDP
        app_payload = transport_payload[8:]
    else:
        transport = Transport.OTHER
        src_port = dst_port = None
        app_payload = transport_payload

    dns_view = None
    if transport is not Transport.OTHER and dns_port in (src_port, dst_port):
        message = app_payload
        if transport is Transport.TCP and len(message) >= 2:
            # DNS over TCP: 2-byte length prefix, first message only.
            message = message[2 : 2 + int.from_bytes(message[:2], "big")]
        try:
            dns_view = parse_dns_qname(message)
        except DnsParseError:
            dns_view = None

    return PacketRecord(
        index=index,
        timestamp=timestamp,
        ip_bytes=ip,
        src_addr=src_addr,
        dst_addr=dst_addr,
        transport=transport,
        src_port=src_port,
        dst_port=dst_port,
        app_payload=app_payload,
        dns_query=dns_view,
    )


def parse_capture_bytes(
    data: bytes, *, path: str = "<bytes>", dns_port: int = DNS_PORT
) -> Capture:
    """Parse an in-memory classic-pcap image. See read_capture."""
    if len(data) < 4:
        raise BadMagic(f"{path}: too short to hold a pcap magic number")
    try:
        endian, divisor = _MAGICS[data[:4]]
    except KeyError:
        raise BadMagic(f"{path}: unrecognized magic {data[:4].hex()}") from None
    if len(data) < 24:
        raise TruncatedRecord(f"{path}: global header truncated")
    linktype = struct.unpack(endian + "HHiIII", data[4:24])[5]

    packets: list[PacketRecord] = []
    skipped = 0
    index = 0
    pos = 24
    while pos < len(data):
        if len(data) - pos < 16:
            raise TruncatedRecord(f"{path}: record header truncated at offset {pos}")
        ts_sec, ts_sub, incl_len, _orig = struct.unpack(
            endian + "IIII", data[pos : pos + 16]
        )
        pos += 16
        if incl_len > len(data) - pos:
            raise TruncatedRecord(
                f"{path}: record {index} claims {incl_len} bytes, {len(data) - pos} remain"
            )
        frame = data[pos : pos + incl_len]
        pos += incl_len
        record = decode_packet(
            frame,
            linktype,
            index=index,
            timestamp=ts_sec + ts_sub / divisor,
            dns_port=dns_port,
        )
        if record is None:
            skipped += 1
        else:
            packets.append(record)
        index += 1
    return Capture(path=path, linktype=linktype, packets=packets, skipped=skipped)


def read_capture(path, *, dns_port: int = DNS_PORT) -> Capture:
    """Read a classic-pcap file into decoded PacketRecords plus a skip tally.

    Raises FileNotFoundError, BadMagic for an unrecognized magic number, and
    TruncatedRecord when a header claims more bytes than remain.
    """
    data = Path(path).read_bytes()
    return parse_capture_bytes(data, path=str(path), dns_port=dns_port)


def build_capture_bytes(
    frames: Iterable[tuple[float, bytes]],
    *,
    linktype: int = LINKTYPE_RAW_IP,
    snaplen: int = 65535,
) -> bytes:
    """Serialize (timestamp, frame) pairs as a little-endian microsecond pcap."""
    out = bytearray()
    out += struct.pack("<IHHiIII", PCAP_MAGIC_USEC, 2, 4, 0, 0, snaplen, linktype)
    for ts, frame in frames:
        sec = int(ts)
        usec = int(round((ts - sec) * 1_000_000))
        if usec >= 1_000_000:
            sec += 1
            usec -= 1_000_000
        out += struct.pack("<IIII", sec, usec, len(frame), len(frame))
        out += frame
    return bytes(out)


def write_capture(
    path,
    frames: Iterable[tuple[float, bytes]],
    *,
    linktype: int = LINKTYPE_RAW_IP,
    snaplen: int = 65535,
) -> None:
    Path(path).write_bytes(build_capture_bytes(frames, linktype=linktype, snaplen=snaplen))
