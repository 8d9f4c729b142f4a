"""Byte-level builders for IPv4/UDP/TCP packets and DNS query messages.

Everything here is plain struct packing over immutable inputs; nothing
touches the network. TCP checksums are left zero (we only ever read these
packets back with our own decoder), IP header checksums are computed.
"""

from __future__ import annotations

import socket
import struct
from typing import Sequence

ETHERTYPE_IPV4 = 0x0800
LINKTYPE_ETHERNET = 1
LINKTYPE_RAW_IP = 101
PROTO_TCP = 6
PROTO_UDP = 17

TCP_FLAG_ACK = 0x10
TCP_FLAG_PSH = 0x08


def checksum16(data: bytes) -> int:
    """RFC 1071 ones-complement sum over 16-bit words."""
    if len(data) % 2:
        data += b"\x00"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def ipv4_packet(
    src: str,
    dst: str,
    proto: int,
    payload: bytes,
    *,
    ident: int = 0,
    ttl: int = 64,
    df: bool = True,
) -> bytes:
    """A 20-byte-header IPv4 datagram (no options) around *payload*."""
    total = 20 + len(payload)
    if total > 0xFFFF:
        raise ValueError(f"payload too large for one IPv4 datagram: {len(payload)}")
    flags_frag = 0x4000 if df else 0
    header = struct.pack(
        "!BBHHHBBH4s4s",
        0x45,
        0,
        total,
        ident & 0xFFFF,
        flags_frag,
        ttl,
        proto,
        0,
        socket.inet_aton(src),
        socket.inet_aton(dst),
    )
    header = header[:10] + struct.pack("!H", checksum16(header)) + header[12:]
    return header + payload


def udp_packet(
    src: str, dst: str, sport: int, dport: int, payload: bytes, *, ident: int = 0
) -> bytes:
    # UDP checksum 0 is "not computed", which is legal over IPv4.
    udp = struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload
    return ipv4_packet(src, dst, PROTO_UDP, udp, ident=ident)


def tcp_packet(
    src: str,
    dst: str,
    sport: int,
    dport: int,
    payload: bytes = b"",
    *,
    seq: int = 0,
    ack: int = 0,
    flags: int = TCP_FLAG_ACK,
    ident: int = 0,
) -> bytes:
    offset_flags = (5 << 12) | (flags & 0x3F)
    tcp = (
        struct.pack(
            "!HHIIHHHH",
            sport,
            dport,
            seq & 0xFFFFFFFF,
            ack & 0xFFFFFFFF,
            offset_flags,
            65535,
            0,
            0,
        )
        + payload
    )
    return ipv4_packet(src, dst, PROTO_TCP, tcp, ident=ident)


def ethernet_frame(
    ip_packet: bytes,
    *,
    ethertype: int = ETHERTYPE_IPV4,
    dst_mac: bytes = b"\x02\x00\x00\x00\x00\x02",
    src_mac: bytes = b"\x02\x00\x00\x00\x00\x01",
) -> bytes:
    return dst_mac + src_mac + struct.pack("!H", ethertype) + ip_packet


def qname_wire(labels: Sequence[bytes]) -> bytes:
    """Wire-format name: length-prefixed labels, root terminator."""
    out = bytearray()
    for label in labels:
        if not 1 <= len(label) <= 63:
            raise ValueError(f"label length {len(label)} outside [1, 63]")
        out.append(len(label))
        out += label
    out.append(0)
    if len(out) > 255:
        raise ValueError(f"wire-format name is {len(out)} octets (max 255)")
    return bytes(out)


def dns_query(
    labels: Sequence[bytes],
    qtype: int,
    *,
    msg_id: int = 0,
    recursion_desired: bool = True,
) -> bytes:
    """A one-question DNS query message (QCLASS IN)."""
    flags = 0x0100 if recursion_desired else 0
    header = struct.pack("!HHHHHH", msg_id & 0xFFFF, flags, 1, 0, 0, 0)
    return header + qname_wire(labels) + struct.pack("!HH", qtype, 1)
