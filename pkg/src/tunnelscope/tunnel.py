"""Iodine-style DNS tunnel synthesis and decoding.

Upstream pipeline: the raw IPv4 packet is optionally GZIP-compressed,
split into fragments of at most fragment_size bytes, and each fragment
becomes one DNS query whose name is

    <header text><payload text>            chunked into labels of <= 63
    .<domain suffix>                       bytes, then the suffix appended

where both texts come from the active codec (base32, base64, base128).
The decoder reverses each step and reassembles fragments by number.

Name-field header (13 bytes, text-encoded with the active codec, so the
encoded header is a fixed-length, alphabet-safe prefix):

    offset  field
    0       user_id (0..15)
    1       codec id (1=base32, 2=base64, 3=base128)
    2       flags (bit 0: payload is GZIP-compressed)
    3..4    fragment_size, big endian
    5..6    fragment_number, big endian
    7..10   sequence_number, big endian
    11..12  cache_miss_counter, big endian

Base32/base64 use the RFC 4648 alphabets without padding. Base128 packs 7
bits per symbol into a fixed 128-byte alphabet: the 64 hostname-safe bytes
[a-z A-Z 0-9 - _] followed by the 64 high-bit bytes 0xc0..0xff.

Downstream payloads are GZIP bytes as-is for NULL/PRIVATE records; for any
other record type they are prefixed with one ASCII codec marker ('T'
base32, 'S' base64, 'V' base128) followed by the codec-encoded GZIP bytes.

A "ping" is a keep-alive query whose name is the encoded header alone, with
no payload text; the decoder recognizes pings by that length and skips
them. None of this claims wire compatibility with any real tunneling tool;
the layout is fixed so synthesized corpora are deterministic.
"""

from __future__ import annotations

import base64
import binascii
import enum
import gzip
import struct
import zlib
from dataclasses import dataclass
from typing import Optional, Sequence

from .capture import parse_dns_qname, read_capture, write_capture
from .errors import (
    AlphabetViolation,
    DecompressFailure,
    EmptyInput,
    HeaderMismatch,
    MissingFragment,
    NameOverflow,
)
from .wire import LINKTYPE_RAW_IP, dns_query, udp_packet


class Codec(enum.Enum):
    BASE32 = "base32"
    BASE64 = "base64"
    BASE128 = "base128"


class RecordType(enum.Enum):
    NULL = "null"
    TXT = "txt"
    CNAME = "cname"
    A = "a"
    MX = "mx"
    SRV = "srv"
    PRIVATE = "private"


RECORD_QTYPE = {
    RecordType.NULL: 10,
    RecordType.TXT: 16,
    RecordType.CNAME: 5,
    RecordType.A: 1,
    RecordType.MX: 15,
    RecordType.SRV: 33,
    RecordType.PRIVATE: 65399,  # private-use qtype range
}

CODEC_ID = {Codec.BASE32: 1, Codec.BASE64: 2, Codec.BASE128: 3}
_ID_CODEC = {v: k for k, v in CODEC_ID.items()}

DOWNSTREAM_CODEC_CHAR = {Codec.BASE32: b"T", Codec.BASE64: b"S", Codec.BASE128: b"V"}

_B32_ALPHABET = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ234567"
_B64_ALPHABET = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/"
BASE128_ALPHABET = (
    b"abcdefghijklmnopqrstuvwxyz"
    b"ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    b"0123456789-_" + bytes(range(0xC0, 0x100))
)
assert len(BASE128_ALPHABET) == 128 and len(set(BASE128_ALPHABET)) == 128

_B128_INDEX = [-1] * 256
for _i, _b in enumerate(BASE128_ALPHABET):
    _B128_INDEX[_b] = _i

_ALPHABETS = {
    Codec.BASE32: frozenset(_B32_ALPHABET),
    Codec.BASE64: frozenset(_B64_ALPHABET),
    Codec.BASE128: frozenset(BASE128_ALPHABET),
}

MAX_LABEL = 63
MAX_NAME_WIRE = 255


def _check_alphabet(text: bytes, codec: Codec) -> None:
    alphabet = _ALPHABETS[codec]
    for pos, b in enumerate(text):
        if b not in alphabet:
            raise AlphabetViolation(
                f"byte 0x{b:02x} at offset {pos} is not in the {codec.value} alphabet"
            )


def _b128_encode(data: bytes) -> bytes:
    out = bytearray()
    acc = 0
    nbits = 0
    for byte in data:
        acc = (acc << 8) | byte
        nbits += 8
        while nbits >= 7:
            nbits -= 7
            out.append(BASE128_ALPHABET[(acc >> nbits) & 0x7F])
    if nbits:
        out.append(BASE128_ALPHABET[(acc << (7 - nbits)) & 0x7F])
    return bytes(out)


def _b128_decode(text: bytes) -> bytes:
    out = bytearray()
    acc = 0
    nbits = 0
    for byte in text:
        acc = (acc << 7) | _B128_INDEX[byte]
        nbits += 7
        if nbits >= 8:
            nbits -= 8
            out.append((acc >> nbits) & 0xFF)
    return bytes(out)


def basen_encode(data: bytes, codec: Codec) -> bytes:
    """Codec-encode raw bytes to alphabet text (no padding characters)."""
    if not data:
        return b""
    if codec is Codec.BASE32:
        return base64.b32encode(data).rstrip(b"=")
    if codec is Codec.BASE64:
        return base64.b64encode(data).rstrip(b"=")
    return _b128_encode(data)


def basen_decode(text: bytes, codec: Codec) -> bytes:
    """Inverse of basen_encode; raises AlphabetViolation on foreign bytes."""
    if not text:
        return b""
    _check_alphabet(text, codec)
    if codec is Codec.BASE32:
        if len(text) % 8 in (1, 3, 6):
            raise AlphabetViolation(f"impossible unpadded base32 length {len(text)}")
        try:
            return base64.b32decode(text + b"=" * (-len(text) % 8))
        except binascii.Error as exc:
            raise AlphabetViolation(str(exc)) from None
    if codec is Codec.BASE64:
        if len(text) % 4 == 1:
            raise AlphabetViolation(f"impossible unpadded base64 length {len(text)}")
        try:
            return base64.b64decode(text + b"=" * (-len(text) % 4), validate=True)
        except binascii.Error as exc:
            raise AlphabetViolation(str(exc)) from None
    return _b128_decode(text)


_HEADER_STRUCT = struct.Struct("!BBBHHIH")
HEADER_LEN = _HEADER_STRUCT.size  # 13 bytes


@dataclass(frozen=True)
class TunnelHeader:
    """Per-query metadata carried at the front of the name field."""

    user_id: int
    codec_id: int
    fragment_size: int
    fragment_number: int
    sequence_number: int
    compressed: bool
    cache_miss_counter: int

    def __post_init__(self):
        if not 0 <= self.user_id <= 15:
            raise ValueError(f"user_id {self.user_id} outside [0, 15]")
        if self.codec_id not in _ID_CODEC:
            raise ValueError(f"unknown codec id {self.codec_id}")
        for name, value, limit in (
            ("fragment_size", self.fragment_size, 0xFFFF),
            ("fragment_number", self.fragment_number, 0xFFFF),
            ("sequence_number", self.sequence_number, 0xFFFFFFFF),
            ("cache_miss_counter", self.cache_miss_counter, 0xFFFF),
        ):
            if not 0 <= value <= limit:
                raise ValueError(f"{name} {value} outside [0, {limit}]")

    def pack(self) -> bytes:
        return _HEADER_STRUCT.pack(
            self.user_id,
            self.codec_id,
            1 if self.compressed else 0,
            self.fragment_size,
            self.fragment_number,
            self.sequence_number,
            self.cache_miss_counter,
        )

    @classmethod
    def unpack(cls, raw: bytes) -> "TunnelHeader":
        if len(raw) != HEADER_LEN:
            raise HeaderMismatch(f"header is {len(raw)} bytes, expected {HEADER_LEN}")
        user_id, codec_id, flags, frag_size, frag_num, seq, cmc = _HEADER_STRUCT.unpack(raw)
        try:
            return cls(user_id, codec_id, frag_size, frag_num, seq, bool(flags & 1), cmc)
        except ValueError as exc:
            raise HeaderMismatch(str(exc)) from None


def header_text_len(codec: Codec) -> int:
    """Length of the encoded header prefix; fixed for a given codec."""
    return len(basen_encode(b"\x00" * HEADER_LEN, codec))


def _split_suffix(domain_suffix: str) -> tuple[bytes, ...]:
    labels = tuple(part.encode("ascii") for part in domain_suffix.split("."))
    for label in labels:
        if not 1 <= len(label) <= MAX_LABEL:
            raise ValueError(f"domain suffix label {label!r} outside [1, 63] bytes")
    return labels


@dataclass(frozen=True)
class TunnelConfig:
    """Knobs for the synthesizer: codec, carrier record, name layout."""

    codec: Codec = Codec.BASE128
    record_type: RecordType = RecordType.NULL
    domain_suffix: str = "t.example.com"
    fragment_size: int = 100
    compress: bool = True
    dns_port: int = 53

    def __post_init__(self):
        _split_suffix(self.domain_suffix)
        if not 1 <= self.fragment_size <= 0xFFFF:
            raise ValueError(f"fragment_size {self.fragment_size} outside [1, 65535]")
        if not 1 <= self.dns_port <= 65535:
            raise ValueError(f"dns_port {self.dns_port} outside [1, 65535]")

    @property
    def suffix_labels(self) -> tuple[bytes, ...]:
        return _split_suffix(self.domain_suffix)


def _chunk_labels(text: bytes) -> list[bytes]:
    return [text[i : i + MAX_LABEL] for i in range(0, len(text), MAX_LABEL)]


def _data_labels(text: bytes, cfg: TunnelConfig) -> list[bytes]:
    labels = _chunk_labels(text) + list(cfg.suffix_labels)
    wire = sum(1 + len(label) for label in labels) + 1
    if wire > MAX_NAME_WIRE:
        raise NameOverflow(
            f"name would be {wire} octets (max {MAX_NAME_WIRE}); lower fragment_size"
        )
    return labels


def _gzip(data: bytes) -> bytes:
    return gzip.compress(data, mtime=0)


def _gunzip(data: bytes) -> bytes:
    try:
        return gzip.decompress(data)
    except (OSError, EOFError, zlib.error) as exc:
        raise DecompressFailure(str(exc)) from None


def _header_for(cfg: TunnelConfig, fragment_number: int, seq: int) -> TunnelHeader:
    return TunnelHeader(
        user_id=0,
        codec_id=CODEC_ID[cfg.codec],
        fragment_size=cfg.fragment_size,
        fragment_number=fragment_number,
        sequence_number=seq,
        compressed=cfg.compress,
        cache_miss_counter=0,
    )


def encode_upstream(ip_packet: bytes, cfg: TunnelConfig, seq: int) -> list[bytes]:
    """Encode one IP packet as an ordered list of DNS query messages.

    All queries share sequence number *seq*; fragment numbers count up from
    0. Raises NameOverflow when an encoded fragment cannot fit the 255-octet
    name bound with the configured suffix.
    """
    if not ip_packet:
        raise EmptyInput("refusing to tunnel an empty packet")
    data = _gzip(ip_packet) if cfg.compress else ip_packet
    queries = []
    for num in range(0, len(data), cfg.fragment_size):
        fragment = data[num : num + cfg.fragment_size]
        fragment_number = num // cfg.fragment_size
        header = _header_for(cfg, fragment_number, seq)
        text = basen_encode(header.pack(), cfg.codec) + basen_encode(fragment, cfg.codec)
        labels = _data_labels(text, cfg)
        msg_id = (seq * 31 + fragment_number) & 0xFFFF
        queries.append(
            dns_query(labels, RECORD_QTYPE[cfg.record_type], msg_id=msg_id)
        )
    return queries


def ping_query(cfg: TunnelConfig, seq: int) -> bytes:
    """A keep-alive query: encoded header only, no payload text."""
    header = _header_for(cfg, 0, seq)
    text = basen_encode(header.pack(), cfg.codec)
    return dns_query(_data_labels(text, cfg), RECORD_QTYPE[cfg.record_type], msg_id=seq & 0xFFFF)


def _query_text(wire: bytes, cfg: TunnelConfig) -> bytes:
    view = parse_dns_qname(wire)
    labels = list(view.qname_labels)
    suffix = list(cfg.suffix_labels)
    if len(labels) <= len(suffix) or labels[-len(suffix):] != suffix:
        raise HeaderMismatch(
            f"query name does not end in the configured suffix {cfg.domain_suffix!r}"
        )
    return b"".join(labels[: -len(suffix)])


def decode_upstream(queries: Sequence[bytes], cfg: TunnelConfig) -> bytes:
    """Reassemble the original IP packet from encode_upstream's queries.

    Ping (header-only) queries are skipped. Raises MissingFragment for
    reassembly gaps, HeaderMismatch for inconsistent metadata, and
    DecompressFailure when the compressed flag lies.
    """
    if not queries:
        raise EmptyInput("no queries to decode")
    hlen = header_text_len(cfg.codec)
    fragments: dict[int, bytes] = {}
    seq: Optional[int] = None
    compressed: Optional[bool] = None
    for wire in queries:
        text = _query_text(wire, cfg)
        if len(text) < hlen:
            raise HeaderMismatch(f"name text shorter than the {hlen}-byte header prefix")
        header = TunnelHeader.unpack(basen_decode(text[:hlen], cfg.codec))
        if header.codec_id != CODEC_ID[cfg.codec]:
            raise HeaderMismatch(
                f"header says codec {_ID_CODEC[header.codec_id].value}, config says {cfg.codec.value}"
            )
        if len(text) == hlen:
            continue  # keep-alive ping
        if seq is None:
            seq = header.sequence_number
            compressed = header.compressed
        elif header.sequence_number != seq:
            raise HeaderMismatch(
                f"mixed sequence numbers {seq} and {header.sequence_number}"
            )
        if header.compressed != compressed:
            raise HeaderMismatch("inconsistent compression flags across fragments")
        if header.fragment_number in fragments:
            raise HeaderMismatch(f"duplicate fragment number {header.fragment_number}")
        fragments[header.fragment_number] = basen_decode(text[hlen:], cfg.codec)
    if not fragments:
        raise MissingFragment("only ping queries present, no data fragments")
    count = max(fragments) + 1
    for number in range(count):
        if number not in fragments:
            raise MissingFragment(f"fragment {number} of {count} missing")
    blob = b"".join(fragments[number] for number in range(count))
    return _gunzip(blob) if compressed else blob


def encode_downstream(ip_packet: bytes, cfg: TunnelConfig) -> bytes:
    """Resource-record payload for the server-to-client direction.

    NULL/PRIVATE carry raw GZIP bytes; every other record type gets a
    one-byte ASCII codec marker followed by codec-encoded GZIP bytes.
    """
    if not ip_packet:
        raise EmptyInput("refusing to tunnel an empty packet")
    blob = _gzip(ip_packet)
    if cfg.record_type in (RecordType.NULL, RecordType.PRIVATE):
        return blob
    return DOWNSTREAM_CODEC_CHAR[cfg.codec] + basen_encode(blob, cfg.codec)


def decode_downstream(payload: bytes, cfg: TunnelConfig) -> bytes:
    if cfg.record_type in (RecordType.NULL, RecordType.PRIVATE):
        return _gunzip(payload)
    marker = DOWNSTREAM_CODEC_CHAR[cfg.codec]
    if payload[:1] != marker:
        raise HeaderMismatch(
            f"expected codec marker {marker!r}, found {payload[:1]!r}"
        )
    return _gunzip(basen_decode(payload[1:], cfg.codec))


DNS_CLIENT_PORT = 49152  # fixed synthetic ephemeral port


@dataclass
class SynthesisSummary:
    out_path: str
    packets_tunneled: int
    queries_written: int
    pings_written: int


def synthesize_capture(
    plain_capture,
    cfg: TunnelConfig,
    out_path,
    client_addr: str,
    server_addr: str,
    *,
    label: Optional[str] = None,
    manifest_path=None,
    ping_interval: Optional[float] = None,
    source_addr: Optional[str] = None,
    start_seq: int = 0,
) -> SynthesisSummary:
    """Tunnel a plain capture into a synthetic DNS-query capture.

    Every decoded IP packet of *plain_capture* (optionally restricted to
    source_addr) is encoded with encode_upstream and written as UDP queries
    from client_addr to server_addr on cfg.dns_port, one sequence number per
    source packet, preserving source timestamps. With ping_interval set,
    keep-alive queries fill idle gaps between consecutive source packets.

    When manifest_path is given a `path,label,codec,record_type` line is
    appended for the evaluation batch runner; *label* is required then.
    """
    if manifest_path is not None and label is None:
        raise ValueError("label is required when appending to a manifest")
    source = read_capture(plain_capture)
    frames: list[tuple[float, bytes]] = []
    seq = start_seq
    ident = 0
    tunneled = 0
    pings = 0
    prev_ts: Optional[float] = None
    for packet in source.packets:
        if source_addr is not None and packet.src_addr != source_addr:
            continue
        if ping_interval is not None and prev_ts is not None:
            ts = prev_ts + ping_interval
            while ts < packet.timestamp - 1e-9:
                frames.append(
                    (ts, udp_packet(client_addr, server_addr, DNS_CLIENT_PORT,
                                    cfg.dns_port, ping_query(cfg, seq), ident=ident))
                )
                seq += 1
                ident += 1
                pings += 1
                ts += ping_interval
        for query in encode_upstream(packet.ip_bytes, cfg, seq):
            frames.append(
                (packet.timestamp,
                 udp_packet(client_addr, server_addr, DNS_CLIENT_PORT,
                            cfg.dns_port, query, ident=ident))
            )
            ident += 1
        seq += 1
        tunneled += 1
        prev_ts = packet.timestamp
    write_capture(out_path, frames, linktype=LINKTYPE_RAW_IP)
    if manifest_path is not None:
        line = f"{out_path},{label},{cfg.codec.value},{cfg.record_type.value}\n"
        with open(manifest_path, "a", encoding="ascii") as fp:
            fp.write(line)
    return SynthesisSummary(
        out_path=str(out_path),
        packets_tunneled=tunneled,
        queries_written=len(frames) - pings,
        pings_written=pings,
    )
