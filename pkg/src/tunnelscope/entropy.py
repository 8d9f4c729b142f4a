"""Per-packet Shannon entropy and entropy-series extraction.

Entropy is measured in bits per byte symbol over the 256-value byte
alphabet, so every value lands in [0, 8]. A series is extracted from a
decoded capture at one of three abstraction levels, each with its own
packet filter and measured byte view:

  app-request  packets to the service port that carry application payload;
               entropy over the transport payload bytes
  ip-client    client-side packets (destination service port, or an explicit
               client address); entropy over the whole IPv4 datagram, so
               header-only ACKs contribute too
  dns-qname    packets to the DNS port whose payload parses as a DNS
               question; entropy over the presentation-form query name
"""

from __future__ import annotations

import csv
import enum
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .capture import PacketRecord
from .errors import EmptyInput, InvalidFormat, NoMatchingPackets

SERIES_CSV_HEADER = ("packet_index", "entropy_bits")


def shannon_entropy(data: bytes) -> float:
    """Shannon entropy of *data* in bits per byte symbol.

    H = -sum(p_i * log2(p_i)) where p_i is the relative frequency of byte
    value i. Exactly 0.0 for a single-symbol input and exactly 8.0 for a
    uniform distribution over all 256 byte values. Raises EmptyInput.
    """
    if not data:
        raise EmptyInput("cannot compute entropy of an empty byte view")
    n = len(data)
    h = 0.0
    # Summation in byte-value order keeps the result exactly permutation
    # invariant (same terms, same order, same rounding).
    for _, count in sorted(Counter(data).items()):
        p = count / n
        h -= p * math.log2(p)
    return h


class LevelKind(enum.Enum):
    APP_REQUEST = "app-request"
    IP_CLIENT = "ip-client"
    DNS_QNAME = "dns-qname"


@dataclass(frozen=True)
class AbstractionLevel:
    """Which byte view entropy is measured over, plus its packet filter.

    port is the destination service port for app-request and the ip-client
    direction heuristic, or the DNS port for dns-qname. client_addr, when
    set on ip-client, selects by source address instead of the port
    heuristic.
    """

    kind: LevelKind
    port: int
    client_addr: Optional[str] = None

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} outside [1, 65535]")
        if self.client_addr is not None and self.kind is not LevelKind.IP_CLIENT:
            raise ValueError("client_addr only applies to the ip-client level")

    @classmethod
    def app_request(cls, service_port: int = 80) -> "AbstractionLevel":
        return cls(LevelKind.APP_REQUEST, service_port)

    @classmethod
    def ip_client(
        cls, service_port: int = 80, client_addr: Optional[str] = None
    ) -> "AbstractionLevel":
        return cls(LevelKind.IP_CLIENT, service_port, client_addr)

    @classmethod
    def dns_qname(cls, dns_port: int = 53) -> "AbstractionLevel":
        return cls(LevelKind.DNS_QNAME, dns_port)

    def describe(self) -> str:
        suffix = f"@{self.client_addr}" if self.client_addr else f":{self.port}"
        return f"{self.kind.value}{suffix}"

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "port": self.port, "client_addr": self.client_addr}

    @classmethod
    def from_dict(cls, obj: dict) -> "AbstractionLevel":
        try:
            return cls(LevelKind(obj["kind"]), int(obj["port"]), obj.get("client_addr"))
        except (KeyError, ValueError, TypeError) as exc:
            raise InvalidFormat(f"bad abstraction level record: {exc}") from None


@dataclass(frozen=True)
class EntropySeries:
    """Ordered per-packet entropy values for one capture at one level.

    points holds (packet_index, entropy_bits) pairs; indices refer to the
    source capture and increase strictly.
    """

    level: AbstractionLevel
    points: tuple[tuple[int, float], ...]
    source: str = ""
    label: Optional[str] = None

    def __post_init__(self):
        last = -1
        for idx, bits in self.points:
            if idx <= last:
                raise ValueError("packet_index values must increase strictly")
            if not 0.0 <= bits <= 8.0 + 1e-9:
                raise ValueError(f"entropy {bits} outside [0, 8]")
            last = idx

    def __len__(self) -> int:
        return len(self.points)

    def values(self) -> list[float]:
        return [bits for _, bits in self.points]


def _measured_view(packet: PacketRecord, level: AbstractionLevel) -> Optional[bytes]:
    if level.kind is LevelKind.APP_REQUEST:
        if packet.dst_port == level.port and packet.app_payload:
            return packet.app_payload
    elif level.kind is LevelKind.IP_CLIENT:
        if level.client_addr is not None:
            if packet.src_addr == level.client_addr:
                return packet.ip_bytes
        elif packet.dst_port == level.port:
            return packet.ip_bytes
    else:
        # Root (empty) query names carry no measurable bytes and are
        # excluded along with non-DNS payloads.
        if (
            packet.dst_port == level.port
            and packet.dns_query is not None
            and packet.dns_query.qname_presentation
        ):
            return packet.dns_query.qname_presentation
    return None


def extract_series(
    packets: Iterable[PacketRecord],
    level: AbstractionLevel,
    *,
    source: str = "",
    label: Optional[str] = None,
) -> EntropySeries:
    """Filter *packets* by the level's predicate and measure each survivor.

    Output preserves capture order and keeps the source packet indices.
    Raises NoMatchingPackets when nothing survives the filter.
    """
    points = []
    for packet in packets:
        view = _measured_view(packet, level)
        if view is not None:
            points.append((packet.index, shannon_entropy(view)))
    if not points:
        raise NoMatchingPackets(f"no packets matched {level.describe()}")
    return EntropySeries(level=level, points=tuple(points), source=source, label=label)


def series_to_csv(series: EntropySeries) -> str:
    """CSV text: packet_index,entropy_bits rows at 12 significant digits."""
    lines = [",".join(SERIES_CSV_HEADER)]
    for idx, bits in series.points:
        lines.append(f"{idx},{bits:.12g}")
    return "\n".join(lines) + "\n"


def write_series_csv(series: EntropySeries, path) -> None:
    Path(path).write_text(series_to_csv(series), encoding="ascii")


def read_series_points(path) -> list[tuple[int, float]]:
    """Parse a series CSV back into (packet_index, entropy_bits) pairs."""
    with open(path, newline="", encoding="ascii") as fp:
        rows = list(csv.reader(fp))
    if not rows or tuple(rows[0]) != SERIES_CSV_HEADER:
        raise InvalidFormat(f"{path}: missing '{','.join(SERIES_CSV_HEADER)}' header")
    points = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            points.append((int(row[0]), float(row[1])))
        except (ValueError, IndexError) as exc:
            raise InvalidFormat(f"{path}:{lineno}: {exc}") from None
    return points
