"""Synthetic plain-traffic generators with controllable entropy regimes.

Used by the test suite and the experiment scripts to stand in for real
ground-truth captures: one builder emits terse, highly repetitive command
payloads (low byte entropy), the other emits long mixed-content payloads
(high byte entropy). Both write client-to-server TCP traffic only, so the
whole capture is "client side" by construction.
"""

from __future__ import annotations

import random
from typing import Sequence

from .capture import write_capture
from .wire import TCP_FLAG_ACK, TCP_FLAG_PSH, tcp_packet

CLIENT_ADDR = "10.0.0.2"
SERVER_ADDR = "10.0.0.9"


def write_client_capture(
    path,
    payloads: Sequence[bytes],
    *,
    client: str = CLIENT_ADDR,
    server: str = SERVER_ADDR,
    port: int = 80,
    start_time: float = 1_700_000_000.0,
    gap: float = 0.05,
    sport: int = 40000,
) -> str:
    """One TCP segment per payload, client -> server, fixed inter-packet gap.

    An empty payload produces a bare ACK segment (header-only), matching
    what a real client emits between requests.
    """
    frames = []
    ts = start_time
    tcp_seq = 1
    for i, payload in enumerate(payloads):
        flags = TCP_FLAG_ACK | (TCP_FLAG_PSH if payload else 0)
        frames.append(
            (ts, tcp_packet(client, server, sport, port, payload,
                            seq=tcp_seq, ack=1, flags=flags, ident=i))
        )
        tcp_seq += len(payload)
        ts += gap
    write_capture(path, frames)
    return str(path)


def terse_payloads(count: int, seed: int = 0) -> list[bytes]:
    """Short command-style payloads built from a tiny byte alphabet."""
    rng = random.Random(seed)
    verbs = [b"get", b"put", b"dir", b"del"]
    out = []
    for _ in range(count):
        verb = rng.choice(verbs)
        filler = bytes([rng.choice(b"aa0")]) * rng.randint(120, 220)
        out.append(verb + b" " + filler + b"\r\n")
    return out


def rich_payloads(count: int, seed: int = 0) -> list[bytes]:
    """Long payloads of near-uniform random bytes."""
    rng = random.Random(seed)
    return [rng.randbytes(rng.randint(400, 900)) for _ in range(count)]


def terse_command_capture(path, *, packets: int = 40, seed: int = 0,
                          port: int = 21, **kwargs) -> str:
    return write_client_capture(path, terse_payloads(packets, seed), port=port, **kwargs)


def header_rich_capture(path, *, packets: int = 40, seed: int = 0,
                        port: int = 80, **kwargs) -> str:
    return write_client_capture(path, rich_payloads(packets, seed), port=port, **kwargs)
