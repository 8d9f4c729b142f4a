#!/usr/bin/env python3
"""Regenerate the committed golden fixtures under tests/data/.

Run only when the name layout or pcap dialect changes intentionally; the
fidelity tests compare against these bytes exactly. The golden tunnel runs
with compression off so the output does not depend on the zlib build.
"""

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from tunnelscope.capture import read_capture  # noqa: E402
from tunnelscope.corpus import write_client_capture  # noqa: E402
from tunnelscope.tunnel import Codec, RecordType, TunnelConfig, synthesize_capture  # noqa: E402

DATA = REPO / "tests" / "data"

GOLDEN_PAYLOADS = [
    b"list stats\r\n",
    b"A" * 64,
    bytes(range(48)),
    b"the quick brown fox jumps over the lazy dog " * 2,
    b"\xde\xad\xbe\xef" * 16,
]

GOLDEN_TUNNEL = TunnelConfig(
    codec=Codec.BASE32,
    record_type=RecordType.NULL,
    domain_suffix="t.example.com",
    fragment_size=40,
    compress=False,
)


def main() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    plain = DATA / "golden_plain.pcap"
    write_client_capture(plain, GOLDEN_PAYLOADS, port=21, start_time=1_700_000_000.0, gap=0.25)
    tunneled = DATA / "golden_tunneled.pcap"
    summary = synthesize_capture(plain, GOLDEN_TUNNEL, tunneled, "10.9.0.2", "10.9.0.1")

    names = [
        packet.dns_query.qname_presentation.decode("ascii")
        for packet in read_capture(tunneled).packets
    ]
    (DATA / "golden_qnames.txt").write_text("\n".join(names) + "\n", encoding="ascii")
    print(f"wrote {plain}")
    print(f"wrote {tunneled} ({summary.queries_written} queries)")
    print(f"wrote {DATA / 'golden_qnames.txt'} ({len(names)} names)")


if __name__ == "__main__":
    main()
