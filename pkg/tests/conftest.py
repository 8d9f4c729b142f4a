import pytest

from tunnelscope import corpus
from tunnelscope.classifier import GroundTruthProfile
from tunnelscope.entropy import AbstractionLevel, extract_series
from tunnelscope.capture import read_capture
from tunnelscope.tunnel import Codec, RecordType, TunnelConfig, synthesize_capture

# Tunnel settings shared by the synthetic experiments. The short suffix
# leaves room for the widest fragment/codec combinations within the
# 255-octet name bound; compression stays off so payload byte structure
# survives into the query names.
CORPUS_TUNNEL = TunnelConfig(
    codec=Codec.BASE128,
    record_type=RecordType.NULL,
    domain_suffix="t.ex",
    fragment_size=110,
    compress=False,
)

TERSE, RICH = "TERSE", "RICH"


def build_corpus(root, *, tests_per_class: int = 10):
    """Plain captures + profiles + tunneled test captures + manifest.

    Two payload regimes with well-separated byte entropy: terse repetitive
    command traffic vs long mixed-content traffic.
    """
    root.mkdir(parents=True, exist_ok=True)
    plain_terse = corpus.terse_command_capture(root / "plain_terse.pcap", packets=40, seed=101, port=21)
    plain_rich = corpus.header_rich_capture(root / "plain_rich.pcap", packets=40, seed=202, port=80)

    profiles = {}
    for label, path, port in ((TERSE, plain_terse, 21), (RICH, plain_rich, 80)):
        capture = read_capture(path)
        series = extract_series(
            capture.packets, AbstractionLevel.ip_client(port), source=str(path), label=label
        )
        profile = GroundTruthProfile.from_series(label, series)
        profile.save(root / f"{label.lower()}.profile.json")
        profiles[label] = profile

    manifest = root / "manifest.csv"
    manifest.write_text("# synthetic two-class corpus\n", encoding="ascii")
    for i in range(tests_per_class):
        terse_plain = corpus.terse_command_capture(
            root / f"test_terse_{i}.pcap", packets=25 + i, seed=1000 + i, port=21
        )
        synthesize_capture(
            terse_plain, CORPUS_TUNNEL, root / f"tun_terse_{i}.pcap",
            "10.9.0.2", "10.9.0.1", label=TERSE, manifest_path=manifest,
        )
        rich_plain = corpus.header_rich_capture(
            root / f"test_rich_{i}.pcap", packets=25 + i, seed=2000 + i, port=80
        )
        synthesize_capture(
            rich_plain, CORPUS_TUNNEL, root / f"tun_rich_{i}.pcap",
            "10.9.0.2", "10.9.0.1", label=RICH, manifest_path=manifest,
        )
    return {
        "root": root,
        "manifest": manifest,
        "profiles": profiles,
        "profile_paths": {
            TERSE: root / "terse.profile.json",
            RICH: root / "rich.profile.json",
        },
        "plain": {TERSE: plain_terse, RICH: plain_rich},
    }


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"))
