"""Acceptance suite: one test per shipping criterion.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
PASS/FAIL lines. Every tolerance and runtime bound is pinned here.
"""

import functools
import math
import random
import time
from pathlib import Path

import numpy as np

from tunnelscope.capture import parse_dns_qname, read_capture
from tunnelscope.classifier import GroundTruthProfile, SamplingPolicy, score_against
from tunnelscope.cli import main
from tunnelscope.entropy import AbstractionLevel, EntropySeries, shannon_entropy
from tunnelscope.evaluation import confusion_matrix, metrics
from tunnelscope.tunnel import (
    Codec,
    RecordType,
    TunnelConfig,
    decode_upstream,
    encode_upstream,
    synthesize_capture,
)

DATA = Path(__file__).parent / "data"
LEVEL = AbstractionLevel.dns_qname()


def criterion(number, title):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            try:
                result = fn(*args, **kwargs)
            except BaseException:
                print(f"\n[criterion {number}] FAIL  {title}")
                raise
            print(f"\n[criterion {number}] PASS  {title}")
            return result

        return wrapper

    return decorate


def series_of(values, source="acceptance"):
    return EntropySeries(
        level=LEVEL, points=tuple((i, float(v)) for i, v in enumerate(values)), source=source
    )


@criterion(1, "entropy matches brute-force histogram oracle; exact endpoints")
def test_entropy_correctness():
    start = time.monotonic()
    rng = random.Random(0xACCE97)
    for _ in range(1000):
        data = rng.randbytes(rng.randint(1, 2000))
        histogram = [0] * 256
        for byte in data:
            histogram[byte] += 1
        oracle = 0.0
        for count in histogram:
            if count:
                p = count / len(data)
                oracle -= p * math.log(p) / math.log(2)
        assert abs(shannon_entropy(data) - oracle) < 1e-12
    assert shannon_entropy(bytes(range(256))) == 8.0
    assert shannon_entropy(b"\x7a" * 500) == 0.0
    assert time.monotonic() - start < 1.0


@criterion(2, "two-class batch arithmetic: matrix, accuracy, recall, precision")
def test_metric_arithmetic():
    start = time.monotonic()
    pairs = (
        [("HTTP", "HTTP")] * 5
        + [("HTTP", "FTP")] * 3
        + [("FTP", "HTTP")] * 2
        + [("FTP", "FTP")] * 10
    )
    cm = confusion_matrix(pairs)
    assert cm.count("HTTP", "HTTP") == 5
    assert cm.count("HTTP", "FTP") == 3
    assert cm.count("FTP", "HTTP") == 2
    assert cm.count("FTP", "FTP") == 10
    report = metrics(cm)
    assert report.accuracy == 0.75
    assert report.per_label["HTTP"].recall == 0.625
    assert abs(report.per_label["FTP"].recall - 0.8333) <= 0.0001
    assert abs(report.per_label["FTP"].precision - 0.7692) <= 0.0001
    assert abs(report.per_label["HTTP"].precision - 0.7143) <= 0.0001
    assert time.monotonic() - start < 1.0


@criterion(3, "sampled score converges to the exhaustive-window oracle")
def test_sampling_estimator_convergence():
    start = time.monotonic()
    policy = SamplingPolicy(rounds=100_000)

    def exhaustive(test_values, profile_values):
        window_len = max(1, math.floor(0.9 * len(profile_values)))
        width = min(window_len, len(test_values))
        starts = range(max(1, len(test_values) - window_len + 1))
        profile_mean = np.mean(profile_values)
        return float(
            np.mean([abs(np.mean(test_values[s : s + width]) - profile_mean) for s in starts])
        )

    cases = [
        ([1.0, 2.0, 3.0, 4.0, 5.0], [2.0, 2.0, 4.0, 4.0]),
    ]
    rng = random.Random(5150)
    for test_len, profile_len in [(50, 30), (47, 52), (33, 11), (50, 50)]:
        cases.append(
            (
                [rng.uniform(0, 8) for _ in range(test_len)],
                [rng.uniform(0, 8) for _ in range(profile_len)],
            )
        )
    for test_values, profile_values in cases:
        assert len(test_values) <= 50
        profile = GroundTruthProfile.from_series("P", series_of(profile_values))
        sampled = score_against(series_of(test_values), profile, policy)
        assert abs(sampled - exhaustive(test_values, profile_values)) < 0.01

    constant_profile = GroundTruthProfile.from_series("C", series_of([4.0] * 9))
    assert score_against(series_of([6.0] * 23), constant_profile, policy) == 2.0
    assert score_against(series_of([4.0] * 23), constant_profile, policy) == 0.0
    assert time.monotonic() - start < 10.0


@criterion(4, "codec round trips and name bounds over the full config grid")
def test_codec_round_trip_grid():
    start = time.monotonic()
    rng = random.Random(0x60D1)
    payload_count = 0
    for codec in Codec:
        for record_type in RecordType:
            for fragment_size in (1, 10, 100, 140):
                cfg = TunnelConfig(
                    codec=codec,
                    record_type=record_type,
                    domain_suffix="t.ex",
                    fragment_size=fragment_size,
                    compress=False,
                )
                cfg_gz = TunnelConfig(
                    codec=codec,
                    record_type=record_type,
                    domain_suffix="t.ex",
                    fragment_size=fragment_size,
                    compress=True,
                )
                lengths = [1, 4096] + [rng.randint(1, 4096) for _ in range(10)]
                for i, length in enumerate(lengths):
                    payload = rng.randbytes(length)
                    config = cfg_gz if i % 2 else cfg
                    queries = encode_upstream(payload, config, seq=i)
                    for query in queries:
                        view = parse_dns_qname(query)
                        assert all(1 <= len(label) <= 63 for label in view.qname_labels)
                        assert sum(1 + len(l) for l in view.qname_labels) + 1 <= 255
                    assert decode_upstream(queries, config) == payload
                    payload_count += 1
    assert payload_count >= 1000
    elapsed = time.monotonic() - start
    assert elapsed < 30.0


@criterion(5, "separable synthetic corpus classified at >= 0.9 accuracy end to end")
def test_end_to_end_separation(synthetic_corpus, tmp_path, capsys):
    start = time.monotonic()
    paths = synthetic_corpus["profile_paths"]
    report_path = tmp_path / "report.txt"
    code = main(
        [
            "evaluate",
            str(synthetic_corpus["manifest"]),
            str(paths["TERSE"]),
            str(paths["RICH"]),
            "--out",
            str(report_path),
            "--quiet",
        ]
    )
    assert code == 0
    report = report_path.read_text()
    accuracy = None
    for line in report.splitlines():
        if line.startswith("accuracy:"):
            accuracy = float(line.split(":")[1])
    assert accuracy is not None
    assert accuracy >= 0.9
    assert "captures: 20" in report
    assert time.monotonic() - start < 60.0


@criterion(6, "predict and evaluate reruns are byte-identical")
def test_determinism(synthetic_corpus, tmp_path):
    paths = synthetic_corpus["profile_paths"]
    test_capture = synthetic_corpus["root"] / "tun_rich_3.pcap"

    predictions = []
    for name in ("p1.txt", "p2.txt"):
        out = tmp_path / name
        assert main(["predict", str(test_capture), str(paths["TERSE"]), str(paths["RICH"]),
                     "--out", str(out), "--quiet"]) == 0
        predictions.append(out.read_bytes())
    assert predictions[0] == predictions[1]

    reports = []
    for name in ("e1.txt", "e2.txt"):
        out = tmp_path / name
        assert main(["evaluate", str(synthetic_corpus["manifest"]),
                     str(paths["TERSE"]), str(paths["RICH"]),
                     "--out", str(out), "--quiet"]) == 0
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]


@criterion(7, "synthesized capture round trip matches the committed golden files")
def test_pcap_fidelity_golden(tmp_path):
    golden_plain = DATA / "golden_plain.pcap"
    golden_tunneled = DATA / "golden_tunneled.pcap"
    golden_names = (DATA / "golden_qnames.txt").read_text(encoding="ascii").splitlines()

    cfg = TunnelConfig(
        codec=Codec.BASE32,
        record_type=RecordType.NULL,
        domain_suffix="t.example.com",
        fragment_size=40,
        compress=False,
    )
    regenerated = tmp_path / "tunneled.pcap"
    synthesize_capture(golden_plain, cfg, regenerated, "10.9.0.2", "10.9.0.1")
    assert regenerated.read_bytes() == golden_tunneled.read_bytes()

    capture = read_capture(golden_tunneled)
    read_back = [p.dns_query.qname_presentation.decode("ascii") for p in capture.packets]
    assert read_back == golden_names

    # independent route: encode each plain packet directly
    expected = []
    for seq, packet in enumerate(read_capture(golden_plain).packets):
        for query in encode_upstream(packet.ip_bytes, cfg, seq):
            expected.append(parse_dns_qname(query).qname_presentation.decode("ascii"))
    assert read_back == expected
