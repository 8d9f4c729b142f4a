import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tunnelscope import wire
from tunnelscope.capture import build_capture_bytes, parse_capture_bytes
from tunnelscope.entropy import (
    AbstractionLevel,
    EntropySeries,
    LevelKind,
    extract_series,
    read_series_points,
    series_to_csv,
    shannon_entropy,
    write_series_csv,
)
from tunnelscope.errors import EmptyInput, InvalidFormat, NoMatchingPackets


def histogram_entropy(data: bytes) -> float:
    """Independent oracle: explicit 256-bin histogram, log via change of base."""
    h = 0.0
    n = len(data)
    for value in range(256):
        count = data.count(value)
        if count:
            p = count / n
            h -= p * math.log(p) / math.log(2)
    return h


class TestShannonEntropy:
    def test_constant_input_is_exactly_zero(self):
        assert shannon_entropy(b"\x41" * 100) == 0.0

    def test_uniform_byte_alphabet_is_exactly_eight(self):
        assert shannon_entropy(bytes(range(256))) == 8.0

    def test_two_thirds_one_third(self):
        # -(2/3*log2(2/3) + 1/3*log2(1/3))
        expected = 0.9182958340544896
        assert abs(shannon_entropy(b"\x61\x61\x62") - expected) < 1e-12

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            shannon_entropy(b"")

    @given(st.binary(min_size=1, max_size=2000))
    @settings(max_examples=300)
    def test_matches_histogram_oracle(self, data):
        assert abs(shannon_entropy(data) - histogram_entropy(data)) < 1e-12

    @given(st.binary(min_size=1, max_size=500), st.integers(0, 2**32))
    @settings(max_examples=200)
    def test_permutation_invariant(self, data, seed):
        shuffled = bytearray(data)
        random.Random(seed).shuffle(shuffled)
        assert shannon_entropy(bytes(shuffled)) == shannon_entropy(data)

    @given(st.binary(min_size=1, max_size=2000))
    @settings(max_examples=300)
    def test_bounds_and_zero_iff_constant(self, data):
        h = shannon_entropy(data)
        assert 0.0 <= h <= 8.0
        if len(set(data)) == 1:
            assert h == 0.0
        else:
            assert h > 0.0


class TestAbstractionLevel:
    def test_port_range_validated(self):
        with pytest.raises(ValueError):
            AbstractionLevel.app_request(0)
        with pytest.raises(ValueError):
            AbstractionLevel.dns_qname(70000)

    def test_client_addr_only_for_ip_client(self):
        with pytest.raises(ValueError):
            AbstractionLevel(LevelKind.APP_REQUEST, 80, client_addr="10.0.0.1")

    def test_dict_round_trip(self):
        level = AbstractionLevel.ip_client(21, "10.0.0.7")
        assert AbstractionLevel.from_dict(level.to_dict()) == level


CLIENT, SERVER = "10.0.0.2", "10.0.0.9"


def http_like_capture():
    """3 payload-bearing packets to port 80 plus 2 bare ACKs from the client."""
    frames = []
    t = 0.0
    for i, payload in enumerate([b"GET / HTTP/1.1\r\nHost: x\r\n\r\n", b"", b"GET /a", b"", b"GET /b"]):
        flags = wire.TCP_FLAG_ACK | (wire.TCP_FLAG_PSH if payload else 0)
        frames.append((t, wire.tcp_packet(CLIENT, SERVER, 40000, 80, payload, flags=flags, ident=i)))
        t += 0.1
    return parse_capture_bytes(build_capture_bytes(frames))


class TestExtractSeries:
    def test_app_request_keeps_only_payload_packets(self):
        cap = http_like_capture()
        series = extract_series(cap.packets, AbstractionLevel.app_request(80))
        assert len(series) == 3

    def test_ip_client_includes_acks(self):
        cap = http_like_capture()
        series = extract_series(cap.packets, AbstractionLevel.ip_client(80, CLIENT))
        assert len(series) == 5
        by_port = extract_series(cap.packets, AbstractionLevel.ip_client(80))
        assert len(by_port) == 5

    def test_dns_qname_constant_reduces_to_entropy_oracle(self):
        qname = b"aaaa.t.example"
        labels = qname.split(b".")
        frames = [
            (float(i), wire.udp_packet(CLIENT, SERVER, 40000, 53, wire.dns_query(labels, 10), ident=i))
            for i in range(10)
        ]
        cap = parse_capture_bytes(build_capture_bytes(frames))
        series = extract_series(cap.packets, AbstractionLevel.dns_qname(53))
        assert len(series) == 10
        expected = shannon_entropy(qname)
        assert all(bits == expected for bits in series.values())

    def test_capture_order_and_indices_preserved(self):
        cap = http_like_capture()
        series = extract_series(cap.packets, AbstractionLevel.app_request(80))
        assert [idx for idx, _ in series.points] == [0, 2, 4]

    def test_no_matching_packets(self):
        cap = http_like_capture()
        with pytest.raises(NoMatchingPackets):
            extract_series(cap.packets, AbstractionLevel.app_request(21))

    def test_selection_count_matches_predicate(self):
        cap = http_like_capture()
        series = extract_series(cap.packets, AbstractionLevel.ip_client(80))
        expected = sum(1 for p in cap.packets if p.dst_port == 80)
        assert len(series) == expected


class TestSeriesValidation:
    def test_indices_must_increase(self):
        with pytest.raises(ValueError):
            EntropySeries(AbstractionLevel.dns_qname(), ((3, 1.0), (3, 2.0)))

    def test_bits_bounded(self):
        with pytest.raises(ValueError):
            EntropySeries(AbstractionLevel.dns_qname(), ((0, 9.0),))
        with pytest.raises(ValueError):
            EntropySeries(AbstractionLevel.dns_qname(), ((0, -0.5),))


class TestSeriesCsv:
    def test_header_and_row_format(self):
        series = EntropySeries(AbstractionLevel.dns_qname(), ((0, 0.5), (7, 4.25)))
        text = series_to_csv(series)
        lines = text.splitlines()
        assert lines[0] == "packet_index,entropy_bits"
        assert lines[1] == "0,0.5"
        assert lines[2] == "7,4.25"

    def test_twelve_significant_digits(self):
        bits = shannon_entropy(b"\x61\x61\x62")
        series = EntropySeries(AbstractionLevel.dns_qname(), ((0, bits),))
        assert "0.918295834054" in series_to_csv(series)

    def test_file_round_trip(self, tmp_path):
        series = EntropySeries(
            AbstractionLevel.dns_qname(),
            tuple((i, shannon_entropy(bytes([i % 7, i % 3, 255 - i]))) for i in range(50)),
        )
        path = tmp_path / "series.csv"
        write_series_csv(series, path)
        points = read_series_points(path)
        assert [(i, pytest.approx(b, abs=1e-11)) for i, b in series.points] == points

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("index,bits\n1,2\n")
        with pytest.raises(InvalidFormat):
            read_series_points(path)

    def test_bad_row_rejected(self, tmp_path):
        path = tmp_path / "bad2.csv"
        path.write_text("packet_index,entropy_bits\n1,notafloat\n")
        with pytest.raises(InvalidFormat):
            read_series_points(path)
