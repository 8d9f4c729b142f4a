"""Command-line interface.

Subcommands: extract, plot, profile, predict, synthesize, evaluate.
Exit codes: 0 success, 2 I/O or file-format error, 3 no packets matched
the extraction filter, 4 configuration/usage error.
"""

from __future__ import annotations

import argparse
import html
import sys
from pathlib import Path

from .capture import read_capture
from .classifier import DEFAULT_SEED, GroundTruthProfile, SamplingPolicy, predict
from .entropy import (
    AbstractionLevel,
    extract_series,
    read_series_points,
    series_to_csv,
)
from .errors import (
    DuplicateLabel,
    NoMatchingPackets,
    NoProfiles,
    TunnelScopeError,
)
from .evaluation import run_experiment
from .tunnel import Codec, RecordType, TunnelConfig, synthesize_capture

EXIT_OK = 0
EXIT_IO = 2
EXIT_EMPTY_FILTER = 3
EXIT_CONFIG = 4


class _Parser(argparse.ArgumentParser):
    # Usage/config problems exit 4 (argparse's default of 2 is reserved
    # for I/O errors here).
    def error(self, message):
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _info(args, message: str) -> None:
    if not getattr(args, "quiet", False):
        print(message, file=sys.stderr)


def _level_from_args(args) -> AbstractionLevel:
    if args.level == "app-request":
        return AbstractionLevel.app_request(args.port)
    if args.level == "ip-client":
        return AbstractionLevel.ip_client(args.port, args.client_addr)
    return AbstractionLevel.dns_qname(args.dns_port)


def _policy_from_args(args) -> SamplingPolicy:
    return SamplingPolicy(
        rounds=args.rounds, window_fraction=args.fraction, rng_seed=args.seed
    )


def _load_profiles(paths) -> list[GroundTruthProfile]:
    return [GroundTruthProfile.load(path) for path in paths]


def _write_or_stdout(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_extract(args) -> int:
    capture = read_capture(args.capture, dns_port=args.dns_port)
    series = extract_series(capture.packets, _level_from_args(args), source=str(args.capture))
    _write_or_stdout(series_to_csv(series), args.out)
    _info(
        args,
        f"{len(series)} points from {len(capture.packets)} decoded packets"
        f" ({capture.skipped} skipped)",
    )
    return EXIT_OK


def _render_scatter_svg(panels: list[tuple[str, list[tuple[int, float]]]]) -> str:
    """Self-contained scatter SVG, one panel per series, y fixed to [0, 8]."""
    pw, ph = 380, 260
    ml, mr, mt, mb = 46, 14, 30, 36
    iw, ih = pw - ml - mr, ph - mt - mb
    total_w = pw * len(panels)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{ph}"'
        f' viewBox="0 0 {total_w} {ph}">',
        "<style>.pt{fill:#1965b0;fill-opacity:0.65;stroke:none}"
        ".axis{stroke:#444;stroke-width:1;fill:none}"
        ".grid{stroke:#ddd;stroke-width:0.5}"
        "text{font-family:sans-serif;font-size:11px;fill:#222}</style>",
    ]
    for k, (title, points) in enumerate(panels):
        parts.append(f'<g class="panel" transform="translate({k * pw},0)">')
        parts.append(f'<text x="{ml}" y="{mt - 12}">{html.escape(title)}</text>')
        parts.append(f'<rect x="{ml}" y="{mt}" width="{iw}" height="{ih}" class="axis"/>')
        for tick in range(0, 9, 2):
            y = mt + ih - tick / 8 * ih
            parts.append(f'<line x1="{ml}" y1="{y:.2f}" x2="{ml + iw}" y2="{y:.2f}" class="grid"/>')
            parts.append(f'<text x="{ml - 26}" y="{y + 4:.2f}">{tick}</text>')
        parts.append(f'<text x="6" y="{mt - 12}">bits</text>')
        xs = [idx for idx, _ in points]
        xmin, xmax = (min(xs), max(xs)) if xs else (0, 0)
        span = max(xmax - xmin, 1)
        for idx, bits in points:
            cx = ml + (idx - xmin) / span * iw
            cy = mt + ih - bits / 8.0 * ih
            parts.append(f'<circle class="pt" cx="{cx:.2f}" cy="{cy:.2f}" r="2"/>')
        parts.append(f'<text x="{ml}" y="{ph - 10}">packet {xmin}..{xmax}</text>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot(args) -> int:
    panels = [(Path(p).stem, read_series_points(p)) for p in args.csvs]
    Path(args.out).write_text(_render_scatter_svg(panels), encoding="utf-8")
    _info(args, f"wrote {args.out} ({len(panels)} panel(s))")
    return EXIT_OK


def cmd_profile(args) -> int:
    capture = read_capture(args.capture, dns_port=args.dns_port)
    series = extract_series(capture.packets, _level_from_args(args),
                            source=str(args.capture), label=args.label)
    profile = GroundTruthProfile.from_series(args.label, series)
    profile.save(args.out)
    _info(args, f"profile {args.label}: {len(series)} points, mean {profile.mean:.6g}")
    return EXIT_OK


def cmd_predict(args) -> int:
    profiles = _load_profiles(args.profiles)
    capture = read_capture(args.test, dns_port=args.dns_port)
    series = extract_series(capture.packets, _level_from_args(args), source=str(args.test))
    result = predict(series, profiles, _policy_from_args(args))
    report = result.report()
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    sys.stdout.write(report)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cfg = TunnelConfig(
        codec=Codec(args.codec),
        record_type=RecordType(args.record_type),
        domain_suffix=args.domain,
        fragment_size=args.fragment_size,
        compress=args.compress,
        dns_port=args.dns_port,
    )
    summary = synthesize_capture(
        args.plain,
        cfg,
        args.out,
        args.client_addr,
        args.server_addr,
        label=args.label,
        manifest_path=args.manifest,
        ping_interval=args.ping_interval,
        source_addr=args.source_addr,
        start_seq=args.start_seq,
    )
    _info(
        args,
        f"{summary.out_path}: {summary.queries_written} data queries from"
        f" {summary.packets_tunneled} packets, {summary.pings_written} pings",
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    profiles = _load_profiles(args.profiles)
    result = run_experiment(
        args.manifest,
        profiles,
        _policy_from_args(args),
        level=_level_from_args(args),
        dns_port=args.dns_port,
    )
    _write_or_stdout(result.text_report(), args.out)
    if args.csv:
        Path(args.csv).write_text(result.csv_report(), encoding="utf-8")
    for warning in result.warnings:
        _info(args, f"warning: {warning}")
    return EXIT_OK


def _add_common(sub) -> None:
    sub.add_argument("--dns-port", type=int, default=53,
                     help="DNS port used for query filtering and synthesis")
    sub.add_argument("--seed", type=int, default=DEFAULT_SEED,
                     help="seed for the window-sampling generator")
    sub.add_argument("--quiet", action="store_true",
                     help="suppress informational stderr output")


def _add_level(sub, default_level: str) -> None:
    sub.add_argument("--level", choices=["app-request", "ip-client", "dns-qname"],
                     default=default_level, help="abstraction level to measure at")
    sub.add_argument("--port", type=int, default=80,
                     help="service port filter for app-request/ip-client"
                          " (80 for HTTP, 21 for FTP)")
    sub.add_argument("--client-addr", default=None,
                     help="select ip-client packets by source address"
                          " instead of the port heuristic")


def _add_policy(sub) -> None:
    sub.add_argument("--rounds", type=int, default=1000,
                     help="number of sampling rounds per profile")
    sub.add_argument("--fraction", type=float, default=0.9,
                     help="window length as a fraction of the profile length")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tunnelscope",
        description="Predict the application protocol carried inside"
                    " DNS-tunneled traffic from per-packet entropy.",
        epilog="exit codes: 0 ok, 2 I/O or format error, 3 empty filter,"
               " 4 configuration error",
    )
    subs = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = subs.add_parser("extract", formatter_class=fmt,
                        help="write a per-packet entropy CSV for one capture")
    p.add_argument("capture", help="pcap file to measure")
    _add_level(p, "dns-qname")
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = subs.add_parser("plot", formatter_class=fmt,
                        help="render entropy CSVs as a scatter SVG, one panel each")
    p.add_argument("csvs", nargs="+", help="series CSV files from `extract`")
    p.add_argument("--out", required=True, help="output SVG path")
    _add_common(p)
    p.set_defaults(func=cmd_plot)

    p = subs.add_parser("profile", formatter_class=fmt,
                        help="build a labeled ground-truth profile from a plain capture")
    p.add_argument("capture", help="plain-protocol pcap file")
    p.add_argument("--label", required=True, help="protocol label, e.g. HTTP")
    _add_level(p, "ip-client")
    p.add_argument("--out", required=True, help="output profile (JSON) path")
    _add_common(p)
    p.set_defaults(func=cmd_profile)

    p = subs.add_parser("predict", formatter_class=fmt,
                        help="predict the tunneled protocol of a test capture")
    p.add_argument("test", help="DNS-tunneled pcap file to classify")
    p.add_argument("profiles", nargs="+", help="ground-truth profile files")
    _add_level(p, "dns-qname")
    _add_policy(p)
    p.add_argument("--out", default=None, help="also write the report to this path")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = subs.add_parser("synthesize", formatter_class=fmt,
                        help="tunnel a plain capture into a synthetic DNS-query pcap")
    p.add_argument("plain", help="plain capture whose packets get tunneled")
    p.add_argument("--out", required=True, help="output pcap path")
    p.add_argument("--codec", choices=[c.value for c in Codec],
                   default=Codec.BASE128.value, help="name-field codec")
    p.add_argument("--record-type", choices=[r.value for r in RecordType],
                   default=RecordType.NULL.value, help="carrier resource-record type")
    p.add_argument("--domain", default="t.example.com", help="tunnel domain suffix")
    p.add_argument("--fragment-size", type=int, default=100,
                   help="max raw bytes per query before encoding")
    p.add_argument("--compress", action=argparse.BooleanOptionalAction, default=True,
                   help="GZIP packets before fragmenting")
    p.add_argument("--ping-interval", type=float, default=None,
                   help="emit keep-alive pings at this many seconds during idle gaps")
    p.add_argument("--client-addr", default="10.9.0.2", help="synthetic tunnel client address")
    p.add_argument("--server-addr", default="10.9.0.1", help="synthetic tunnel server address")
    p.add_argument("--source-addr", default=None,
                   help="only tunnel plain packets from this source address")
    p.add_argument("--label", default=None, help="true-protocol label for the manifest")
    p.add_argument("--manifest", default=None, help="manifest file to append to")
    p.add_argument("--start-seq", type=int, default=0, help="first sequence number")
    _add_common(p)
    p.set_defaults(func=cmd_synthesize)

    p = subs.add_parser("evaluate", formatter_class=fmt,
                        help="run a labeled manifest and report matrix + metrics")
    p.add_argument("manifest", help="manifest file: capture_path,true_label per line")
    p.add_argument("profiles", nargs="+", help="ground-truth profile files")
    _add_level(p, "dns-qname")
    _add_policy(p)
    p.add_argument("--out", default=None, help="text report path (default stdout)")
    p.add_argument("--csv", default=None, help="also write per-capture scores CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help exits 0, usage errors exit 4
        return int(exc.code or 0)
    try:
        return args.func(args)
    except NoMatchingPackets as exc:
        print(f"tunnelscope: {exc}", file=sys.stderr)
        return EXIT_EMPTY_FILTER
    except (NoProfiles, DuplicateLabel, ValueError) as exc:
        print(f"tunnelscope: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TunnelScopeError) as exc:
        print(f"tunnelscope: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())
