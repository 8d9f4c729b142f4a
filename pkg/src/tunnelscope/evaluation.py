"""Batch evaluation: confusion matrix, derived metrics, manifest runs.

Metric definitions are the standard one-vs-rest ones. For label L with
tp = counts[L][L], row = actual-L count, col = predicted-L count, n total:

    recall(L)    = tp / row
    precision(L) = tp / col
    fpr(L)       = (col - tp) / (n - row)

A zero denominator yields None (printed as "undef"), never a crash.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .capture import read_capture
from .classifier import GroundTruthProfile, PredictionResult, SamplingPolicy, predict
from .entropy import AbstractionLevel, extract_series
from .errors import EmptyInput, InvalidFormat, TunnelScopeError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed by (actual label, predicted label)."""

    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.counts)

    def count(self, actual: str, predicted: str) -> int:
        return self.counts[self.labels.index(actual)][self.labels.index(predicted)]

    def row_sum(self, label: str) -> int:
        return sum(self.counts[self.labels.index(label)])

    def col_sum(self, label: str) -> int:
        j = self.labels.index(label)
        return sum(row[j] for row in self.counts)


def confusion_matrix(pairs: Iterable[tuple[str, str]]) -> ConfusionMatrix:
    """Tally (actual, predicted) pairs; labels are the sorted union seen."""
    pairs = list(pairs)
    if not pairs:
        raise EmptyInput("no (actual, predicted) pairs to tally")
    labels = tuple(sorted({a for a, _ in pairs} | {p for _, p in pairs}))
    index = {label: i for i, label in enumerate(labels)}
    counts = [[0] * len(labels) for _ in labels]
    for actual, predicted in pairs:
        counts[index[actual]][index[predicted]] += 1
    return ConfusionMatrix(labels=labels, counts=tuple(tuple(row) for row in counts))


@dataclass(frozen=True)
class LabelMetrics:
    precision: Optional[float]
    recall: Optional[float]
    false_positive_rate: Optional[float]


@dataclass(frozen=True)
class MetricReport:
    accuracy: float
    misclassification_rate: float
    per_label: dict[str, LabelMetrics]


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def metrics(cm: ConfusionMatrix) -> MetricReport:
    n = cm.n
    if n < 1:
        raise EmptyInput("confusion matrix is empty")
    trace = sum(cm.counts[i][i] for i in range(len(cm.labels)))
    accuracy = trace / n
    per_label = {}
    for label in cm.labels:
        tp = cm.count(label, label)
        row = cm.row_sum(label)
        col = cm.col_sum(label)
        per_label[label] = LabelMetrics(
            precision=_ratio(tp, col),
            recall=_ratio(tp, row),
            false_positive_rate=_ratio(col - tp, n - row),
        )
    return MetricReport(
        accuracy=accuracy,
        misclassification_rate=1.0 - accuracy,
        per_label=per_label,
    )


def parse_manifest(path) -> list[tuple[str, str]]:
    """Manifest lines: `capture_path,true_label[,extra...]`; `#` comments."""
    entries = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [part.strip() for part in line.split(",")]
        if len(parts) < 2 or not parts[0] or not parts[1]:
            raise InvalidFormat(f"{path}:{lineno}: expected `capture_path,true_label`")
        entries.append((parts[0], parts[1]))
    return entries


@dataclass
class ExperimentEntry:
    capture: str
    true_label: str
    result: Optional[PredictionResult]
    error: Optional[str]


@dataclass
class ExperimentResult:
    entries: list[ExperimentEntry]
    matrix: ConfusionMatrix
    metrics: MetricReport
    policy: SamplingPolicy

    @property
    def warnings(self) -> list[str]:
        return [f"{e.capture}: {e.error}" for e in self.entries if e.error]

    def text_report(self) -> str:
        scored = sum(1 for e in self.entries if e.result)
        lines = [
            "== evaluation report ==",
            f"captures: {len(self.entries)}",
            f"scored: {scored}",
            f"failed: {len(self.entries) - scored}",
            f"policy: seed={self.policy.rng_seed} rounds={self.policy.rounds}"
            f" window_fraction={self.policy.window_fraction:.9g}",
            "",
            "confusion matrix (row=actual, col=predicted)",
        ]
        width = max(len(label) for label in self.matrix.labels)
        width = max(width, 6)
        lines.append(" " * (width + 2) + "  ".join(f"{l:>{width}}" for l in self.matrix.labels))
        for i, label in enumerate(self.matrix.labels):
            cells = "  ".join(f"{c:>{width}}" for c in self.matrix.counts[i])
            lines.append(f"{label:>{width}}  {cells}")
        fmt = lambda v: "undef" if v is None else f"{v:.9g}"
        lines += [
            "",
            f"accuracy: {self.metrics.accuracy:.9g}",
            f"misclassification_rate: {self.metrics.misclassification_rate:.9g}",
            "",
            "# precision(L)=tp/col_sum  recall(L)=tp/row_sum  fpr(L)=(col_sum-tp)/(n-row_sum)",
            "label,precision,recall,fpr",
        ]
        for label in self.matrix.labels:
            m = self.metrics.per_label[label]
            lines.append(
                f"{label},{fmt(m.precision)},{fmt(m.recall)},{fmt(m.false_positive_rate)}"
            )
        if self.warnings:
            lines += ["", "warnings:"]
            lines += [f"  {w}" for w in self.warnings]
        return "\n".join(lines) + "\n"

    def csv_report(self) -> str:
        labels = self.matrix.labels
        header = "capture,true,predicted," + ",".join(f"score_{l}" for l in labels)
        rows = [header]
        for entry in self.entries:
            if entry.result is None:
                continue
            scores = ",".join(f"{entry.result.scores[l]:.9g}" for l in labels)
            rows.append(f"{entry.capture},{entry.true_label},{entry.result.predicted},{scores}")
        return "\n".join(rows) + "\n"


def run_experiment(
    manifest,
    profiles: Sequence[GroundTruthProfile],
    policy: SamplingPolicy = SamplingPolicy(),
    *,
    level: Optional[AbstractionLevel] = None,
    dns_port: int = 53,
) -> ExperimentResult:
    """Predict every manifest entry and aggregate into matrix + metrics.

    Per-entry failures (unreadable capture, empty filter) are recorded as
    warnings and excluded from the matrix; the batch never aborts on one
    bad capture. Raises EmptyInput for an empty manifest.
    """
    entries = parse_manifest(manifest)
    if not entries:
        raise EmptyInput(f"manifest {manifest} has no entries")
    if level is None:
        level = AbstractionLevel.dns_qname(dns_port)
    results: list[ExperimentEntry] = []
    for capture_path, true_label in entries:
        try:
            capture = read_capture(capture_path, dns_port=dns_port)
            series = extract_series(capture.packets, level, source=capture_path)
            prediction = predict(series, profiles, policy)
            results.append(ExperimentEntry(capture_path, true_label, prediction, None))
        except (OSError, TunnelScopeError) as exc:
            results.append(
                ExperimentEntry(
                    capture_path, true_label, None, f"{type(exc).__name__}: {exc}"
                )
            )
    pairs = [(e.true_label, e.result.predicted) for e in results if e.result]
    cm = confusion_matrix(pairs)
    return ExperimentResult(entries=results, matrix=cm, metrics=metrics(cm), policy=policy)
