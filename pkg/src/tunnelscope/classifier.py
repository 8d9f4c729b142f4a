"""Mean-difference scoring of entropy series against ground-truth profiles.

The similarity metric between two series is the absolute difference of
their arithmetic means. A test capture is scored against a profile by
drawing a fixed number of random consecutive windows from the test series
(window length = 90% of the profile length by default), computing the
metric per window against the profile, and averaging; the profile with the
smallest averaged score wins.

Randomness comes from numpy's PCG64 generator. Each (seed, profile label)
pair owns a private stream, so scoring profiles in any order, or in
parallel, cannot change results.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .entropy import AbstractionLevel, EntropySeries
from .errors import (
    DuplicateLabel,
    EmptyInput,
    EmptySeries,
    InvalidFormat,
    NoProfiles,
)

DEFAULT_SEED = 0xC0FFEE  # 12648430; echoed in every report

MEAN_TOLERANCE = 1e-12


def _rng(seed: int, label: Optional[str] = None) -> np.random.Generator:
    if label is None:
        seed_seq = np.random.SeedSequence(seed)
    else:
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        seed_seq = np.random.SeedSequence([seed, int.from_bytes(digest[:8], "big")])
    return np.random.Generator(np.random.PCG64(seed_seq))


def mean_diff(x: Sequence[float], y: Sequence[float]) -> float:
    """|mean(x) - mean(y)|. Raises EmptyInput if either side is empty."""
    if len(x) == 0 or len(y) == 0:
        raise EmptyInput("mean_diff needs nonempty sequences on both sides")
    return abs(float(np.mean(x)) - float(np.mean(y)))


def _window_starts(
    n: int, window_len: int, rounds: int, rng: np.random.Generator
) -> np.ndarray:
    # Uniform over [0, n - window_len]; degenerates to all-zero when the
    # window covers (or exceeds) the series.
    max_start = max(0, n - window_len)
    return rng.integers(0, max_start + 1, size=rounds)


def sample_windows(
    series: Sequence[float], window_len: int, rounds: int, rng_seed: int
) -> list[Sequence[float]]:
    """Draw *rounds* random consecutive windows from *series*.

    Starts are uniform over the valid range, independent per round, from a
    PCG64 stream seeded with rng_seed. When window_len >= len(series) every
    round returns the whole series.
    """
    if len(series) == 0:
        raise EmptySeries("cannot sample windows from an empty series")
    if window_len < 1:
        raise ValueError(f"window_len {window_len} must be >= 1")
    if rounds < 1:
        raise ValueError(f"rounds {rounds} must be >= 1")
    starts = _window_starts(len(series), window_len, rounds, _rng(rng_seed))
    width = min(window_len, len(series))
    return [series[start : start + width] for start in starts]


@dataclass(frozen=True)
class SamplingPolicy:
    """How test windows are drawn: round count, window fraction, seed."""

    rounds: int = 1000
    window_fraction: float = 0.9
    rng_seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError(f"rounds {self.rounds} must be >= 1")
        if not 0.0 < self.window_fraction <= 1.0:
            raise ValueError(
                f"window_fraction {self.window_fraction} outside (0, 1]"
            )
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must fit an unsigned 64-bit integer")


@dataclass(frozen=True)
class GroundTruthProfile:
    """Labeled entropy series of a plain protocol capture, plus its mean."""

    label: str
    series: EntropySeries
    mean: float
    level: AbstractionLevel

    def __post_init__(self):
        if len(self.series) == 0:
            raise ValueError("profile series must be nonempty")
        recomputed = float(np.mean(self.series.values()))
        if abs(recomputed - self.mean) > MEAN_TOLERANCE:
            raise ValueError(
                f"stored mean {self.mean} disagrees with recomputed {recomputed}"
            )

    @classmethod
    def from_series(cls, label: str, series: EntropySeries) -> "GroundTruthProfile":
        if len(series) == 0:
            raise ValueError("profile series must be nonempty")
        return cls(
            label=label,
            series=series,
            mean=float(np.mean(series.values())),
            level=series.level,
        )

    def to_json(self) -> str:
        obj = {
            "label": self.label,
            "level": self.level.to_dict(),
            "mean": self.mean,
            "source": self.series.source,
            "points": [[idx, bits] for idx, bits in self.series.points],
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GroundTruthProfile":
        try:
            obj = json.loads(text)
            level = AbstractionLevel.from_dict(obj["level"])
            series = EntropySeries(
                level=level,
                points=tuple((int(i), float(b)) for i, b in obj["points"]),
                source=str(obj.get("source", "")),
                label=str(obj["label"]),
            )
            return cls(label=str(obj["label"]), series=series,
                       mean=float(obj["mean"]), level=level)
        except InvalidFormat:
            raise
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            raise InvalidFormat(f"bad profile record: {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="ascii")

    @classmethod
    def load(cls, path) -> "GroundTruthProfile":
        return cls.from_json(Path(path).read_text(encoding="ascii"))


def score_against(
    test: EntropySeries, profile: GroundTruthProfile, policy: SamplingPolicy
) -> float:
    """Averaged mean-difference score of *test* windows against *profile*.

    Window length is floor(window_fraction * len(profile.series)), at least
    1; windows are drawn from the test series. Shorter test series are used
    whole every round.
    """
    values = np.asarray(test.values(), dtype=np.float64)
    if values.size == 0:
        raise EmptyInput("test series is empty")
    window_len = max(1, math.floor(policy.window_fraction * len(profile.series)))
    width = min(window_len, values.size)
    starts = _window_starts(
        values.size, window_len, policy.rounds, _rng(policy.rng_seed, profile.label)
    )
    prefix = np.concatenate(([0.0], np.cumsum(values)))
    window_means = (prefix[starts + width] - prefix[starts]) / width
    return float(np.mean(np.abs(window_means - profile.mean)))


@dataclass(frozen=True)
class PredictionResult:
    """Per-profile scores plus the argmin label; ties go to the
    lexicographically smallest label."""

    scores: Mapping[str, float]  # keyed by label, sorted
    predicted: str
    policy: SamplingPolicy
    test_source: str

    def report(self) -> str:
        lines = [
            f"source,{self.test_source}",
            f"seed,{self.policy.rng_seed}",
            f"rounds,{self.policy.rounds}",
            f"window_fraction,{self.policy.window_fraction:.9g}",
        ]
        lines += [f"{label},{score:.9g}" for label, score in self.scores.items()]
        lines.append(f"predicted,{self.predicted}")
        return "\n".join(lines) + "\n"


def predict(
    test: EntropySeries,
    profiles: Iterable[GroundTruthProfile],
    policy: SamplingPolicy = SamplingPolicy(),
) -> PredictionResult:
    """Score *test* against every profile and pick the closest one."""
    profiles = list(profiles)
    if not profiles:
        raise NoProfiles("at least one ground-truth profile is required")
    labels = [p.label for p in profiles]
    if len(set(labels)) != len(labels):
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        raise DuplicateLabel(f"duplicate profile labels: {', '.join(dupes)}")
    scores = {
        p.label: score_against(test, p, policy)
        for p in sorted(profiles, key=lambda p: p.label)
    }
    predicted = min(scores, key=lambda label: (scores[label], label))
    return PredictionResult(
        scores=scores, predicted=predicted, policy=policy, test_source=test.source
    )
