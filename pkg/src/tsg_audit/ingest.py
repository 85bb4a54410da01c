"""Parsers for grounding annotation files and the canonical sample schema.

Two community annotation layouts are supported (the Charades-STA text format
and the ActivityNet Captions JSON document) plus a canonical JSON-lines
format that every other stage of the pipeline consumes. All parsers apply the
same boundary cleanup: reversed timestamps are swapped, out-of-range
boundaries are clamped to [0, duration], and records that are degenerate
after clamping are rejected (counted in the ingest report, never silently
dropped).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

CANONICAL_FIELDS = ("sample_id", "video_id", "duration", "start", "end", "query")


class IngestError(ValueError):
    """Base class for annotation parsing failures."""


class ParseError(IngestError):
    """A malformed record; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class MissingDurationError(IngestError):
    """Video ids seen in the annotations but absent from the duration table."""

    def __init__(self, video_ids: Sequence[str]):
        self.video_ids = sorted(set(video_ids))
        listed = ", ".join(self.video_ids[:20])
        more = "" if len(self.video_ids) <= 20 else f" (+{len(self.video_ids) - 20} more)"
        super().__init__(f"no duration for video ids: {listed}{more}")


@dataclass(frozen=True)
class Sample:
    """One query-moment pair: a video segment paired with a text query.

    After ingestion cleanup every sample satisfies
    0 <= start < end <= duration and duration > 0.
    """

    sample_id: str
    video_id: str
    duration: float
    start: float
    end: float
    query: str


@dataclass(frozen=True)
class NormalizedMoment:
    """Moment boundaries divided by video duration; 0 <= s <= e <= 1."""

    s: float
    e: float

    @property
    def length(self) -> float:
        return self.e - self.s


@dataclass(frozen=True)
class Dataset:
    """An ordered, immutable collection of samples.

    Sample order is the file order of ingestion; downstream tie-breaking
    relies on it, so it must never be re-sorted.
    """

    name: str
    samples: tuple[Sample, ...]

    def __len__(self) -> int:
        return len(self.samples)

    @cached_property
    def by_id(self) -> dict[str, Sample]:
        return {s.sample_id: s for s in self.samples}

    @cached_property
    def index_of(self) -> dict[str, int]:
        return {s.sample_id: i for i, s in enumerate(self.samples)}

    def subset(self, sample_ids: Iterable[str], name: str | None = None) -> "Dataset":
        """New dataset with only the given ids, preserving ingestion order."""
        wanted = set(sample_ids)
        kept = tuple(s for s in self.samples if s.sample_id in wanted)
        missing = wanted - {s.sample_id for s in kept}
        if missing:
            raise KeyError(f"unknown sample ids: {sorted(missing)[:10]}")
        return Dataset(name=name or self.name, samples=kept)


@dataclass
class IngestReport:
    """Cleanup bookkeeping: how many records were repaired or rejected."""

    swapped: int = 0
    clamped: int = 0
    rejected: int = 0
    rejected_ids: list[str] = field(default_factory=list)

    def note_rejection(self, sample_id: str) -> None:
        self.rejected += 1
        self.rejected_ids.append(sample_id)

    def summary(self) -> str:
        return (
            f"{self.swapped} reversed timestamp(s) swapped, "
            f"{self.clamped} boundary value(s) clamped, "
            f"{self.rejected} degenerate record(s) rejected"
        )


def _clean_boundaries(
    start: float, end: float, duration: float, report: IngestReport
) -> tuple[float, float] | None:
    """Repair/clamp raw boundaries; None means the record is unusable."""
    if start > end:
        start, end = end, start
        report.swapped += 1
    clamped = False
    if start < 0.0:
        start = 0.0
        clamped = True
    if end > duration:
        end = duration
        clamped = True
    if start > duration:
        # start beyond the video leaves nothing after clamping
        start = duration
        clamped = True
    if clamped:
        report.clamped += 1
    if start >= end:
        return None
    return start, end


def _build_sample(
    sample_id: str,
    video_id: str,
    duration: float,
    start: float,
    end: float,
    query: str,
    report: IngestReport,
) -> Sample | None:
    cleaned = _clean_boundaries(start, end, duration, report)
    if cleaned is None:
        report.note_rejection(sample_id)
        return None
    start, end = cleaned
    return Sample(
        sample_id=sample_id,
        video_id=video_id,
        duration=duration,
        start=start,
        end=end,
        query=query,
    )


def _require_finite(value: float, what: str, line_no: int | None = None) -> float:
    if not math.isfinite(value):
        raise ParseError(f"non-finite {what}: {value!r}", line_no)
    return value


def parse_duration_table(lines: Iterable[str]) -> dict[str, float]:
    """Parse a `video_id,duration_seconds` table into a lookup dict."""
    table: dict[str, float] = {}
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"expected 'video_id,duration', got {line!r}", i)
        video_id, dur_text = parts[0].strip(), parts[1].strip()
        try:
            duration = float(dur_text)
        except ValueError:
            raise ParseError(f"non-numeric duration {dur_text!r}", i) from None
        _require_finite(duration, "duration", i)
        if duration <= 0:
            raise ParseError(f"nonpositive duration {duration} for {video_id}", i)
        table[video_id] = duration
    return table


def parse_charades(
    lines: Iterable[str],
    duration_table: Mapping[str, float],
    name: str = "charades",
    report: IngestReport | None = None,
) -> Dataset:
    """Parse Charades-style annotation lines.

    Line grammar: `<video_id> <start_seconds> <end_seconds>##<query>`. The
    annotation lines carry no durations, so a separate video_id -> seconds
    table is required; ids missing from it are collected and raised together
    rather than dropped one by one.
    """
    report = report if report is not None else IngestReport()
    samples: list[Sample] = []
    missing: list[str] = []
    for idx, raw in enumerate(lines):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        head, sep, query = line.partition("##")
        if not sep:
            raise ParseError("missing '##' separator", idx + 1)
        fields = head.split()
        if len(fields) != 3:
            raise ParseError(
                f"expected '<video_id> <start> <end>' before '##', got {head!r}", idx + 1
            )
        video_id, start_text, end_text = fields
        try:
            start = float(start_text)
            end = float(end_text)
        except ValueError:
            raise ParseError(
                f"non-numeric timestamps {start_text!r} {end_text!r}", idx + 1
            ) from None
        _require_finite(start, "start", idx + 1)
        _require_finite(end, "end", idx + 1)
        if video_id not in duration_table:
            missing.append(video_id)
            continue
        sample = _build_sample(
            sample_id=f"{video_id}#{idx}",
            video_id=video_id,
            duration=float(duration_table[video_id]),
            start=start,
            end=end,
            query=query.strip(),
            report=report,
        )
        if sample is not None:
            samples.append(sample)
    if missing:
        raise MissingDurationError(missing)
    return Dataset(name=name, samples=tuple(samples))


def merge_activitynet_documents(documents: Sequence[Mapping]) -> dict:
    """Merge several ActivityNet-style documents into one.

    Videos appearing in more than one document get their timestamp/sentence
    lists concatenated in document order, so pair indices (and therefore
    sample ids) stay unique across the merged corpus.
    """
    merged: dict[str, dict] = {}
    for doc in documents:
        for video_id, record in doc.items():
            if video_id not in merged:
                merged[video_id] = {
                    "duration": record["duration"],
                    "timestamps": list(record["timestamps"]),
                    "sentences": list(record["sentences"]),
                }
            else:
                merged[video_id]["timestamps"].extend(record["timestamps"])
                merged[video_id]["sentences"].extend(record["sentences"])
    return merged


def parse_activitynet(
    document: Mapping[str, Mapping],
    name: str = "activitynet",
    report: IngestReport | None = None,
) -> Dataset:
    """Parse an ActivityNet-style document.

    The document maps video_id -> {duration, timestamps, sentences} with the
    two lists parallel; each (timestamp, sentence) pair becomes one sample.
    """
    report = report if report is not None else IngestReport()
    samples: list[Sample] = []
    for video_id, record in document.items():
        try:
            duration = float(record["duration"])
            timestamps = record["timestamps"]
            sentences = record["sentences"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad record for video {video_id!r}: {exc}") from None
        if not math.isfinite(duration):
            raise ParseError(f"non-finite duration for video {video_id!r}")
        if duration <= 0:
            raise ParseError(f"nonpositive duration for video {video_id!r}")
        if len(timestamps) != len(sentences):
            raise ParseError(
                f"video {video_id!r}: {len(timestamps)} timestamps vs "
                f"{len(sentences)} sentences"
            )
        for pair_idx, (moment, sentence) in enumerate(zip(timestamps, sentences)):
            if len(moment) != 2:
                raise ParseError(
                    f"video {video_id!r} pair {pair_idx}: expected [start, end]"
                )
            start, end = float(moment[0]), float(moment[1])
            if not (math.isfinite(start) and math.isfinite(end)):
                raise ParseError(
                    f"video {video_id!r} pair {pair_idx}: non-finite timestamps"
                )
            sample = _build_sample(
                sample_id=f"{video_id}#{pair_idx}",
                video_id=video_id,
                duration=duration,
                start=start,
                end=end,
                query=str(sentence).strip(),
                report=report,
            )
            if sample is not None:
                samples.append(sample)
    return Dataset(name=name, samples=tuple(samples))


def parse_canonical(lines: Iterable[str], name: str = "dataset") -> Dataset:
    """Parse canonical JSON-lines records (strict: no cleanup, no extras)."""
    samples: list[Sample] = []
    seen: set[str] = set()
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", i) from None
        if not isinstance(record, dict):
            raise ParseError("record is not an object", i)
        missing = [f for f in CANONICAL_FIELDS if f not in record]
        if missing:
            raise ParseError(f"missing field(s): {', '.join(missing)}", i)
        extra = sorted(set(record) - set(CANONICAL_FIELDS))
        if extra:
            raise ParseError(f"unknown field(s): {', '.join(extra)}", i)
        sample_id = str(record["sample_id"])
        if sample_id in seen:
            raise ParseError(f"duplicate sample_id {sample_id!r}", i)
        seen.add(sample_id)
        duration = float(record["duration"])
        start = float(record["start"])
        end = float(record["end"])
        if not all(math.isfinite(v) for v in (duration, start, end)):
            raise ParseError("non-finite duration/start/end", i)
        if duration <= 0:
            raise ParseError(f"nonpositive duration {duration}", i)
        if not (0.0 <= start < end <= duration):
            raise ParseError(
                f"boundaries violate 0 <= start < end <= duration: "
                f"start={start} end={end} duration={duration}",
                i,
            )
        samples.append(
            Sample(
                sample_id=sample_id,
                video_id=str(record["video_id"]),
                duration=duration,
                start=start,
                end=end,
                query=str(record["query"]),
            )
        )
    return Dataset(name=name, samples=tuple(samples))


def write_canonical(dataset: Dataset) -> list[str]:
    """Render a dataset as canonical JSON lines (inverse of parse_canonical)."""
    lines = []
    for s in dataset.samples:
        record = {
            "sample_id": s.sample_id,
            "video_id": s.video_id,
            "duration": s.duration,
            "start": s.start,
            "end": s.end,
            "query": s.query,
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return lines


def normalize(sample: Sample) -> NormalizedMoment:
    """Divide moment boundaries by video duration, clamped into [0, 1]."""
    s = min(max(sample.start / sample.duration, 0.0), 1.0)
    e = min(max(sample.end / sample.duration, 0.0), 1.0)
    return NormalizedMoment(s=s, e=e)


def normalized_moments(dataset: Dataset) -> list[NormalizedMoment]:
    return [normalize(s) for s in dataset.samples]
