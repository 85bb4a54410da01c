"""Recall and discounted recall over ranked moment predictions.

recall(n, m): fraction of queries with at least one of the top-n predictions
whose IoU against the ground truth exceeds threshold m. The discounted
variant multiplies each counted hit by (1 - |ds|) * (1 - |de|), the per-
boundary distances between prediction and ground truth after normalizing by
video duration, which deflates coarse predictions that pass small thresholds
only because the annotated moment is long.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from tsg_audit.ingest import Dataset, Sample

Moment = tuple[float, float]

DEFAULT_N_LIST = (1, 5)
DEFAULT_M_LIST = (0.1, 0.3, 0.5, 0.7, 0.9)

COMPARATOR_STRICT = "strict"  # IoU > m
COMPARATOR_INCLUSIVE = "inclusive"  # IoU >= m


class EvaluationError(ValueError):
    """Raised when predictions do not cover the evaluated samples."""


@dataclass(frozen=True)
class PredictionSet:
    """Ranked moment predictions (seconds, best first) keyed by sample id."""

    entries: dict[str, list[Moment]]

    def __post_init__(self):
        for sid, moments in self.entries.items():
            if not moments:
                raise EvaluationError(f"sample {sid!r} has an empty prediction list")
            for start, end in moments:
                if start > end:
                    raise EvaluationError(
                        f"sample {sid!r}: prediction ({start}, {end}) has start > end"
                    )


@dataclass(frozen=True)
class MetricTable:
    """(n, m) -> scores grid for both metrics over N_q evaluated queries."""

    rows: dict[tuple[int, float], dict[str, float]]
    n_q: int
    comparator: str = COMPARATOR_STRICT

    def to_dict(self) -> dict:
        cells = [
            {
                "n": n,
                "m": m,
                "recall": scores["recall"],
                "discounted_recall": scores["discounted_recall"],
            }
            for (n, m), scores in sorted(self.rows.items())
        ]
        return {
            "comparator": self.comparator,
            "n_list": sorted({n for n, _ in self.rows}),
            "m_list": sorted({m for _, m in self.rows}),
            "n_q": self.n_q,
            "cells": cells,
        }


def iou(a: Moment, b: Moment) -> float:
    """Intersection-over-union of two intervals; 0 for a zero-length union."""
    inter = min(a[1], b[1]) - max(a[0], b[0])
    if inter <= 0.0:
        return 0.0
    union = max(a[1], b[1]) - min(a[0], b[0])
    if union <= 0.0:
        return 0.0
    return inter / union


def _passes(value: float, m: float, comparator: str) -> bool:
    if comparator == COMPARATOR_STRICT:
        return value > m
    if comparator == COMPARATOR_INCLUSIVE:
        return value >= m
    raise ValueError(f"unknown comparator {comparator!r}")


def hit(
    n: int,
    m: float,
    ranked_predictions: Sequence[Moment],
    ground_truth: Moment,
    comparator: str = COMPARATOR_STRICT,
) -> int:
    """1 iff any of the first min(n, len) predictions passes the threshold."""
    for pred in ranked_predictions[:n]:
        if _passes(iou(pred, ground_truth), m, comparator):
            return 1
    return 0


def discount_factors(
    pred: Moment, gt: Moment, duration: float
) -> tuple[float, float]:
    """Per-boundary discounts 1 - |p - g| over duration-normalized moments.

    Boundaries are clamped into [0, 1] after normalization so the factors
    stay in [0, 1] even for out-of-range predictions.
    """

    def norm(t: float) -> float:
        return min(max(t / duration, 0.0), 1.0)

    alpha_s = 1.0 - abs(norm(pred[0]) - norm(gt[0]))
    alpha_e = 1.0 - abs(norm(pred[1]) - norm(gt[1]))
    return alpha_s, alpha_e


def _best_passing(
    preds: Sequence[Moment], gt: Moment, n: int, m: float, comparator: str
) -> Moment | None:
    """Highest-IoU prediction among the top-n that passes; ties by rank."""
    best: Moment | None = None
    best_iou = -1.0
    for pred in preds[:n]:
        value = iou(pred, gt)
        if _passes(value, m, comparator) and value > best_iou:
            best = pred
            best_iou = value
    return best


def _check_coverage(predictions: PredictionSet, dataset: Dataset) -> None:
    missing = [s.sample_id for s in dataset.samples if s.sample_id not in predictions.entries]
    if missing:
        shown = ", ".join(missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise EvaluationError(f"no predictions for sample ids: {shown}{more}")


def recall(
    predictions: PredictionSet,
    dataset: Dataset,
    n: int,
    m: float,
    comparator: str = COMPARATOR_STRICT,
) -> float:
    """Mean hit rate over the dataset's samples, in ingestion order."""
    _check_coverage(predictions, dataset)
    if len(dataset) == 0:
        raise EvaluationError("cannot evaluate an empty dataset")
    total = 0
    for s in dataset.samples:
        total += hit(n, m, predictions.entries[s.sample_id], (s.start, s.end), comparator)
    return total / len(dataset)


def discounted_recall(
    predictions: PredictionSet,
    dataset: Dataset,
    n: int,
    m: float,
    comparator: str = COMPARATOR_STRICT,
) -> float:
    """Recall with each hit discounted by its boundary-distance factors.

    When n > 1, the discount comes from the highest-IoU prediction among the
    top-n that passes the threshold (ties broken by better rank).
    """
    _check_coverage(predictions, dataset)
    if len(dataset) == 0:
        raise EvaluationError("cannot evaluate an empty dataset")
    total = 0.0
    for s in dataset.samples:
        gt = (s.start, s.end)
        best = _best_passing(predictions.entries[s.sample_id], gt, n, m, comparator)
        if best is None:
            continue
        alpha_s, alpha_e = discount_factors(best, gt, s.duration)
        total += alpha_s * alpha_e
    return total / len(dataset)


def metric_table(
    predictions: PredictionSet,
    dataset: Dataset,
    n_list: Sequence[int] = DEFAULT_N_LIST,
    m_list: Sequence[float] = DEFAULT_M_LIST,
    comparator: str = COMPARATOR_STRICT,
) -> MetricTable:
    """Both metrics at every (n, m) of the cross product."""
    rows: dict[tuple[int, float], dict[str, float]] = {}
    for n in n_list:
        for m in m_list:
            rows[(n, m)] = {
                "recall": recall(predictions, dataset, n, m, comparator),
                "discounted_recall": discounted_recall(predictions, dataset, n, m, comparator),
            }
    return MetricTable(rows=rows, n_q=len(dataset), comparator=comparator)


def load_predictions(lines: Iterable[str]) -> PredictionSet:
    """Parse prediction JSON lines: {"sample_id": ..., "moments": [[s, e], ...]}."""
    entries: dict[str, list[Moment]] = {}
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"line {i}: invalid JSON: {exc}") from None
        try:
            sid = str(record["sample_id"])
            moments = [(float(a), float(b)) for a, b in record["moments"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise EvaluationError(f"line {i}: bad prediction record: {exc}") from None
        if sid in entries:
            raise EvaluationError(f"line {i}: duplicate sample_id {sid!r}")
        entries[sid] = moments
    return PredictionSet(entries=entries)


def dump_predictions(predictions: PredictionSet) -> list[str]:
    return [
        json.dumps({"sample_id": sid, "moments": [[s, e] for s, e in moments]})
        for sid, moments in predictions.entries.items()
    ]
