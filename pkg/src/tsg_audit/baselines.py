"""Training-free baselines that expose moment-annotation bias.

The bias-based predictor samples moment locations from a KDE fitted on the
training split, never looking at the query or the video; the predict-all
predictor returns the whole video. Either scoring well on a benchmark says
more about the benchmark's annotation distribution than about grounding.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

from tsg_audit.density import KdeModel, density_at, sample_from
from tsg_audit.ingest import Dataset
from tsg_audit.metrics import PredictionSet


@dataclass(frozen=True)
class BaselineConfig:
    kind: str  # "bias_based" or "predict_all"
    top_n: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("bias_based", "predict_all"):
            raise ValueError(f"unknown baseline kind {self.kind!r}")
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")


def _sample_seed(seed: int, sample_id: str) -> list[int]:
    # Derived per-sample stream: stable under reordering or gt edits, so
    # predictions depend only on (model, seed, durations).
    return [seed, zlib.crc32(sample_id.encode("utf-8"))]


def bias_based_predict(
    model: KdeModel, dataset_split: Dataset, config: BaselineConfig
) -> PredictionSet:
    """Draw top_n moments per query from the fitted location density.

    Draws are ranked best-first by their density under the model and
    de-normalized by each sample's video duration.
    """
    entries = {}
    for s in dataset_split.samples:
        draws = sample_from(model, _sample_seed(config.seed, s.sample_id), config.top_n)
        ranked = sorted(draws, key=lambda mom: -density_at(model, mom))
        entries[s.sample_id] = [(mom.s * s.duration, mom.e * s.duration) for mom in ranked]
    return PredictionSet(entries=entries)


def predict_all(dataset_split: Dataset, top_n: int = 1) -> PredictionSet:
    """Predict the whole video, top_n times, for every query."""
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    return PredictionSet(
        entries={s.sample_id: [(0.0, s.duration)] * top_n for s in dataset_split.samples}
    )
