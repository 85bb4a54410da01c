"""Synthetic grounding datasets with controllable moment-location bias.

Moment locations are drawn from a mixture of axis-aligned Gaussian clusters
in normalized (s, e) space, then scaled by per-video durations. Named presets
mirror the bias geometries seen in real benchmarks: a diagonal "strip" of
short early moments, a "three-corner" layout with video-initial, video-final
and whole-video moments, and a "two-cluster" majority/minority layout used by
the end-to-end bias-collapse checks.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from tsg_audit.ingest import Dataset, Sample

_MIN_GAP = 1e-6


@dataclass(frozen=True)
class ClusterSpec:
    weight: float
    center: tuple[float, float]  # (s, e) with s <= e
    spread: tuple[float, float]  # per-dimension std, > 0

    def __post_init__(self):
        if self.center[0] > self.center[1]:
            raise ValueError(f"cluster center must satisfy s <= e, got {self.center}")
        if min(self.spread) <= 0:
            raise ValueError(f"cluster spreads must be positive, got {self.spread}")


@dataclass(frozen=True)
class SynthConfig:
    cluster_specs: tuple[ClusterSpec, ...]
    videos: int
    samples_per_video: int
    duration_range: tuple[float, float]
    seed: int
    vocabulary: tuple[str, ...]

    def __post_init__(self):
        total = sum(c.weight for c in self.cluster_specs)
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"cluster weights must sum to 1, got {total}")
        if self.videos < 1 or self.samples_per_video < 1:
            raise ValueError("videos and samples_per_video must be >= 1")
        lo, hi = self.duration_range
        if not (0 < lo <= hi):
            raise ValueError(f"bad duration range {self.duration_range}")
        if not self.vocabulary:
            raise ValueError("vocabulary must be nonempty")


DEFAULT_VOCABULARY = (
    "cooking a meal",
    "opening the door",
    "running across the room",
    "washing the dishes",
    "drinking a glass of water",
    "eating a snack",
    "throwing a pillow",
    "sitting down on the couch",
    "standing up slowly",
    "laughing at the camera",
)


def _preset_two_cluster(seed: int) -> SynthConfig:
    return SynthConfig(
        cluster_specs=(
            ClusterSpec(weight=0.75, center=(0.10, 0.35), spread=(0.015, 0.015)),
            ClusterSpec(weight=0.25, center=(0.60, 0.85), spread=(0.015, 0.015)),
        ),
        videos=900,
        samples_per_video=1,
        duration_range=(20.0, 40.0),
        seed=seed,
        vocabulary=DEFAULT_VOCABULARY,
    )


def _preset_strip(seed: int) -> SynthConfig:
    # Short moments near the start of the video, length concentrated ~0.3.
    centers = [(0.00, 0.30), (0.10, 0.40), (0.20, 0.50), (0.30, 0.60), (0.40, 0.70)]
    return SynthConfig(
        cluster_specs=tuple(
            ClusterSpec(weight=0.2, center=c, spread=(0.04, 0.04)) for c in centers
        ),
        videos=800,
        samples_per_video=2,
        duration_range=(15.0, 45.0),
        seed=seed,
        vocabulary=DEFAULT_VOCABULARY,
    )


def _preset_three_corner(seed: int) -> SynthConfig:
    # Video-initial, video-final and whole-video moments.
    return SynthConfig(
        cluster_specs=(
            ClusterSpec(weight=0.40, center=(0.03, 0.35), spread=(0.03, 0.08)),
            ClusterSpec(weight=0.30, center=(0.65, 0.97), spread=(0.08, 0.03)),
            ClusterSpec(weight=0.30, center=(0.02, 0.98), spread=(0.02, 0.02)),
        ),
        videos=800,
        samples_per_video=3,
        duration_range=(30.0, 120.0),
        seed=seed,
        vocabulary=DEFAULT_VOCABULARY,
    )


PRESETS = {
    "two-cluster": _preset_two_cluster,
    "strip": _preset_strip,
    "three-corner": _preset_three_corner,
}


def preset_config(name: str, seed: int) -> SynthConfig:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _draw_moment(rng: np.random.Generator, cluster: ClusterSpec) -> tuple[float, float]:
    s, e = np.array(cluster.center) + rng.normal(size=2) * np.array(cluster.spread)
    s = min(max(float(s), 0.0), 1.0)
    e = min(max(float(e), 0.0), 1.0)
    if s > e:
        s, e = e, s
    if e - s < _MIN_GAP:
        # Degenerate after clamping (both boundaries hit the same edge).
        e = min(1.0, s + 1e-3)
        if e - s < _MIN_GAP:
            s = max(0.0, e - 1e-3)
    return s, e


def generate(config: SynthConfig, name: str = "synth") -> Dataset:
    """Generate a deterministic synthetic dataset from the config."""
    rng = np.random.default_rng(config.seed)
    weights = np.array([c.weight for c in config.cluster_specs])
    weights = weights / weights.sum()
    lo, hi = config.duration_range
    width = max(1, len(str(config.videos - 1)))

    samples = []
    for v in range(config.videos):
        video_id = f"v{v:0{width}d}"
        duration = float(rng.uniform(lo, hi))
        for j in range(config.samples_per_video):
            cluster = config.cluster_specs[int(rng.choice(len(weights), p=weights))]
            s, e = _draw_moment(rng, cluster)
            phrase = config.vocabulary[int(rng.integers(len(config.vocabulary)))]
            samples.append(
                Sample(
                    sample_id=f"{video_id}#{j}",
                    video_id=video_id,
                    duration=duration,
                    start=s * duration,
                    end=e * duration,
                    query=f"a person is {phrase}.",
                )
            )
    return Dataset(name=name, samples=tuple(samples))


def with_seed(config: SynthConfig, seed: int) -> SynthConfig:
    return dataclasses.replace(config, seed=seed)
