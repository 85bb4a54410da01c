"""Density-based dataset re-splitting into training / val / test-iid / test-ood.

The pipeline: fit a KDE over all normalized moments, rank samples by density,
cut the lowest-density fraction as the preliminary OOD set, make the cut
video-disjoint (majority rule per video, with overlong moments pinned to the
training side first when a threshold is configured), then randomly divide the
remaining videos into training, val and test-iid at the configured sample
shares.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from tsg_audit.density import KdeModel, density_many, fit_kde
from tsg_audit.ingest import Dataset, normalize, normalized_moments


class SplitLabel(str, enum.Enum):
    TRAINING = "training"
    VAL = "val"
    TEST_IID = "test_iid"
    TEST_OOD = "test_ood"


@dataclass(frozen=True)
class SplitConfig:
    """Knobs of the re-splitting algorithm.

    `ood_fraction` plus the three `ratios` (training, val, test_iid) must sum
    to 1. `overlong_threshold` pins samples whose normalized length exceeds it
    to the training side; use 0.5 for corpora with whole-video annotations
    (ActivityNet-style), None to disable (Charades-style).
    """

    seed: int
    ood_fraction: float = 0.20
    ratios: tuple[float, float, float] = (0.70, 0.05, 0.05)
    overlong_threshold: float | None = None
    bandwidth_policy: str | tuple[float, float] = "scott"

    def __post_init__(self):
        fractions = (self.ood_fraction, *self.ratios)
        if any(not (0.0 < f < 1.0) for f in fractions):
            raise ValueError(f"all fractions must be in (0, 1), got {fractions}")
        total = self.ood_fraction + sum(self.ratios)
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"ood_fraction + ratios must sum to 1, got {total}")
        if self.overlong_threshold is not None and not (0.0 < self.overlong_threshold < 1.0):
            raise ValueError(f"overlong_threshold must be in (0, 1) or None")


@dataclass
class SplitResult:
    """Total assignment of sample ids to split labels plus a manifest."""

    assignment: dict[str, SplitLabel]
    manifest: dict = field(default_factory=dict)

    def ids(self, label: SplitLabel) -> list[str]:
        return [sid for sid, lab in self.assignment.items() if lab is label]

    def to_dict(self) -> dict:
        return {
            "splits": {label.value: self.ids(label) for label in SplitLabel},
            "manifest": self.manifest,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "SplitResult":
        assignment: dict[str, SplitLabel] = {}
        for label_name, ids in payload["splits"].items():
            label = SplitLabel(label_name)
            for sid in ids:
                if sid in assignment:
                    raise ValueError(f"sample id {sid!r} listed under two splits")
                assignment[sid] = label
        return cls(assignment=assignment, manifest=payload.get("manifest", {}))


def rank_by_density(
    dataset: Dataset, model: KdeModel, threads: int = 1
) -> list[str]:
    """Sample ids in descending density order; ties by ingestion index."""
    if model.n_points != len(dataset):
        raise ValueError(
            f"model fitted on {model.n_points} points but dataset has "
            f"{len(dataset)} samples"
        )
    moments = normalized_moments(dataset)
    pts = np.array([(m.s, m.e) for m in moments])
    dens = density_many(model, pts, threads=threads)
    order = np.argsort(-dens, kind="stable")
    return [dataset.samples[i].sample_id for i in order]


def preliminary_split(
    ranked: list[str], ood_fraction: float
) -> tuple[set[str], set[str]]:
    """Cut the lowest-density floor(ood_fraction * N) ids as preliminary OOD."""
    n_ood = int(len(ranked) * ood_fraction)
    prelim_ood = set(ranked[len(ranked) - n_ood :]) if n_ood else set()
    prelim_train = set(ranked[: len(ranked) - n_ood])
    return prelim_train, prelim_ood


def resolve_conflicts(
    dataset: Dataset,
    prelim_train: set[str],
    prelim_ood: set[str],
    overlong_threshold: float | None = None,
) -> tuple[set[str], set[str], dict]:
    """Make the preliminary cut video-disjoint.

    Order of operations: (1) when a threshold is set, every sample whose
    normalized length exceeds it is forced to the training side along with
    all other samples of its video; (2) each remaining video with samples on
    both sides moves wholly to the side holding the strict majority of its
    samples, ties to the training side. Returns (train_pool, test_ood, stats)
    where stats counts samples moved by each rule.
    """
    train_pool = set(prelim_train)
    test_ood = set(prelim_ood)

    overlong_pinned = 0
    if overlong_threshold is not None:
        pinned_videos = {
            s.video_id
            for s in dataset.samples
            if normalize(s).length > overlong_threshold
        }
        forced = {s.sample_id for s in dataset.samples if s.video_id in pinned_videos}
        moved = forced & test_ood
        overlong_pinned = len(moved)
        test_ood -= moved
        train_pool |= moved

    by_video: dict[str, list[str]] = {}
    for s in dataset.samples:
        by_video.setdefault(s.video_id, []).append(s.sample_id)

    conflict_moved = 0
    for _video, sids in by_video.items():
        on_train = [sid for sid in sids if sid in train_pool]
        on_ood = [sid for sid in sids if sid in test_ood]
        if not on_train or not on_ood:
            continue
        if len(on_ood) > len(on_train):
            train_pool -= set(on_train)
            test_ood |= set(on_train)
            conflict_moved += len(on_train)
        else:
            test_ood -= set(on_ood)
            train_pool |= set(on_ood)
            conflict_moved += len(on_ood)

    stats = {"conflict_moved": conflict_moved, "overlong_pinned": overlong_pinned}
    return train_pool, test_ood, stats


def finalize_splits(
    dataset: Dataset,
    train_pool: set[str],
    ratios: tuple[float, float, float],
    seed: int,
) -> dict[str, SplitLabel]:
    """Randomly divide the pool's videos into training / val / test-iid.

    Videos are shuffled with the seeded generator and assigned greedily: to
    val while val is below its target sample count, then to test-iid, the
    remainder to training. Targets are the configured ratios rescaled to the
    pool, so the three splits keep their relative sample shares. All samples
    of a video share one label.
    """
    pool_samples = [s for s in dataset.samples if s.sample_id in train_pool]
    video_order: list[str] = []
    video_samples: dict[str, list[str]] = {}
    for s in pool_samples:
        if s.video_id not in video_samples:
            video_samples[s.video_id] = []
            video_order.append(s.video_id)
        video_samples[s.video_id].append(s.sample_id)

    if len(video_order) < 3:
        raise ValueError(
            f"pool has {len(video_order)} videos; need at least 3 to populate "
            "training, val and test-iid"
        )

    ratio_sum = sum(ratios)
    total = len(pool_samples)
    target_val = ratios[1] / ratio_sum * total
    target_iid = ratios[2] / ratio_sum * total

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(video_order))

    assignment: dict[str, SplitLabel] = {}
    val_count = 0
    iid_count = 0
    training_videos = 0
    for vi in perm:
        video = video_order[int(vi)]
        sids = video_samples[video]
        if val_count < target_val:
            label = SplitLabel.VAL
            val_count += len(sids)
        elif iid_count < target_iid:
            label = SplitLabel.TEST_IID
            iid_count += len(sids)
        else:
            label = SplitLabel.TRAINING
            training_videos += 1
        for sid in sids:
            assignment[sid] = label

    if val_count == 0 or iid_count == 0 or training_videos == 0:
        raise ValueError("pool too small: a finalized split came out empty")
    return assignment


def validate_split(dataset: Dataset, result: SplitResult) -> None:
    """Check totality and video-disjointness; raises on violation."""
    dataset_ids = {s.sample_id for s in dataset.samples}
    assigned_ids = set(result.assignment)
    if dataset_ids != assigned_ids:
        missing = sorted(dataset_ids - assigned_ids)[:5]
        extra = sorted(assigned_ids - dataset_ids)[:5]
        raise RuntimeError(
            f"assignment is not a total partition (missing={missing}, extra={extra})"
        )
    video_label: dict[str, SplitLabel] = {}
    for s in dataset.samples:
        label = result.assignment[s.sample_id]
        seen = video_label.setdefault(s.video_id, label)
        if seen is not label:
            raise RuntimeError(
                f"video {s.video_id!r} spans splits {seen.value} and {label.value}"
            )


def resplit(dataset: Dataset, config: SplitConfig, threads: int = 1) -> SplitResult:
    """Run the full re-splitting pipeline and return a validated SplitResult."""
    if len(dataset) == 0:
        raise ValueError("cannot resplit an empty dataset")

    model = fit_kde(normalized_moments(dataset), config.bandwidth_policy)
    ranked = rank_by_density(dataset, model, threads=threads)
    prelim_train, prelim_ood = preliminary_split(ranked, config.ood_fraction)
    train_pool, test_ood, stats = resolve_conflicts(
        dataset, prelim_train, prelim_ood, config.overlong_threshold
    )
    assignment = finalize_splits(dataset, train_pool, config.ratios, config.seed)
    for sid in test_ood:
        assignment[sid] = SplitLabel.TEST_OOD
    # Re-emit in dataset order so exports are deterministic.
    assignment = {s.sample_id: assignment[s.sample_id] for s in dataset.samples}

    counts = {label.value: 0 for label in SplitLabel}
    video_sets: dict[str, set[str]] = {label.value: set() for label in SplitLabel}
    for s in dataset.samples:
        label = assignment[s.sample_id]
        counts[label.value] += 1
        video_sets[label.value].add(s.video_id)

    policy = config.bandwidth_policy
    manifest = {
        "seed": config.seed,
        "bandwidth_policy": policy if isinstance(policy, str) else list(policy),
        "bandwidths": [model.bandwidth[0], model.bandwidth[1]],
        "config": {
            "ood_fraction": config.ood_fraction,
            "ratios": list(config.ratios),
            "overlong_threshold": config.overlong_threshold,
        },
        "total_samples": len(dataset),
        "counts": counts,
        "video_counts": {k: len(v) for k, v in video_sets.items()},
        "conflict_moved": stats["conflict_moved"],
        "overlong_pinned": stats["overlong_pinned"],
    }
    result = SplitResult(assignment=assignment, manifest=manifest)
    validate_split(dataset, result)
    return result


def split_datasets(dataset: Dataset, result: SplitResult) -> dict[SplitLabel, Dataset]:
    """Materialize one sub-dataset per split label, in dataset order."""
    out = {}
    for label in SplitLabel:
        ids = [s.sample_id for s in dataset.samples if result.assignment.get(s.sample_id) is label]
        out[label] = dataset.subset(ids, name=f"{dataset.name}-{label.value}")
    return out
