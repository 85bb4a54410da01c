"""2D Gaussian kernel density estimation over normalized moment locations.

The estimate is a product of two univariate Gaussians (one per boundary),
evaluated exactly as a kernel sum: no grid interpolation, no truncation, no
renormalization for mass leaking outside the unit square. Exactness keeps
split decisions reproducible; dataset sizes (<= ~72k points) keep it cheap.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from tsg_audit.ingest import NormalizedMoment

# Guards degenerate dimensions (e.g. every moment starting at 0).
BANDWIDTH_FLOOR = 1e-3

# Query chunk / training-point block sizes for the vectorized kernel sum.
_QUERY_CHUNK = 512
_POINT_BLOCK = 8192


@dataclass(frozen=True)
class KdeModel:
    """Fitted product-Gaussian KDE; immutable and safe to share."""

    points: np.ndarray  # (N, 2) float64, columns (s, e)
    bandwidth: tuple[float, float]  # (h_s, h_e), each > 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] == 0:
            raise ValueError("points must be a nonempty (N, 2) array")
        object.__setattr__(self, "points", pts)
        h_s, h_e = self.bandwidth
        if not (h_s > 0 and h_e > 0):
            raise ValueError(f"bandwidths must be positive, got {self.bandwidth}")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class DensityGrid:
    """Densities sampled at the cell centers of a uniform R x R grid.

    values[i][j] is the density at (s=axis[i], e=axis[j]); rows follow the
    start axis. The cell-area-weighted sum approximates the probability mass
    inside the unit square (always < 1: Gaussian tails leak outside).
    """

    resolution: int
    axis: np.ndarray  # (R,) cell-center coordinates over [0, 1]
    values: np.ndarray  # (R, R) nonnegative densities

    def mass(self) -> float:
        """Quadrature estimate of the probability mass over [0, 1]^2."""
        cell_area = 1.0 / (self.resolution * self.resolution)
        return float(self.values.sum() * cell_area)

    def argmax_coords(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.axis[i]), float(self.axis[j])

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "axis": [float(a) for a in self.axis],
            "values": [[float(v) for v in row] for row in self.values],
        }


def _scott_factor(n: int) -> float:
    # 2D data: n^(-1/(d+4)) with d=2.
    return float(n) ** (-1.0 / 6.0)


def _silverman_factor(n: int) -> float:
    d = 2
    return (n * (d + 2) / 4.0) ** (-1.0 / (d + 4))


def _rule_bandwidth(pts: np.ndarray, factor: float) -> tuple[float, float]:
    n = pts.shape[0]
    if n > 1:
        sigma = pts.std(axis=0, ddof=1)
    else:
        sigma = np.zeros(2)
    h = np.maximum(sigma * factor, BANDWIDTH_FLOOR)
    return float(h[0]), float(h[1])


def fit_kde(
    moments: Iterable[NormalizedMoment] | np.ndarray,
    bandwidth_policy: str | tuple[float, float] = "scott",
) -> KdeModel:
    """Fit the KDE over normalized (s, e) points.

    `bandwidth_policy` is "scott" (default), "silverman", or an explicit
    (h_s, h_e) pair. Rule-based bandwidths are per-dimension
    sigma * factor(N), floored at BANDWIDTH_FLOOR.
    """
    if isinstance(moments, np.ndarray):
        pts = np.asarray(moments, dtype=np.float64)
    else:
        pts = np.array([(m.s, m.e) for m in moments], dtype=np.float64)
    if pts.size == 0:
        raise ValueError("cannot fit a density on zero moments")
    pts = pts.reshape(-1, 2)
    if isinstance(bandwidth_policy, str):
        policy = bandwidth_policy.lower()
        if policy == "scott":
            bandwidth = _rule_bandwidth(pts, _scott_factor(pts.shape[0]))
        elif policy == "silverman":
            bandwidth = _rule_bandwidth(pts, _silverman_factor(pts.shape[0]))
        else:
            raise ValueError(f"unknown bandwidth policy {bandwidth_policy!r}")
    else:
        h_s, h_e = float(bandwidth_policy[0]), float(bandwidth_policy[1])
        if h_s <= 0 or h_e <= 0:
            raise ValueError(f"explicit bandwidths must be positive, got {bandwidth_policy}")
        bandwidth = (h_s, h_e)
    return KdeModel(points=pts, bandwidth=bandwidth)


def _eval_chunk(model: KdeModel, queries: np.ndarray) -> np.ndarray:
    """Kernel sum for one chunk of queries, blocked over training points.

    Block order is fixed, so results are bit-identical no matter which
    thread runs the chunk.
    """
    h_s, h_e = model.bandwidth
    norm = 1.0 / (2.0 * math.pi * h_s * h_e * model.n_points)
    qs = queries[:, 0][:, None]
    qe = queries[:, 1][:, None]
    total = np.zeros(queries.shape[0])
    for lo in range(0, model.n_points, _POINT_BLOCK):
        block = model.points[lo : lo + _POINT_BLOCK]
        zs = (qs - block[:, 0][None, :]) / h_s
        ze = (qe - block[:, 1][None, :]) / h_e
        total += np.exp(-0.5 * (zs * zs + ze * ze)).sum(axis=1)
    return total * norm


def density_many(
    model: KdeModel, points: np.ndarray, threads: int = 1
) -> np.ndarray:
    """Exact densities for an (M, 2) array of query points.

    `threads` only partitions the query set; per-query arithmetic and
    summation order are unchanged, so results do not depend on it.
    """
    queries = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    chunks = [queries[lo : lo + _QUERY_CHUNK] for lo in range(0, len(queries), _QUERY_CHUNK)]
    if not chunks:
        return np.zeros(0)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _eval_chunk(model, c), chunks))
    else:
        parts = [_eval_chunk(model, c) for c in chunks]
    return np.concatenate(parts)


def density_at(model: KdeModel, point: NormalizedMoment | tuple[float, float]) -> float:
    """Exact kernel-sum density at a single (s, e) point."""
    if isinstance(point, NormalizedMoment):
        q = np.array([[point.s, point.e]])
    else:
        q = np.array([point], dtype=np.float64)
    return float(_eval_chunk(model, q)[0])


def density_grid(model: KdeModel, resolution: int, threads: int = 1) -> DensityGrid:
    """Evaluate the density at the cell centers of an R x R grid over [0,1]^2."""
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    axis = (np.arange(resolution) + 0.5) / resolution
    ss, ee = np.meshgrid(axis, axis, indexing="ij")
    queries = np.column_stack([ss.ravel(), ee.ravel()])
    values = density_many(model, queries, threads=threads).reshape(resolution, resolution)
    return DensityGrid(resolution=resolution, axis=axis, values=values)


def sample_from(model: KdeModel, rng_seed, count: int) -> list[NormalizedMoment]:
    """Draw `count` valid normalized moments from the fitted density.

    Each draw picks a training point uniformly and perturbs it with
    per-dimension Gaussian noise at the model bandwidth. Draws violating
    0 <= s <= e <= 1 are retried with fresh noise up to 16 times, then
    clamped into [0, 1] and swapped into order.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(rng_seed)
    h = np.array(model.bandwidth)
    out: list[NormalizedMoment] = []
    for _ in range(count):
        base = model.points[rng.integers(model.n_points)]
        cand = base + rng.normal(size=2) * h
        attempts = 0
        while not (0.0 <= cand[0] <= cand[1] <= 1.0) and attempts < 16:
            cand = base + rng.normal(size=2) * h
            attempts += 1
        s = min(max(float(cand[0]), 0.0), 1.0)
        e = min(max(float(cand[1]), 0.0), 1.0)
        if s > e:
            s, e = e, s
        out.append(NormalizedMoment(s=s, e=e))
    return out


def rank_moments(
    model: KdeModel, moments: Sequence[NormalizedMoment], threads: int = 1
) -> np.ndarray:
    """Indices of `moments` in descending density order, ties by position."""
    pts = np.array([(m.s, m.e) for m in moments], dtype=np.float64)
    dens = density_many(model, pts, threads=threads)
    return np.argsort(-dens, kind="stable")
