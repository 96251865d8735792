"""Input-sanitization defenses: statistical outlier removal and simple
random sampling.  Both return a subset of the input points; coordinates
are never modified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import BadCountError, ConfigError, TooFewPointsError


@dataclass
class SorConfig:
    k_neighbors: int = 2
    alpha: float = 1.1
    drop_ratio: float | None = None

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if self.alpha <= 0:
            raise ConfigError("alpha must be > 0")
        if self.drop_ratio is not None and not 0.0 <= self.drop_ratio < 1.0:
            raise ConfigError("drop_ratio must lie in [0, 1)")


def sor_scores(cloud: PointCloud, k_neighbors: int) -> np.ndarray:
    """Mean Euclidean distance from each point to its k nearest others."""
    pts = cloud.points
    n = pts.shape[0]
    if n <= k_neighbors:
        raise TooFewPointsError(
            "SOR with k=%d needs more than %d points, got %d"
            % (k_neighbors, k_neighbors, n)
        )
    sq = np.einsum("ij,ij->i", pts, pts)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, np.inf)
    part = np.partition(d2, k_neighbors - 1, axis=1)[:, :k_neighbors]
    return np.sqrt(part).mean(axis=1)


def sor_defense(cloud: PointCloud, config: SorConfig | None = None) -> PointCloud:
    """Drop statistical outliers by mean-kNN-distance score.

    Threshold mode keeps points with score <= mu + alpha*sigma.  When
    ``drop_ratio`` is set it overrides the threshold and exactly
    ceil(ratio*n) top-scoring points are dropped, resolving score ties in
    favor of keeping the lower index.
    """
    if config is None:
        config = SorConfig()
    scores = sor_scores(cloud, config.k_neighbors)
    n = scores.shape[0]
    if config.drop_ratio is not None:
        m = math.ceil(config.drop_ratio * n)
        if m == 0:
            return cloud.with_points(cloud.points.copy())
        # order by score descending, higher index first among ties
        order = np.lexsort((-np.arange(n), -scores))
        keep = np.ones(n, dtype=bool)
        keep[order[:m]] = False
    else:
        cut = scores.mean() + config.alpha * scores.std()
        keep = scores <= cut
    if not keep.any():
        raise TooFewPointsError("SOR removed every point")
    return cloud.with_points(cloud.points[keep])


def srs_defense(cloud: PointCloud, drop_count: int, seed: int = 0) -> PointCloud:
    """Drop a uniformly random subset of exactly drop_count points."""
    drop_count = int(drop_count)
    n = cloud.n
    if not 0 <= drop_count < n:
        raise BadCountError(
            "drop_count must lie in [0, %d), got %d" % (n, drop_count)
        )
    if drop_count == 0:
        return cloud.with_points(cloud.points.copy())
    rng = np.random.default_rng(seed)
    drop = rng.choice(n, size=drop_count, replace=False)
    keep = np.ones(n, dtype=bool)
    keep[drop] = False
    return cloud.with_points(cloud.points[keep])
