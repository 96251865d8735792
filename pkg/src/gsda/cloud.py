"""Point cloud container and basic geometry helpers."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    BadCountError,
    DimensionMismatchError,
    EmptyCloudError,
    ValidationError,
)


@dataclass
class PointCloud:
    """An unordered set of 3-D points with an optional class label.

    ``points`` is always a float64 array of shape (n, 3) with finite
    entries; the constructor copies and validates whatever it is given.
    """

    points: np.ndarray
    label: int | None = None
    name: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DimensionMismatchError(
                "points must have shape (n, 3), got %r" % (pts.shape,)
            )
        if pts.shape[0] == 0:
            raise EmptyCloudError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points contain non-finite values")
        self.points = pts.copy()
        if self.label is not None:
            self.label = int(self.label)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def with_points(self, points: np.ndarray) -> "PointCloud":
        """Same label/name, new coordinates."""
        return replace(self, points=points)


def as_points(cloud) -> np.ndarray:
    """Accept a PointCloud or a bare (n, 3) array; return the array."""
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DimensionMismatchError(
            "expected an (n, 3) array, got shape %r" % (pts.shape,)
        )
    if pts.shape[0] == 0:
        raise EmptyCloudError("point set is empty")
    return pts


def normalize_unit_ball(cloud: PointCloud) -> PointCloud:
    """Center on the centroid and scale so max radius is exactly 1.

    A degenerate cloud where every point equals the centroid is returned
    centered but unscaled, since there is no radius to normalize.
    """
    pts = cloud.points
    centered = pts - pts.mean(axis=0)
    radius = np.sqrt((centered * centered).sum(axis=1).max())
    if radius > 0.0:
        centered = centered / radius
    return cloud.with_points(centered)


def sample_points(cloud: PointCloud, n: int, seed: int) -> PointCloud:
    """Random subset of n distinct points, seeded."""
    n = int(n)
    if n < 1:
        raise BadCountError("sample size must be >= 1, got %d" % n)
    if n > cloud.n:
        raise BadCountError(
            "sample size %d exceeds cloud size %d" % (n, cloud.n)
        )
    rng = np.random.default_rng(seed)
    idx = rng.choice(cloud.n, size=n, replace=False)
    idx.sort()
    return cloud.with_points(cloud.points[idx])
