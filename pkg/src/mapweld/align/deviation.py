"""Trajectory deviation statistics.

The two trajectories differ in sampling, so residuals are computed as
the minimum distance from each SLAM pose to the GNSS *polyline*
(point-to-segment, not point-to-vertex).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geo import Trajectory


@dataclass
class AlignmentReport:
    mean_deviation: float
    std_deviation: float  # population standard deviation
    rmse: float
    residuals: np.ndarray

    def to_dict(self) -> dict:
        return {"mean_deviation": self.mean_deviation,
                "std_deviation": self.std_deviation,
                "rmse": self.rmse,
                "residuals": [float(r) for r in self.residuals]}

    @classmethod
    def from_dict(cls, d) -> "AlignmentReport":
        return cls(d["mean_deviation"], d["std_deviation"], d["rmse"],
                   np.asarray(d["residuals"], dtype=float))


def min_distances_to_polyline(points: np.ndarray, line: np.ndarray,
                              ) -> np.ndarray:
    """Minimum Euclidean distance from each point to a polyline, vectorized."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    line = np.asarray(line, dtype=float).reshape(-1, 2)
    if len(line) == 1:
        return np.linalg.norm(points - line[0], axis=1)
    a = line[:-1]          # (M, 2) segment starts
    d = line[1:] - a       # (M, 2) segment vectors
    len2 = (d ** 2).sum(axis=1)
    len2[len2 == 0.0] = 1.0  # degenerate segments collapse to their start

    best = np.full(len(points), np.inf)
    chunk = max(1, int(2_000_000 // max(1, len(a))))
    for lo in range(0, len(points), chunk):
        p = points[lo:lo + chunk]
        # t of the closest point on each segment, clamped to [0, 1]
        t = ((p[:, None, :] - a[None, :, :]) * d[None, :, :]).sum(-1) / len2
        t = np.clip(t, 0.0, 1.0)
        closest = a[None, :, :] + t[:, :, None] * d[None, :, :]
        dist = np.linalg.norm(p[:, None, :] - closest, axis=-1)
        best[lo:lo + chunk] = dist.min(axis=1)
    return best


def deviation_stats(slam: Trajectory, gnss: Trajectory) -> AlignmentReport:
    """Min-distance residuals of the SLAM trajectory against the GNSS one."""
    if slam.frame != gnss.frame:
        raise ValueError(f"frame mismatch: {slam.frame} vs {gnss.frame}")
    if slam.frame != "local":
        raise ValueError("deviation statistics expect local-frame trajectories")
    residuals = min_distances_to_polyline(slam.xy(), gnss.xy())
    return AlignmentReport(
        mean_deviation=float(residuals.mean()),
        std_deviation=float(residuals.std()),
        rmse=float(np.sqrt((residuals ** 2).mean())),
        residuals=residuals,
    )
