"""Pair SLAM poses with GNSS positions by timestamp interpolation."""

from __future__ import annotations

import numpy as np

from ..geo import Trajectory


def resample_correspondences(slam: Trajectory, gnss: Trajectory,
                             ) -> tuple[np.ndarray, np.ndarray]:
    """Index-paired (source, target) coordinate arrays for the rigid fit.

    For every SLAM pose whose timestamp falls inside the GNSS time range,
    the GNSS position is linearly interpolated at that timestamp.
    """
    if slam.frame != "local" or gnss.frame != "local":
        raise ValueError("correspondence resampling expects local-frame "
                         "trajectories (project GNSS first)")
    ts = slam.timestamps
    tg = gnss.timestamps
    mask = (ts >= tg[0]) & (ts <= tg[-1])
    if not mask.any():
        raise ValueError(
            f"no temporal overlap: SLAM [{ts[0]}, {ts[-1]}] vs "
            f"GNSS [{tg[0]}, {tg[-1]}]")
    sel = ts[mask]
    gxy = gnss.xy()
    target = np.column_stack([np.interp(sel, tg, gxy[:, 0]),
                              np.interp(sel, tg, gxy[:, 1])])
    source = slam.xy()[mask]
    return source, target
