"""Least-squares rigid registration of index-paired 2D point sets.

The full similarity solution (rotation, translation, scale) is computed
and the scale factor is then discarded: map geometry must keep its
Euclidean distances, so only the rotational and translational parts are
ever applied.
"""

from __future__ import annotations

import numpy as np

from ..errors import DegenerateInputError
from ..geo import RigidTransform2D


def umeyama_fit(source, target) -> RigidTransform2D:
    """Best rigid transform mapping source onto target (unit scale).

    Correspondence is by index.  Needs at least two points and a
    non-degenerate source set; collinear sets are fine (two distinct
    points determine a 2D rotation).
    """
    src = np.asarray(source, dtype=float).reshape(-1, 2)
    dst = np.asarray(target, dtype=float).reshape(-1, 2)
    if src.shape != dst.shape:
        raise ValueError(f"point set sizes differ: {src.shape} vs {dst.shape}")
    n = len(src)
    if n < 2:
        raise ValueError("need at least 2 point pairs")

    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    src_d = src - mu_s
    dst_d = dst - mu_d
    if not src_d.any():
        raise DegenerateInputError("all source points coincide")

    cov = dst_d.T @ src_d / n
    u, s, vt = np.linalg.svd(cov)

    # Umeyama's sign rule, including the rank-deficient (collinear) case.
    d = np.ones(2)
    rank = np.linalg.matrix_rank(cov)
    if rank == 1:
        if np.linalg.det(u) * np.linalg.det(vt) < 0.0:
            d[1] = -1.0
    elif np.linalg.det(cov) < 0.0:
        d[1] = -1.0
    rot = u @ np.diag(d) @ vt

    # Full solution would scale by trace(diag(s) @ diag(d)) / var(src);
    # it is computed here only to mirror the complete estimation, then
    # dropped in favor of unit scale.
    var_s = (src_d ** 2).sum() / n
    _scale = float((s * d).sum() / var_s) if var_s > 0 else 1.0  # noqa: F841

    t = mu_d - rot @ mu_s
    return RigidTransform2D(rot, t)
