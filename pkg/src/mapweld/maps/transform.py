"""Geometry-only map transforms: rigid / rubber-sheet application and
frame changes (projection, georeferencing).

Every operation rewrites point coordinates in place of a copied map and
leaves ids, references, attributes, and z untouched.
"""

from __future__ import annotations

import copy

import numpy as np

from ..errors import CoverageError, StateError
from ..geo import GeoPoint, LocalPoint, RigidTransform2D, UtmProjector
from .lanelet import LaneletMap
from .pcd import PointCloudMap


def _apply_xy(transform, xy: np.ndarray) -> np.ndarray:
    # RigidTransform2D and PiecewiseAffineTransform both expose apply_xy.
    return transform.apply_xy(xy)


def transform_map(m: LaneletMap | PointCloudMap, transform):
    """Apply a planar transform to every point of a local-frame map.

    Shared points are transformed exactly once (by id).  Raises
    CoverageError naming the offending points if any fall outside a
    rubber-sheet's extent.
    """
    if isinstance(m, PointCloudMap):
        xy = _apply_xy(transform, m.xyz[:, :2])
        out = PointCloudMap(np.column_stack([xy, m.xyz[:, 2]]),
                            None if m.intensity is None else m.intensity.copy())
        return out

    if m.frame != "local":
        raise StateError("transform_map requires a local-frame map")
    out = copy.deepcopy(m)
    ids = sorted(out.points)
    if not ids:
        return out
    xy = np.array([(out.points[i].position.x, out.points[i].position.y)
                   for i in ids])
    try:
        new_xy = _apply_xy(transform, xy)
    except CoverageError as exc:
        bad = getattr(exc, "indices", None)
        if bad is not None:
            named = [ids[i] for i in bad]
            raise CoverageError(
                f"map points outside transform coverage: ids {named[:10]}"
                + ("..." if len(named) > 10 else ""),
                points=exc.points) from exc
        raise
    for i, pid in enumerate(ids):
        old = out.points[pid].position
        out.points[pid].position = LocalPoint(float(new_xy[i, 0]),
                                              float(new_xy[i, 1]), old.z)
    return out


def georeference_map(m: LaneletMap, proj: UtmProjector) -> LaneletMap:
    """Turn a local-frame map global by inverse projection of every point."""
    if m.frame != "local":
        raise StateError("map is not in the local frame")
    out = copy.deepcopy(m)
    for pt in out.points.values():
        pt.position = proj.unproject(pt.position)
    out.frame = "global"
    return out


def project_map(m: LaneletMap, proj: UtmProjector) -> LaneletMap:
    """Project a global-frame map into the local grid frame."""
    if m.frame != "global":
        raise StateError("map is not in the global frame")
    out = copy.deepcopy(m)
    for pt in out.points.values():
        pt.position = proj.project(pt.position)
    out.frame = "local"
    return out
