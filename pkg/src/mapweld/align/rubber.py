"""Piecewise-linear rubber-sheet transformation.

Control-point pairs pin the warp: a triangulation is built over the
source positions inside a bounding rectangle whose corners stay fixed,
and each triangle gets its own homogeneous affine matrix solved from the
three vertex correspondences.  Points are transformed by the matrix of
their surrounding triangle, so the map is continuous and exactly
interpolates every control point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..errors import CoverageError
from ..geo import LocalPoint
from .mesh import BoundingBox, TriangleMesh


@dataclass(frozen=True)
class ControlPointPair:
    source: LocalPoint  # on the SLAM trajectory
    target: LocalPoint  # on the GNSS trajectory

    @classmethod
    def of(cls, sx, sy, tx, ty) -> "ControlPointPair":
        return cls(LocalPoint(float(sx), float(sy)),
                   LocalPoint(float(tx), float(ty)))


def read_control_points(data: str | bytes) -> list[ControlPointPair]:
    """Control points from JSON: [{"source": [x, y], "target": [x, y]}, ...]."""
    entries = json.loads(data)
    pairs = []
    for i, e in enumerate(entries):
        try:
            pairs.append(ControlPointPair.of(*e["source"], *e["target"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"bad control point at index {i}: {exc}") from exc
    return pairs


def write_control_points(pairs) -> str:
    return json.dumps(
        [{"source": [p.source.x, p.source.y],
          "target": [p.target.x, p.target.y]} for p in pairs], indent=2)


class PiecewiseAffineTransform:
    """Triangulated mesh over the source frame with one affine per triangle."""

    def __init__(self, mesh: TriangleMesh, target_xy: np.ndarray,
                 tri_ids: list[int], matrices: np.ndarray):
        self._mesh = mesh
        self.extent = mesh.extent
        self.source_xy = np.asarray(mesh.vertex_xy, dtype=float)
        self.target_xy = np.asarray(target_xy, dtype=float)
        self.tri_ids = list(tri_ids)  # live mesh ids, ascending
        self.matrices = matrices      # (T, 3, 3), indexed like tri_ids
        self.triangles = [mesh.triangles[i].vertices for i in tri_ids]

    @property
    def triangle_count(self) -> int:
        return len(self.tri_ids)

    def locate(self, p: LocalPoint | tuple) -> int:
        """Index (into triangles/matrices) of the triangle containing p."""
        x, y = (p.x, p.y) if isinstance(p, LocalPoint) else (p[0], p[1])
        idx = self._assign_triangles(np.array([[x, y]]))[0]
        if idx < 0:
            raise CoverageError(f"point ({x}, {y}) outside rubber-sheet extent",
                                points=[(x, y)])
        return int(idx)

    def _assign_triangles(self, xy: np.ndarray) -> np.ndarray:
        """Per-point triangle index, -1 where uncovered; lowest index wins."""
        xy = np.asarray(xy, dtype=float)
        out = np.full(len(xy), -1, dtype=int)
        eps = self._mesh._eps_area
        pending = np.ones(len(xy), dtype=bool)
        for k, verts in enumerate(self.triangles):
            if not pending.any():
                break
            a, b, c = (self.source_xy[v] for v in verts)
            px, py = xy[pending, 0], xy[pending, 1]
            s1 = (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])
            s2 = (c[0] - b[0]) * (py - b[1]) - (c[1] - b[1]) * (px - b[0])
            s3 = (a[0] - c[0]) * (py - c[1]) - (a[1] - c[1]) * (px - c[0])
            inside = (s1 >= -eps) & (s2 >= -eps) & (s3 >= -eps)
            idx = np.flatnonzero(pending)
            out[idx[inside]] = k
            pending[idx[inside]] = False
        return out

    def apply_xy(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float).reshape(-1, 2)
        assign = self._assign_triangles(xy)
        bad = np.flatnonzero(assign < 0)
        if len(bad):
            exc = CoverageError(
                f"{len(bad)} point(s) outside rubber-sheet extent, first at "
                f"({xy[bad[0], 0]}, {xy[bad[0], 1]})",
                points=[tuple(xy[i]) for i in bad[:10]])
            exc.indices = bad.tolist()
            raise exc
        homog = np.column_stack([xy, np.ones(len(xy))])
        out = np.einsum("nij,nj->ni", self.matrices[assign], homog)
        return out[:, :2]

    def apply_points(self, pts) -> list[LocalPoint]:
        xy = np.array([(p.x, p.y) for p in pts])
        new = self.apply_xy(xy)
        return [LocalPoint(float(x), float(y), p.z)
                for (x, y), p in zip(new, pts)]

    def mesh_geometry(self) -> dict:
        """Triangulation (source and target) for display purposes."""
        return {
            "vertices": self.source_xy.tolist(),
            "targets": self.target_xy.tolist(),
            "triangles": [list(v) for v in self.triangles],
        }


def build_rubber_sheet(control_points, extent: BoundingBox,
                       ) -> PiecewiseAffineTransform:
    """Triangulate the extent around the control points and solve the
    per-triangle transformation matrices.

    The rectangle corners are fixed points of the warp; every control
    point's source maps exactly onto its target.
    """
    pairs = list(control_points)
    if not pairs:
        raise ValueError("need at least one control point")
    seen = set()
    for p in pairs:
        key = (p.source.x, p.source.y)
        if key in seen:
            raise ValueError(f"duplicate source control point {key}")
        seen.add(key)
        if not extent.strictly_contains(p.source.x, p.source.y):
            raise ValueError(
                f"control point source {key} not strictly inside extent")

    mesh = TriangleMesh(extent)
    target_xy = [tuple(c) for c in extent.corners]  # corners map to themselves
    for p in pairs:
        vid = mesh.insert(p.source.x, p.source.y)
        assert vid == len(target_xy)
        target_xy.append((p.target.x, p.target.y))
    target_xy = np.asarray(target_xy, dtype=float)

    tri_ids = mesh.live_ids()
    matrices = np.empty((len(tri_ids), 3, 3))
    for k, tid in enumerate(tri_ids):
        verts = mesh.triangles[tid].vertices
        src = np.array([[*mesh.vertex_xy[v], 1.0] for v in verts])
        dst = np.array([[*target_xy[v], 1.0] for v in verts])
        # Nine equations, nine unknowns: rows of T from the three vertex
        # correspondences (the homogeneous row comes out as (0, 0, 1)).
        matrices[k] = np.linalg.solve(src, dst).T
    return PiecewiseAffineTransform(mesh, target_xy, tri_ids, matrices)
