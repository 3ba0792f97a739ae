"""Rigid and rubber-sheet alignment of local maps to a GNSS trajectory."""

from .correspond import resample_correspondences
from .deviation import AlignmentReport, deviation_stats, min_distances_to_polyline
from .mesh import BoundingBox, Triangle, TriangleMesh, quadrilateral_test
from .rubber import (ControlPointPair, PiecewiseAffineTransform,
                     build_rubber_sheet, read_control_points,
                     write_control_points)
from .umeyama import umeyama_fit

__all__ = [
    "AlignmentReport", "BoundingBox", "ControlPointPair",
    "PiecewiseAffineTransform", "Triangle", "TriangleMesh",
    "build_rubber_sheet", "deviation_stats", "min_distances_to_polyline",
    "quadrilateral_test", "read_control_points", "resample_correspondences",
    "umeyama_fit", "write_control_points",
]
