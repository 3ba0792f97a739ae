"""Conflation of OSM semantic attributes into the lanelet map."""

from .collapse import Centerline, CenterlineGraph, collapse_lanelets, lanelet_direction
from .match import (MatchParams, MatchResult, buffer_grow_match,
                    similarity_score)
from .metrics import (DEFAULT_LENGTH_THRESHOLD, MatchMetrics, classify_matches,
                      precision_recall, read_labels)
from .polylines import ReferencePolyline, build_reference_polylines
from .report import ConflationReport
from .transfer import (DEFAULT_HIGHWAY_MAPPING, TAG_CORRESPONDENCES,
                       TransferReport, delete_lanelets, fragment_candidates,
                       load_highway_mapping, remove_fragments,
                       transfer_attributes, validate_lane_counts)

__all__ = [
    "Centerline", "CenterlineGraph", "ConflationReport",
    "DEFAULT_HIGHWAY_MAPPING", "DEFAULT_LENGTH_THRESHOLD", "MatchMetrics",
    "MatchParams", "MatchResult", "ReferencePolyline", "TAG_CORRESPONDENCES",
    "TransferReport", "buffer_grow_match", "build_reference_polylines",
    "classify_matches", "collapse_lanelets", "delete_lanelets",
    "fragment_candidates", "lanelet_direction", "load_highway_mapping",
    "precision_recall", "read_labels", "remove_fragments",
    "similarity_score", "transfer_attributes", "validate_lane_counts",
]
