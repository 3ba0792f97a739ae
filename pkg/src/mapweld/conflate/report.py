"""Aggregate conflation report serialized alongside the conflated map."""

from __future__ import annotations

from dataclasses import dataclass, field

from .match import MatchResult
from .metrics import MatchMetrics
from .polylines import ReferencePolyline
from .transfer import TransferReport


@dataclass
class ConflationReport:
    transfer: TransferReport
    validation: dict[int, dict]
    deleted_fragments: list[int]
    metrics: MatchMetrics
    matches: list[MatchResult] = field(default_factory=list)
    polylines: list[ReferencePolyline] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "transfer": self.transfer.to_dict(),
            "lane_validation": {str(cid): entry for cid, entry
                                in sorted(self.validation.items())},
            "deleted_fragments": self.deleted_fragments,
            "metrics": self.metrics.to_dict(),
            "matches": [
                {
                    "reference_polyline": r.reference_id,
                    "matched": r.matched,
                    "chain_nodes": r.chain_nodes,
                    "chain_way_ids": r.chain_way_ids,
                    "similarity": r.similarity,
                    "components": r.components,
                    "attempts": r.attempts,
                    "classification": r.classification,
                }
                for r in self.matches
            ],
            "reference_polylines": [
                {"id": p.id, "length": p.length,
                 "centerline_ids": p.centerline_ids}
                for p in self.polylines
            ],
        }
