"""Match classification and precision/recall.

Positives (matched polylines) split into TP/FP by the geometric
similarity score; negatives need manual TN/FN labels supplied through a
sidecar JSON file keyed by reference-polyline id.  Metrics only count
polylines longer than the length threshold, since short fragments are an
unavoidable by-product of the collapsing step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .match import MatchResult
from .polylines import ReferencePolyline

DEFAULT_LENGTH_THRESHOLD = 1.5  # meters; strictly-above polylines count


def read_labels(data: str | bytes) -> dict[int, str]:
    raw = json.loads(data)
    labels = {}
    for key, value in raw.items():
        if value not in ("TN", "FN"):
            raise ValueError(f"label for {key} must be TN or FN, got {value!r}")
        labels[int(key)] = value
    return labels


def classify_matches(results: list[MatchResult], labels: dict[int, str],
                     classification_threshold: float) -> list[MatchResult]:
    """Assign TP/FP from the score threshold and TN/FN from labels."""
    for r in results:
        if r.matched:
            r.classification = ("TP" if r.similarity
                                >= classification_threshold else "FP")
        else:
            r.classification = labels.get(r.reference_id, "Unlabeled")
    return results


@dataclass
class MatchMetrics:
    precision: float | None
    recall: float | None
    match_rate: float | None
    counts: dict[str, int]
    total_considered: int

    def to_dict(self):
        return {"precision": self.precision, "recall": self.recall,
                "match_rate": self.match_rate, "counts": self.counts,
                "total_considered": self.total_considered}


def precision_recall(results: list[MatchResult],
                     polylines: list[ReferencePolyline],
                     length_threshold: float = DEFAULT_LENGTH_THRESHOLD,
                     labels_provided: bool = True) -> MatchMetrics:
    """Precision, recall, and match rate over polylines strictly longer
    than the threshold.  Undefined ratios stay None rather than 0;
    without manual labels recall is undefined by definition."""
    lengths = {p.id: p.length for p in polylines}
    counts = {"TP": 0, "FP": 0, "TN": 0, "FN": 0, "Unlabeled": 0}
    matched = 0
    considered = 0
    for r in results:
        if lengths[r.reference_id] <= length_threshold:
            continue
        considered += 1
        counts[r.classification] += 1
        if r.matched:
            matched += 1

    def ratio(num, den):
        return None if den == 0 else num / den

    return MatchMetrics(
        precision=ratio(counts["TP"], counts["TP"] + counts["FP"]),
        recall=(ratio(counts["TP"], counts["TP"] + counts["FN"])
                if labels_provided else None),
        match_rate=ratio(matched, considered),
        counts=counts,
        total_considered=considered,
    )
