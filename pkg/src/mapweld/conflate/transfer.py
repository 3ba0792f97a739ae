"""Semantic attribute transfer from matched OSM chains into the lanelet
map, lane-count validation, and fragment removal.

Correspondences: highway -> (subtype, location) via a configurable
mapping table; maxspeed -> speed_limit; name -> road_name;
surface -> road_surface; oneway -> one_way; lane_markings is copied
as is.  Existing lanelet attributes are never overwritten unless the
overwrite flag is set.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from ..maps.lanelet import LaneletMap
from ..maps.osm import OsmRoadNetwork
from .collapse import CenterlineGraph
from .match import MatchResult
from .polylines import ReferencePolyline

# highway value -> lanelet subtype and location
DEFAULT_HIGHWAY_MAPPING = {
    "motorway": {"subtype": "highway", "location": "nonurban"},
    "motorway_link": {"subtype": "highway", "location": "nonurban"},
    "trunk": {"subtype": "road", "location": "nonurban"},
    "trunk_link": {"subtype": "road", "location": "nonurban"},
    "primary": {"subtype": "road", "location": "urban"},
    "primary_link": {"subtype": "road", "location": "urban"},
    "secondary": {"subtype": "road", "location": "urban"},
    "secondary_link": {"subtype": "road", "location": "urban"},
    "tertiary": {"subtype": "road", "location": "urban"},
    "tertiary_link": {"subtype": "road", "location": "urban"},
    "unclassified": {"subtype": "road", "location": "urban"},
    "residential": {"subtype": "road", "location": "urban"},
    "living_street": {"subtype": "living_street", "location": "urban"},
    "service": {"subtype": "road", "location": "urban"},
    "track": {"subtype": "road", "location": "nonurban"},
    "footway": {"subtype": "walkway", "location": "urban"},
    "path": {"subtype": "walkway", "location": "nonurban"},
    "pedestrian": {"subtype": "walkway", "location": "urban"},
    "cycleway": {"subtype": "bicycle_lane", "location": "urban"},
}

TAG_CORRESPONDENCES = {
    "maxspeed": "speed_limit",
    "name": "road_name",
    "surface": "road_surface",
    "oneway": "one_way",
    "lane_markings": "lane_markings",
}


def load_highway_mapping(data: str | bytes) -> dict:
    table = json.loads(data)
    for hw, entry in table.items():
        if not isinstance(entry, dict) or "subtype" not in entry \
                or "location" not in entry:
            raise ValueError(
                f"mapping for highway={hw!r} must define subtype and location")
    return table


@dataclass
class TransferReport:
    transferred: dict[str, int] = field(default_factory=dict)  # key -> count
    unmapped_highways: list[dict] = field(default_factory=list)
    skipped_existing: int = 0

    def to_dict(self):
        return {"transferred": dict(sorted(self.transferred.items())),
                "unmapped_highways": self.unmapped_highways,
                "skipped_existing": self.skipped_existing}


def _chain_tag(osm: OsmRoadNetwork, result: MatchResult, key: str):
    """Tag value for a chain: the value carried by the greatest share of
    the chain's arc length (ties toward the lowest way id)."""
    totals: dict[str, tuple[float, int]] = {}
    for a, b, wid in zip(result.chain_nodes, result.chain_nodes[1:],
                         result.chain_way_ids):
        tags = osm.ways[wid].tags
        if key not in tags:
            continue
        ax, ay = osm.node_xy(a)
        bx, by = osm.node_xy(b)
        seg = float(np.hypot(bx - ax, by - ay))
        length, lowest = totals.get(tags[key], (0.0, wid))
        totals[tags[key]] = (length + seg, min(lowest, wid))
    if not totals:
        return None
    return sorted(totals.items(), key=lambda kv: (-kv[1][0], kv[1][1]))[0][0]


def transfer_attributes(m: LaneletMap, matches: list[MatchResult],
                        polylines: list[ReferencePolyline],
                        graph: CenterlineGraph, osm: OsmRoadNetwork,
                        mapping: dict | None = None, overwrite: bool = False,
                        ) -> tuple[LaneletMap, TransferReport]:
    """Copy matched OSM tags onto every lanelet a reference polyline
    represents.  Returns a new map; the input is untouched."""
    mapping = DEFAULT_HIGHWAY_MAPPING if mapping is None else mapping
    by_id = {p.id: p for p in polylines}
    out = copy.deepcopy(m)
    report = TransferReport()

    def put(lanelet, key, value):
        if value is None:
            return
        if key in lanelet.attributes and not overwrite:
            if lanelet.attributes[key] != value:
                report.skipped_existing += 1
            return
        if lanelet.attributes.get(key) != value:
            lanelet.attributes[key] = value
            report.transferred[key] = report.transferred.get(key, 0) + 1

    for result in matches:
        if not result.matched:
            continue
        poly = by_id[result.reference_id]
        targets = [out.lanelets[i] for i in poly.lanelet_ids(graph)]

        highway = _chain_tag(osm, result, "highway")
        sub_loc = None
        if highway is not None:
            sub_loc = mapping.get(highway)
            if sub_loc is None:
                report.unmapped_highways.append(
                    {"reference_polyline": result.reference_id,
                     "highway": highway})
        for ll in targets:
            if sub_loc is not None:
                put(ll, "subtype", sub_loc["subtype"])
                put(ll, "location", sub_loc["location"])
            for osm_key, ll_key in TAG_CORRESPONDENCES.items():
                put(ll, ll_key, _chain_tag(osm, result, osm_key))
    return out, report


def validate_lane_counts(graph: CenterlineGraph, matches: list[MatchResult],
                         polylines: list[ReferencePolyline],
                         osm: OsmRoadNetwork) -> dict[int, dict]:
    """Per adjacency group (centerline): green when the adjacent-lanelet
    count equals the OSM `lanes` value, red when it differs, blue when
    the tag is missing (or unusable)."""
    by_id = {p.id: p for p in polylines}
    validation: dict[int, dict] = {}
    for result in matches:
        if not result.matched:
            continue
        poly = by_id[result.reference_id]
        lanes_raw = _chain_tag(osm, result, "lanes")
        for cid in poly.centerline_ids:
            group = graph.centerlines[cid]
            entry = {"lanelet_count": group.lane_count,
                     "osm_lanes": None, "color": "blue",
                     "lanelet_ids": group.lanelet_ids}
            if lanes_raw is not None:
                try:
                    lanes = int(lanes_raw)
                except ValueError:
                    entry["note"] = f"non-integer lanes value {lanes_raw!r}"
                else:
                    entry["osm_lanes"] = lanes
                    entry["color"] = ("green" if lanes == group.lane_count
                                      else "red")
            validation[cid] = entry
    return validation


def fragment_candidates(graph: CenterlineGraph,
                        validation: dict[int, dict]) -> list[int]:
    """Lanelets eligible for deletion: no predecessor, no successor, and
    an adjacency group that exceeds the OSM lane count."""
    doomed = []
    for cid, entry in sorted(validation.items()):
        lanes = entry.get("osm_lanes")
        if lanes is None or entry["lanelet_count"] <= lanes:
            continue
        for ll_id in graph.centerlines[cid].lanelet_ids:
            if not graph.successors.get(ll_id) and \
                    not graph.predecessors.get(ll_id):
                doomed.append(ll_id)
    return sorted(doomed)


def delete_lanelets(m: LaneletMap, ids) -> LaneletMap:
    """Remove lanelets and prune geometry nothing references afterwards."""
    out = copy.deepcopy(m)
    gone = set(ids)
    for ll_id in gone:
        if ll_id in out.lanelets:
            del out.lanelets[ll_id]
    for re_ in out.regulatory_elements.values():
        re_.members = [(r, t, ref) for r, t, ref in re_.members
                       if not (t == "relation" and ref in gone)]
    _prune_orphans(out)
    return out


def remove_fragments(m: LaneletMap, graph: CenterlineGraph,
                     validation: dict[int, dict],
                     ) -> tuple[LaneletMap, list[int]]:
    """Delete every fragment candidate (headless pipeline behavior)."""
    doomed = fragment_candidates(graph, validation)
    return delete_lanelets(m, doomed), doomed


def _prune_orphans(m: LaneletMap):
    used_ls: set[int] = set()
    for ll in m.lanelets.values():
        used_ls.update((ll.left, ll.right))
        used_ls.update(ref for _, t, ref in ll.extra_members if t == "way")
    for area in m.areas.values():
        used_ls.update(area.outer)
        used_ls.update(ref for _, t, ref in area.extra_members if t == "way")
    used_points: set[int] = set()
    for re_ in m.regulatory_elements.values():
        for _, mtype, ref in re_.members:
            if mtype == "way":
                used_ls.add(ref)
            elif mtype == "node":
                used_points.add(ref)
    for ls_id in [i for i in m.linestrings if i not in used_ls]:
        del m.linestrings[ls_id]
    for ls in m.linestrings.values():
        used_points.update(ls.point_ids)
    for pid in [i for i in m.points if i not in used_points]:
        del m.points[pid]
