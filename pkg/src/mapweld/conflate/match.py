"""Buffer-growing matching of reference polylines against the OSM road
network, with a four-component geometric similarity score.

For each reference polyline a buffer corridor is laid around its
geometry; every maximal chain of OSM way segments that lies fully inside
the corridor becomes a match candidate.  An empty candidate set enlarges
the buffer (at most three times); among candidates the highest-scoring
chain wins if it clears the acceptance threshold.  Reference polylines
are used once; OSM segments may serve several matches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import LineString

from ..maps.osm import OsmRoadNetwork
from .polylines import ReferencePolyline


@dataclass
class MatchParams:
    buffer_init: float = 5.0        # initial half-width, meters
    buffer_growth: float = 1.5      # factor per retry
    max_retries: int = 3            # growths beyond the initial attempt
    weights: tuple = (0.25, 0.25, 0.25, 0.25)  # angle, endpoint, length, area
    accept_threshold: float = 0.6
    classification_threshold: float = 0.8
    max_chain_nodes: int = 40
    max_candidates: int = 500

    def __post_init__(self):
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"similarity weights must sum to 1, "
                             f"got {self.weights}")
        if self.buffer_init <= 0 or self.buffer_growth <= 1.0:
            raise ValueError("buffer parameters must be positive/growing")


@dataclass
class MatchResult:
    reference_id: int
    chain_nodes: list[int] | None      # OSM node ids along the matched chain
    chain_way_ids: list[int] | None    # way id per chain edge
    similarity: float | None
    components: dict | None            # angle/endpoint/length/area terms
    attempts: int                      # candidate searches performed
    classification: str = "Unlabeled"  # TP | FP | TN | FN | Unlabeled

    @property
    def matched(self) -> bool:
        return self.chain_nodes is not None


def polyline_length(xy: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(xy, axis=0), axis=1).sum())


def similarity_score(ref_xy, cand_xy, weights=(0.25, 0.25, 0.25, 0.25)):
    """Similarity of two polylines: weighted sum of four components in
    [0, 1] (1 = identical): chord angle, endpoint distances, length
    ratio, and the area enclosed between the lines (normalized by the
    reference length squared)."""
    ref = np.asarray(ref_xy, dtype=float).reshape(-1, 2)
    cand = np.asarray(cand_xy, dtype=float).reshape(-1, 2)
    if len(ref) < 2 or len(cand) < 2:
        raise ValueError("similarity needs polylines with >= 2 points")
    l_ref = polyline_length(ref)
    l_cand = polyline_length(cand)
    if l_ref == 0.0 or l_cand == 0.0:
        raise ValueError("degenerate zero-length polyline")

    chord_r = ref[-1] - ref[0]
    chord_c = cand[-1] - cand[0]
    if not chord_r.any():
        chord_r = ref[1] - ref[0]
    if not chord_c.any():
        chord_c = cand[1] - cand[0]
    # Orientation alignment: candidate direction is arbitrary.
    if float(np.dot(chord_r, chord_c)) < 0.0:
        cand = cand[::-1]
        chord_c = -chord_c

    cross = float(chord_r[0] * chord_c[1] - chord_r[1] * chord_c[0])
    dot = float(np.dot(chord_r, chord_c))
    angle = math.atan2(abs(cross), dot)  # exact 0 for identical chords
    c_angle = 1.0 - angle / (math.pi / 2.0)

    d_ends = 0.5 * (float(np.linalg.norm(ref[0] - cand[0]))
                    + float(np.linalg.norm(ref[-1] - cand[-1])))
    c_endpoint = max(0.0, 1.0 - d_ends / l_ref)

    c_length = min(l_ref, l_cand) / max(l_ref, l_cand)

    ring = np.vstack([ref, cand[::-1]])
    x, y = ring[:, 0], ring[:, 1]
    area = 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
    c_area = max(0.0, 1.0 - area / (l_ref * l_ref))

    comps = {"angle": c_angle, "endpoint": c_endpoint,
             "length": c_length, "area": c_area}
    score = float(np.dot(weights, [c_angle, c_endpoint, c_length, c_area]))
    return score, comps


class _RoadGraph:
    """Edge-level view of a local-frame OSM network."""

    def __init__(self, net: OsmRoadNetwork):
        self.net = net
        self.adj: dict[int, list[tuple[int, int]]] = {}  # node -> (other, way)
        self.edges: list[tuple[int, int, int]] = []      # (a, b, way id)
        for wid in sorted(net.ways):
            refs = net.ways[wid].node_ids
            for a, b in zip(refs, refs[1:]):
                if a == b:
                    continue
                self.edges.append((a, b, wid))
                self.adj.setdefault(a, []).append((b, wid))
                self.adj.setdefault(b, []).append((a, wid))
        for lst in self.adj.values():
            lst.sort()
        self.xy = {nid: net.node_xy(nid) for nid in self.adj}
        self.global_junctions = {n for n, lst in self.adj.items()
                                 if len(lst) != 2}

    def edge_midpoints(self) -> np.ndarray:
        return np.array([((self.xy[a][0] + self.xy[b][0]) / 2,
                          (self.xy[a][1] + self.xy[b][1]) / 2)
                         for a, b, _ in self.edges])


def _covered_edges(graph: _RoadGraph, buffer_poly, bounds) -> list[int]:
    minx, miny, maxx, maxy = bounds
    out = []
    for i, (a, b, _) in enumerate(graph.edges):
        ax, ay = graph.xy[a]
        bx, by = graph.xy[b]
        if max(ax, bx) < minx or min(ax, bx) > maxx \
                or max(ay, by) < miny or min(ay, by) > maxy:
            continue
        if buffer_poly.covers(LineString([(ax, ay), (bx, by)])):
            out.append(i)
    return out


def _enumerate_chains(graph: _RoadGraph, edge_ids: list[int],
                      max_nodes: int, max_candidates: int):
    """All simple node paths between distinguished nodes of the in-buffer
    subgraph, deduplicated against their reversals."""
    sub_adj: dict[int, list[tuple[int, int]]] = {}
    for i in edge_ids:
        a, b, wid = graph.edges[i]
        sub_adj.setdefault(a, []).append((b, wid))
        sub_adj.setdefault(b, []).append((a, wid))
    for lst in sub_adj.values():
        lst.sort()
    if not sub_adj:
        return []

    distinguished = {n for n, lst in sub_adj.items()
                     if len(lst) != 2 or n in graph.global_junctions}
    if not distinguished:
        distinguished = {min(sub_adj)}  # pure cycle: break at the lowest id

    chains: list[tuple[list[int], list[int]]] = []
    seen: set[tuple] = set()

    def dfs(path_nodes, path_ways, used_edges):
        if len(chains) >= max_candidates:
            return
        cur = path_nodes[-1]
        if len(path_nodes) > 1 and cur in distinguished:
            key = tuple(path_nodes)
            rkey = tuple(reversed(path_nodes))
            if key not in seen and rkey not in seen:
                seen.add(key)
                chains.append((list(path_nodes), list(path_ways)))
        if len(path_nodes) >= max_nodes:
            return
        for nxt, wid in sub_adj.get(cur, ()):
            ekey = (min(cur, nxt), max(cur, nxt), wid)
            if ekey in used_edges or nxt in path_nodes:
                continue
            used_edges.add(ekey)
            path_nodes.append(nxt)
            path_ways.append(wid)
            dfs(path_nodes, path_ways, used_edges)
            path_nodes.pop()
            path_ways.pop()
            used_edges.discard(ekey)

    for start in sorted(distinguished):
        dfs([start], [], set())
    return chains


def buffer_grow_match(refs: list[ReferencePolyline], osm: OsmRoadNetwork,
                      params: MatchParams | None = None) -> list[MatchResult]:
    """Match every reference polyline to its best in-buffer OSM chain."""
    params = params or MatchParams()
    if osm.frame != "local":
        raise ValueError("OSM network must be projected to the local frame")
    if not osm.ways:
        raise ValueError("empty OSM road network")
    graph = _RoadGraph(osm)

    results = []
    for ref in refs:
        results.append(_match_one(ref, graph, params))
    return results


def _match_one(ref: ReferencePolyline, graph: _RoadGraph,
               params: MatchParams) -> MatchResult:
    line = LineString(ref.geometry)
    width = params.buffer_init
    attempts = 0
    candidates = []
    for _ in range(params.max_retries + 1):
        attempts += 1
        poly = line.buffer(width)
        bounds = poly.bounds
        edge_ids = _covered_edges(graph, poly, bounds)
        candidates = _enumerate_chains(graph, edge_ids,
                                       params.max_chain_nodes,
                                       params.max_candidates)
        if candidates:
            break
        width *= params.buffer_growth

    if not candidates:
        return MatchResult(ref.id, None, None, None, None, attempts)

    scored = []
    for nodes, ways in candidates:
        xy = np.array([graph.xy[n] for n in nodes])
        score, comps = similarity_score(ref.geometry, xy, params.weights)
        scored.append((score, comps, nodes, ways))
    # Deterministic ranking; ties prefer closer endpoints, then way ids.
    scored.sort(key=lambda s: (-s[0], -s[1]["endpoint"], min(s[3]),
                               tuple(s[2])))
    best_score, best_comps, best_nodes, best_ways = scored[0]
    if best_score <= params.accept_threshold:
        return MatchResult(ref.id, None, None, best_score, best_comps,
                           attempts)
    return MatchResult(ref.id, best_nodes, best_ways, best_score, best_comps,
                       attempts)
