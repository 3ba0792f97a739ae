"""Chain centerline segments into reference polylines for matching.

Chains run through junctions of degree 2 and break at junctions of
degree >= 3 and wherever the direction class (unidirectional vs
bidirectional) changes.  Every centerline ends up in exactly one
reference polyline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .collapse import CenterlineGraph


@dataclass
class ReferencePolyline:
    id: int
    geometry: np.ndarray  # (K, 2)
    centerline_ids: list[int]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.geometry, axis=0),
                                    axis=1).sum())

    def lanelet_ids(self, graph: CenterlineGraph) -> list[int]:
        out: list[int] = []
        for cid in self.centerline_ids:
            out += graph.centerlines[cid].lanelet_ids
        return out


def build_reference_polylines(graph: CenterlineGraph,
                              ) -> list[ReferencePolyline]:
    degree = graph.junction_degree()
    incident: dict[int, list[int]] = {}
    for cid, (start, end) in graph.ports.items():
        incident.setdefault(start, []).append(cid)
        incident.setdefault(end, []).append(cid)

    def passable(node: int, from_cid: int) -> int | None:
        """The single continuation centerline through a degree-2 node."""
        if degree.get(node, 0) != 2:
            return None
        a, b = incident[node]
        nxt = b if a == from_cid else a
        if nxt == from_cid:  # self-loop
            return None
        here = graph.centerlines[from_cid].direction_class
        there = graph.centerlines[nxt].direction_class
        return nxt if here == there else None

    visited: set[int] = set()
    polylines: list[ReferencePolyline] = []
    for seed in sorted(graph.centerlines):
        if seed in visited:
            continue
        chain = [seed]
        visited.add(seed)
        # extend forward from the seed's end port, then backward from start
        for direction in ("end", "start"):
            cur = seed
            node = graph.ports[seed][1 if direction == "end" else 0]
            while True:
                nxt = passable(node, cur)
                if nxt is None or nxt in visited:
                    break
                if direction == "end":
                    chain.append(nxt)
                else:
                    chain.insert(0, nxt)
                visited.add(nxt)
                s, e = graph.ports[nxt]
                node = e if s == node else s
                cur = nxt

        polylines.append(ReferencePolyline(
            len(polylines), _concatenate(graph, chain), chain))
    return polylines


def _concatenate(graph: CenterlineGraph, chain: list[int]) -> np.ndarray:
    """Join member geometries head-to-tail, flipping segments as needed."""
    if len(chain) == 1:
        return graph.centerlines[chain[0]].geometry.copy()
    parts: list[np.ndarray] = []
    # Orient the first segment so its far end touches the second segment.
    prev_ports = graph.ports[chain[0]]
    second_ports = set(graph.ports[chain[1]])
    first = graph.centerlines[chain[0]].geometry
    if prev_ports[1] in second_ports:
        parts.append(first)
        joint = prev_ports[1]
    else:
        parts.append(first[::-1])
        joint = prev_ports[0]
    for cid in chain[1:]:
        s, e = graph.ports[cid]
        geom = graph.centerlines[cid].geometry
        if s == joint:
            parts.append(geom)
            joint = e
        else:
            parts.append(geom[::-1])
            joint = s

    merged = [parts[0]]
    for seg in parts[1:]:
        prev_end = merged[-1][-1]
        # drop the duplicated joint coordinate when geometries actually touch
        if np.linalg.norm(seg[0] - prev_end) < 1e-9:
            merged.append(seg[1:])
        else:
            merged.append(seg)
    return np.vstack(merged)
