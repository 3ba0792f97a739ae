"""Collapse laterally adjacent lanelets into centerlines.

Adjacent lanes in the same direction (forward) and in the opposite
direction (backward) collapse together; the resulting centerline carries
the ids of every lanelet it represents, partitioned by direction.
Centerlines are connected wherever their member lanelets are
predecessor/successor of each other, which keeps the collapsed graph
topologically consistent with the original map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..maps.lanelet import LaneletMap

# Boundaries duplicated instead of shared count as adjacent below this
# Hausdorff distance (meters).
DUPLICATE_BOUNDARY_TOL = 0.2
# Lanelets whose interface midpoints are closer than this connect
# longitudinally even without shared point ids.
CONNECT_TOL = 0.2


@dataclass
class Centerline:
    id: int
    geometry: np.ndarray  # (K, 2), oriented along the forward direction
    forward_ids: list[int] = field(default_factory=list)
    backward_ids: list[int] = field(default_factory=list)

    @property
    def lanelet_ids(self) -> list[int]:
        return self.forward_ids + self.backward_ids

    @property
    def lane_count(self) -> int:
        return len(self.forward_ids) + len(self.backward_ids)

    @property
    def direction_class(self) -> str:
        return "bidirectional" if self.backward_ids else "unidirectional"

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.geometry, axis=0),
                                    axis=1).sum())


@dataclass
class CenterlineGraph:
    centerlines: dict[int, Centerline]
    lanelet_to_centerline: dict[int, int]
    successors: dict[int, set[int]]    # lanelet id -> successor lanelet ids
    predecessors: dict[int, set[int]]
    # junction node ids per centerline port: (start_node, end_node)
    ports: dict[int, tuple[int, int]]

    def junction_degree(self) -> dict[int, int]:
        deg: dict[int, int] = {}
        for start, end in self.ports.values():
            deg[start] = deg.get(start, 0) + 1
            deg[end] = deg.get(end, 0) + 1
        return deg


def _ls_xy(m: LaneletMap, ls_id: int) -> np.ndarray:
    return np.asarray(m.linestring_coords(ls_id), dtype=float)


def _resample(xy: np.ndarray, n: int) -> np.ndarray:
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.repeat(xy[:1], n, axis=0)
    t = np.linspace(0.0, s[-1], n)
    return np.column_stack([np.interp(t, s, xy[:, 0]),
                            np.interp(t, s, xy[:, 1])])


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def lanelet_direction(m: LaneletMap, ll_id: int) -> np.ndarray:
    """Unit travel direction, derived from which side the right boundary
    lies on (boundary storage order is not trustworthy)."""
    ll = m.lanelets[ll_id]
    left = _ls_xy(m, ll.left)
    right = _ls_xy(m, ll.right)
    d = left[-1] - left[0]
    if np.linalg.norm(d) == 0.0:
        d = right[-1] - right[0]
    offset = right.mean(axis=0) - left.mean(axis=0)
    if d[0] * offset[1] - d[1] * offset[0] > 0.0:
        d = -d  # stored left boundary runs against the travel direction
    n = np.linalg.norm(d)
    return d / n if n > 0 else np.array([1.0, 0.0])


def _boundary_endpoint_ids(m: LaneletMap, ll_id: int):
    """Point ids of the entry and exit cross-sections, in travel order."""
    ll = m.lanelets[ll_id]
    d = lanelet_direction(m, ll_id)
    start, end = set(), set()
    for b in (ll.left, ll.right):
        pids = m.linestrings[b].point_ids
        xy = _ls_xy(m, b)
        aligned = float(np.dot(xy[-1] - xy[0], d)) >= 0.0
        start.add(pids[0] if aligned else pids[-1])
        end.add(pids[-1] if aligned else pids[0])
    return start, end


def _interface_midpoints(m: LaneletMap, ll_id: int):
    ll = m.lanelets[ll_id]
    d = lanelet_direction(m, ll_id)
    starts, ends = [], []
    for b in (ll.left, ll.right):
        xy = _ls_xy(m, b)
        aligned = float(np.dot(xy[-1] - xy[0], d)) >= 0.0
        starts.append(xy[0] if aligned else xy[-1])
        ends.append(xy[-1] if aligned else xy[0])
    return (np.mean(starts, axis=0), np.mean(ends, axis=0))


def _lateral_adjacent(m: LaneletMap, a: int, b: int) -> bool:
    la, lb = m.lanelets[a], m.lanelets[b]
    if {la.left, la.right} & {lb.left, lb.right}:
        return True
    # duplicated-boundary fallback
    for ba in (la.left, la.right):
        xa = _ls_xy(m, ba)
        for bb in (lb.left, lb.right):
            xb = _ls_xy(m, bb)
            lo_a, hi_a = xa.min(axis=0), xa.max(axis=0)
            lo_b, hi_b = xb.min(axis=0), xb.max(axis=0)
            if np.any(lo_a - hi_b > DUPLICATE_BOUNDARY_TOL) or \
               np.any(lo_b - hi_a > DUPLICATE_BOUNDARY_TOL):
                continue
            if _hausdorff(_resample(xa, 16), _resample(xb, 16)) \
                    < DUPLICATE_BOUNDARY_TOL:
                return True
    return False


def _adjacency_groups(m: LaneletMap) -> list[list[int]]:
    ids = sorted(m.lanelets)
    parent = {i: i for i in ids}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            if _lateral_adjacent(m, a, b):
                parent[find(a)] = find(b)
    groups: dict[int, list[int]] = {}
    for i in ids:
        groups.setdefault(find(i), []).append(i)
    return sorted(groups.values(), key=lambda g: g[0])


def _group_centerline(m: LaneletMap, group: list[int]) -> np.ndarray:
    """Mean line of the group's two outer boundaries."""
    usage: dict[int, int] = {}
    for ll_id in group:
        ll = m.lanelets[ll_id]
        for b in (ll.left, ll.right):
            usage[b] = usage.get(b, 0) + 1
    outer = [b for b, c in usage.items() if c == 1]
    if len(outer) < 2:
        outer = list(usage)  # fully shared (degenerate); fall back to all
    if len(outer) > 2:
        # odd adjacency shapes: take the two longest outer boundaries
        outer.sort(key=lambda b: (-_polyline_length(_ls_xy(m, b)), b))
        outer = outer[:2]
    xa, xb = _ls_xy(m, outer[0]), _ls_xy(m, outer[1])
    n = max(len(xa), len(xb))
    ra = _resample(xa, n)
    rb = _resample(xb, n)
    if (np.linalg.norm(ra[0] - rb[0]) + np.linalg.norm(ra[-1] - rb[-1])
            > np.linalg.norm(ra[0] - rb[-1]) + np.linalg.norm(ra[-1] - rb[0])):
        rb = rb[::-1]
    mid = (ra + rb) / 2.0

    ref_dir = lanelet_direction(m, group[0])
    if float(np.dot(mid[-1] - mid[0], ref_dir)) < 0.0:
        mid = mid[::-1]
    return mid


def _polyline_length(xy: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(xy, axis=0), axis=1).sum())


def _successor_relation(m: LaneletMap, group_of: dict[int, int]):
    # Laterally adjacent lanelets share boundary endpoints, so same-group
    # pairs must not count as longitudinal neighbors.
    ids = sorted(m.lanelets)
    ends = {i: _boundary_endpoint_ids(m, i) for i in ids}
    mids = {i: _interface_midpoints(m, i) for i in ids}
    succ: dict[int, set[int]] = {i: set() for i in ids}
    pred: dict[int, set[int]] = {i: set() for i in ids}
    for a in ids:
        for b in ids:
            if a == b or group_of[a] == group_of[b]:
                continue
            if ends[a][1] & ends[b][0]:
                linked = True
            else:
                linked = (np.linalg.norm(mids[a][1] - mids[b][0]) < CONNECT_TOL)
            if linked:
                succ[a].add(b)
                pred[b].add(a)
    return succ, pred


def collapse_lanelets(m: LaneletMap) -> CenterlineGraph:
    """Build the centerline graph of a local-frame lanelet map."""
    groups = _adjacency_groups(m)
    centerlines: dict[int, Centerline] = {}
    lanelet_to_centerline: dict[int, int] = {}
    for cid, group in enumerate(groups):
        geometry = _group_centerline(m, group)
        ref_dir = lanelet_direction(m, group[0])
        fwd, bwd = [], []
        for ll_id in group:
            if float(np.dot(lanelet_direction(m, ll_id), ref_dir)) >= 0.0:
                fwd.append(ll_id)
            else:
                bwd.append(ll_id)
        centerlines[cid] = Centerline(cid, geometry, fwd, bwd)
        for ll_id in group:
            lanelet_to_centerline[ll_id] = cid

    succ, pred = _successor_relation(m, lanelet_to_centerline)

    # Junction nodes: union-find over centerline ports linked by any
    # lanelet-level successor edge.
    port_id = {}
    for cid in centerlines:
        port_id[(cid, "start")] = 2 * cid
        port_id[(cid, "end")] = 2 * cid + 1
    parent = {p: p for p in port_id.values()}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        parent[find(x)] = find(y)

    for a, followers in succ.items():
        ca = lanelet_to_centerline[a]
        a_fwd = a in centerlines[ca].forward_ids
        for b in followers:
            cb = lanelet_to_centerline[b]
            if ca == cb:
                continue
            b_fwd = b in centerlines[cb].forward_ids
            pa = port_id[(ca, "end" if a_fwd else "start")]
            pb = port_id[(cb, "start" if b_fwd else "end")]
            union(pa, pb)

    ports = {cid: (find(port_id[(cid, "start")]), find(port_id[(cid, "end")]))
             for cid in centerlines}
    return CenterlineGraph(centerlines, lanelet_to_centerline, succ, pred,
                           ports)
