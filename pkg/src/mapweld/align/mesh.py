"""Incremental triangulation over a bounding rectangle.

The mesh starts as the rectangle split into two triangles.  Each control
point is inserted by replacing its surrounding triangle with three new
ones (or, when the point lies on an existing edge, by splitting both
adjacent triangles in two).  After every insertion a quadrilateral test
runs on the new triangles and their neighbors, swapping the shared
diagonal whenever that strictly raises the minimum interior angle, and
re-testing triangles changed by a swap (Lawson's scheme).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import CoverageError


@dataclass
class Triangle:
    vertices: tuple[int, int, int]          # counter-clockwise
    # neighbors[i] lies across edge (vertices[i], vertices[i+1]); None = hull
    neighbors: list  # list[int | None] of length 3


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if not (self.min_x < self.max_x and self.min_y < self.max_y):
            raise ValueError(f"degenerate bounding box {self}")

    @classmethod
    def of(cls, *xy_arrays) -> "BoundingBox":
        stacked = np.vstack([np.asarray(a, dtype=float).reshape(-1, 2)
                             for a in xy_arrays if len(a)])
        return cls(float(stacked[:, 0].min()), float(stacked[:, 1].min()),
                   float(stacked[:, 0].max()), float(stacked[:, 1].max()))

    def expanded(self, fraction: float) -> "BoundingBox":
        dx = (self.max_x - self.min_x) * fraction
        dy = (self.max_y - self.min_y) * fraction
        return BoundingBox(self.min_x - dx, self.min_y - dy,
                           self.max_x + dx, self.max_y + dy)

    def contains(self, x: float, y: float) -> bool:
        return (self.min_x <= x <= self.max_x) and (self.min_y <= y <= self.max_y)

    def strictly_contains(self, x: float, y: float) -> bool:
        return (self.min_x < x < self.max_x) and (self.min_y < y < self.max_y)

    @property
    def corners(self) -> np.ndarray:
        return np.array([(self.min_x, self.min_y), (self.max_x, self.min_y),
                         (self.max_x, self.max_y), (self.min_x, self.max_y)])

    @property
    def area(self) -> float:
        return (self.max_x - self.min_x) * (self.max_y - self.min_y)

    def to_dict(self):
        return {"min_x": self.min_x, "min_y": self.min_y,
                "max_x": self.max_x, "max_y": self.max_y}

    @classmethod
    def from_dict(cls, d):
        return cls(d["min_x"], d["min_y"], d["max_x"], d["max_y"])


def _signed_area2(a, b, c) -> float:
    """Twice the signed area of triangle abc (positive = CCW)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _angles(a, b, c):
    """Interior angles of a triangle, radians."""
    la = math.dist(b, c)
    lb = math.dist(a, c)
    lc = math.dist(a, b)

    def ang(opp, s1, s2):
        cosv = (s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2)
        return math.acos(min(1.0, max(-1.0, cosv)))

    return (ang(la, lb, lc), ang(lb, la, lc), ang(lc, la, lb))


class TriangleMesh:
    """Editable triangulation used to house the rubber-sheet domain."""

    def __init__(self, extent: BoundingBox):
        self.extent = extent
        self.vertex_xy: list[tuple[float, float]] = [tuple(c) for c in
                                                     extent.corners]
        # Split the rectangle 0-1-2-3 along the 0-2 diagonal.
        self.triangles: list[Triangle | None] = [
            Triangle((0, 1, 2), [None, None, 1]),
            Triangle((0, 2, 3), [0, None, None]),
        ]
        # Degeneracy threshold: signed areas below this count as "on edge".
        diag = math.hypot(extent.max_x - extent.min_x,
                          extent.max_y - extent.min_y)
        self._eps_area = 1e-12 * diag * diag

    # -- queries ---------------------------------------------------------

    def live_ids(self) -> list[int]:
        return [i for i, t in enumerate(self.triangles) if t is not None]

    def coords(self, tri_id: int) -> np.ndarray:
        tri = self.triangles[tri_id]
        return np.array([self.vertex_xy[v] for v in tri.vertices])

    def locate(self, x: float, y: float) -> int:
        """Id of the triangle containing (x, y); lowest id wins on edges."""
        if not self.extent.contains(x, y):
            raise CoverageError(
                f"point ({x}, {y}) outside rubber-sheet extent", points=[(x, y)])
        p = (x, y)
        for i, tri in enumerate(self.triangles):
            if tri is None:
                continue
            a, b, c = (self.vertex_xy[v] for v in tri.vertices)
            if (_signed_area2(a, b, p) >= -self._eps_area
                    and _signed_area2(b, c, p) >= -self._eps_area
                    and _signed_area2(c, a, p) >= -self._eps_area):
                return i
        raise CoverageError(f"no triangle contains ({x}, {y})", points=[(x, y)])

    # -- topology editing --------------------------------------------------

    def _alloc(self, tri: Triangle) -> int:
        self.triangles.append(tri)
        return len(self.triangles) - 1

    def _edge_index(self, tri_id: int, a: int, b: int) -> int:
        v = self.triangles[tri_id].vertices
        for i in range(3):
            if v[i] == a and v[(i + 1) % 3] == b:
                return i
        raise ValueError(f"triangle {tri_id} has no edge ({a}, {b})")

    def _neighbor_across(self, tri_id: int, a: int, b: int):
        return self.triangles[tri_id].neighbors[self._edge_index(tri_id, a, b)]

    def _neighbor_across_safe(self, tri_id, a, b):
        try:
            return self._neighbor_across(tri_id, a, b)
        except ValueError:
            return None

    def insert(self, x: float, y: float) -> int:
        """Insert an interior vertex, split, and legalize; returns vertex id."""
        if not self.extent.strictly_contains(x, y):
            raise ValueError(
                f"control point ({x}, {y}) not strictly inside the extent")
        t_id = self.locate(x, y)
        tri = self.triangles[t_id]
        a, b, c = tri.vertices
        pa, pb, pc = (self.vertex_xy[v] for v in (a, b, c))
        p = (x, y)

        for v, pv in ((a, pa), (b, pb), (c, pc)):
            if pv == p:
                raise ValueError(f"vertex already exists at ({x}, {y})")

        v_new = len(self.vertex_xy)
        self.vertex_xy.append(p)

        # On-edge check: a vanishing sub-triangle area means p sits on that edge.
        areas = {(a, b): _signed_area2(pa, pb, p),
                 (b, c): _signed_area2(pb, pc, p),
                 (c, a): _signed_area2(pc, pa, p)}
        on_edge = [e for e, s in areas.items() if abs(s) <= self._eps_area]
        if on_edge:
            self._split_edge(t_id, on_edge[0], v_new)
        else:
            self._split_interior(t_id, v_new)
        return v_new

    def _split_interior(self, t_id: int, v: int):
        tri = self.triangles[t_id]
        a, b, c = tri.vertices
        n_ab = self._neighbor_across(t_id, a, b)
        n_bc = self._neighbor_across(t_id, b, c)
        n_ca = self._neighbor_across(t_id, c, a)
        self.triangles[t_id] = None

        t1 = self._alloc(Triangle((a, b, v), [n_ab, None, None]))
        t2 = self._alloc(Triangle((b, c, v), [n_bc, None, None]))
        t3 = self._alloc(Triangle((c, a, v), [n_ca, None, None]))
        self.triangles[t1].neighbors[1] = t2
        self.triangles[t1].neighbors[2] = t3
        self.triangles[t2].neighbors[1] = t3
        self.triangles[t2].neighbors[2] = t1
        self.triangles[t3].neighbors[1] = t1
        self.triangles[t3].neighbors[2] = t2
        for new_id, (ea, eb) in ((t1, (a, b)), (t2, (b, c)), (t3, (c, a))):
            other = self.triangles[new_id].neighbors[0]
            if other is not None:
                idx = self._edge_index(other, eb, ea)
                self.triangles[other].neighbors[idx] = new_id
        self._legalize_from([(t1, 0), (t2, 0), (t3, 0)])

    def _split_edge(self, t_id: int, edge: tuple[int, int], v: int):
        a, b = edge
        u_id = self._neighbor_across(t_id, a, b)
        tri = self.triangles[t_id]
        c = next(w for w in tri.vertices if w not in (a, b))

        n_bc = self._neighbor_across(t_id, b, c)
        n_ca = self._neighbor_across(t_id, c, a)
        self.triangles[t_id] = None
        t1 = self._alloc(Triangle((a, v, c), [None, None, n_ca]))
        t2 = self._alloc(Triangle((v, b, c), [None, n_bc, None]))
        self.triangles[t1].neighbors[1] = t2
        self.triangles[t2].neighbors[2] = t1
        for new_id, (ea, eb) in ((t1, (c, a)), (t2, (b, c))):
            other = self._neighbor_across(new_id, ea, eb)
            if other is not None:
                idx = self._edge_index(other, eb, ea)
                self.triangles[other].neighbors[idx] = new_id
        pending = [(t1, 2), (t2, 1)]

        if u_id is not None:
            utri = self.triangles[u_id]
            d = next(w for w in utri.vertices if w not in (a, b))
            n_ad = self._neighbor_across(u_id, a, d)
            n_db = self._neighbor_across(u_id, d, b)
            self.triangles[u_id] = None
            u1 = self._alloc(Triangle((b, v, d), [None, None, n_db]))
            u2 = self._alloc(Triangle((v, a, d), [None, n_ad, None]))
            self.triangles[u1].neighbors[1] = u2
            self.triangles[u2].neighbors[2] = u1
            # Stitch the four halves around v.
            self.triangles[t1].neighbors[0] = u2
            self.triangles[u2].neighbors[0] = t1
            self.triangles[t2].neighbors[0] = u1
            self.triangles[u1].neighbors[0] = t2
            for new_id, (ea, eb) in ((u1, (d, b)), (u2, (a, d))):
                other = self._neighbor_across(new_id, ea, eb)
                if other is not None:
                    idx = self._edge_index(other, eb, ea)
                    self.triangles[other].neighbors[idx] = new_id
            pending += [(u1, 2), (u2, 1)]
        self._legalize_from(pending)

    def _legalize_from(self, pending: list[tuple[int, int]]):
        guard = 20 * len(self.triangles) + 100
        while pending:
            guard -= 1
            if guard < 0:
                raise RuntimeError("edge legalization failed to terminate")
            tri_id, edge_idx = pending.pop()
            tri = self.triangles[tri_id]
            if tri is None:
                continue
            other = tri.neighbors[edge_idx]
            if other is None or self.triangles[other] is None:
                continue
            if quadrilateral_test(self, tri_id, other) == "swap":
                n1, n2 = self._flip(tri_id, other)
                # Re-test everything the swap may have invalidated.
                for nid in (n1, n2):
                    for i in range(3):
                        if self.triangles[nid].neighbors[i] is not None:
                            pending.append((nid, i))

    def _flip(self, t_id: int, u_id: int) -> tuple[int, int]:
        """Replace the shared diagonal of two triangles by the other one."""
        shared = [v for v in self.triangles[t_id].vertices
                  if v in self.triangles[u_id].vertices]
        a, b = shared
        # Orient so that t owns edge (a, b) and u owns (b, a).
        try:
            self._edge_index(t_id, a, b)
        except ValueError:
            a, b = b, a
        tri, utri = self.triangles[t_id], self.triangles[u_id]
        c = next(w for w in tri.vertices if w not in (a, b))
        d = next(w for w in utri.vertices if w not in (a, b))

        n_bc = self._neighbor_across(t_id, b, c)
        n_ca = self._neighbor_across(t_id, c, a)
        n_ad = self._neighbor_across(u_id, a, d)
        n_db = self._neighbor_across(u_id, d, b)
        self.triangles[t_id] = None
        self.triangles[u_id] = None
        t1 = self._alloc(Triangle((a, d, c), [n_ad, None, n_ca]))
        t2 = self._alloc(Triangle((d, b, c), [n_db, n_bc, None]))
        self.triangles[t1].neighbors[1] = t2
        self.triangles[t2].neighbors[2] = t1
        for new_id, (ea, eb) in ((t1, (a, d)), (t1, (c, a)),
                                 (t2, (d, b)), (t2, (b, c))):
            other = self._neighbor_across(new_id, ea, eb)
            if other is not None:
                idx = self._edge_index(other, eb, ea)
                self.triangles[other].neighbors[idx] = new_id
        return t1, t2

    # -- consistency -------------------------------------------------------

    def validate(self):
        """Raise ValueError on any broken mesh invariant."""
        total = 0.0
        edge_use: dict[tuple[int, int], int] = {}
        for i, tri in enumerate(self.triangles):
            if tri is None:
                continue
            a, b, c = (self.vertex_xy[v] for v in tri.vertices)
            s = _signed_area2(a, b, c)
            if s <= 0.0:
                raise ValueError(f"triangle {i} has non-positive area {s / 2.0}")
            total += s / 2.0
            for k in range(3):
                va = tri.vertices[k]
                vb = tri.vertices[(k + 1) % 3]
                edge_use[(min(va, vb), max(va, vb))] = \
                    edge_use.get((min(va, vb), max(va, vb)), 0) + 1
                n = tri.neighbors[k]
                if n is not None:
                    if self.triangles[n] is None:
                        raise ValueError(f"triangle {i} links dead neighbor {n}")
                    back = self._neighbor_across_safe(n, vb, va)
                    if back != i:
                        raise ValueError(
                            f"asymmetric neighbor link {i} <-> {n}")
        if abs(total - self.extent.area) > 1e-6 * max(1.0, self.extent.area):
            raise ValueError(
                f"triangle areas sum to {total}, extent area {self.extent.area}"
                " (gap or overlap)")
        for (va, vb), count in edge_use.items():
            if count > 2:
                raise ValueError(f"edge ({va}, {vb}) used {count} times")


def quadrilateral_test(mesh: TriangleMesh, tri_a: int, tri_b: int) -> str:
    """Max-min-angle test on two adjacent triangles.

    Returns "swap" when exchanging the shared diagonal strictly increases
    the minimum interior angle over the pair; "keep" otherwise.  Swaps
    across a non-convex union are never proposed.
    """
    ta, tb = mesh.triangles[tri_a], mesh.triangles[tri_b]
    if ta is None or tb is None:
        raise ValueError("quadrilateral test on removed triangle")
    shared = [v for v in ta.vertices if v in tb.vertices]
    if len(shared) != 2:
        raise ValueError(
            f"triangles {tri_a} and {tri_b} do not share exactly one edge")
    s1, s2 = shared
    p = next(v for v in ta.vertices if v not in shared)
    q = next(v for v in tb.vertices if v not in shared)

    ps1, ps2 = mesh.vertex_xy[s1], mesh.vertex_xy[s2]
    pp, pq = mesh.vertex_xy[p], mesh.vertex_xy[q]

    # Convexity: the two diagonals must properly cross.
    d1 = _signed_area2(pp, pq, ps1)
    d2 = _signed_area2(pp, pq, ps2)
    d3 = _signed_area2(ps1, ps2, pp)
    d4 = _signed_area2(ps1, ps2, pq)
    if d1 * d2 >= 0.0 or d3 * d4 >= 0.0:
        return "keep"

    min_now = min(*_angles(ps1, ps2, pp), *_angles(ps2, ps1, pq))
    min_swapped = min(*_angles(pp, pq, ps1), *_angles(pq, pp, ps2))
    return "swap" if min_swapped > min_now + 1e-14 else "keep"
