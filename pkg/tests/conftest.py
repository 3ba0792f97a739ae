"""Shared fixtures: a lane-section map builder, the synthetic town used
for self-conflation and pipeline tests, and a full on-disk workspace."""

from __future__ import annotations

import numpy as np
import pytest

from mapweld.geo import (GeoPoint, LocalPoint, Trajectory, UtmProjector,
                         write_trajectory_csv)
from mapweld.maps import (LaneletMap, Lanelet, LineString, OsmRoadNetwork,
                          OsmWay, Point, PointCloudMap, save_pcd,
                          write_lanelet2, write_osm_network)

LANE_WIDTH = 3.5
ORIGIN = GeoPoint(48.0, 11.6)


class MapBuilder:
    """Builds local-frame lanelet maps from straight lane sections.

    Points are deduplicated by coordinate, so sections that touch share
    boundary endpoints and become predecessor/successor of each other.
    """

    def __init__(self):
        self.map = LaneletMap()
        self._next_id = 1
        self._point_cache: dict[tuple, int] = {}

    def _take_id(self):
        i = self._next_id
        self._next_id += 1
        return i

    def point(self, x, y, z=0.0) -> int:
        key = (round(x, 6), round(y, 6))
        if key in self._point_cache:
            return self._point_cache[key]
        pid = self._take_id()
        self.map.points[pid] = Point(LocalPoint(float(x), float(y), z))
        self._point_cache[key] = pid
        return pid

    def linestring(self, coords, **attrs) -> int:
        lid = self._take_id()
        self.map.linestrings[lid] = LineString(
            [self.point(x, y) for x, y in coords],
            {k: str(v) for k, v in attrs.items()})
        return lid

    def lanelet(self, left: int, right: int, **attrs) -> int:
        llid = self._take_id()
        self.map.lanelets[llid] = Lanelet(
            left, right, {k: str(v) for k, v in attrs.items()})
        return llid

    def lane_section(self, start, end, forward=1, backward=1,
                     width=LANE_WIDTH, points_per_boundary=2) -> dict:
        """Straight road section; returns the created lanelet ids.

        Forward lanes sit right of the centerline (traveling start->end),
        backward lanes left of it; neighbors share boundary linestrings.
        """
        a = np.asarray(start, dtype=float)
        b = np.asarray(end, dtype=float)
        d = (b - a) / np.linalg.norm(b - a)
        n = np.array([-d[1], d[0]])  # left normal

        def boundary(offset):
            ts = np.linspace(0.0, 1.0, points_per_boundary)
            coords = [tuple(a + t * (b - a) + offset * n) for t in ts]
            return self.linestring(coords, type="line_thin")

        offsets = sorted({0.0}
                         | {-width * (i + 1) for i in range(forward)}
                         | {width * (i + 1) for i in range(backward)})
        boundaries = {round(off, 6): boundary(off) for off in offsets}

        section = {"forward": [], "backward": [], "boundaries": boundaries}
        for i in range(forward):
            left = boundaries[round(-width * i, 6)]
            right = boundaries[round(-width * (i + 1), 6)]
            section["forward"].append(self.lanelet(left, right, subtype="road"))
        for i in range(backward):
            left = boundaries[round(width * i, 6)]
            right = boundaries[round(width * (i + 1), 6)]
            section["backward"].append(self.lanelet(left, right, subtype="road"))
        return section


def local_osm_from_polylines(polylines, tags_for) -> OsmRoadNetwork:
    """Derive a local-frame OSM network whose ways trace the given
    reference polylines; tags_for(polyline) supplies each way's tags."""
    net = OsmRoadNetwork(frame="local")
    next_node = 1
    cache: dict[tuple, int] = {}
    for poly in polylines:
        refs = []
        for x, y in poly.geometry:
            key = (round(float(x), 9), round(float(y), 9))
            if key not in cache:
                cache[key] = next_node
                net.nodes[next_node] = LocalPoint(float(x), float(y))
                next_node += 1
            refs.append(cache[key])
        net.ways[1000 + poly.id] = OsmWay(refs, dict(tags_for(poly)))
    return net


def build_town() -> MapBuilder:
    """Synthetic 50-lanelet town: a street grid plus a connected straight
    street, a three-lane road, and a spur.  Grid sections stop short of
    the intersections so crossing streets stay topologically separate."""
    mb = MapBuilder()
    gap = 12.0
    step = 120.0
    coords = [0.0, step, 2 * step, 3 * step]
    # horizontal two-way sections between neighboring grid columns (24)
    for y in coords:
        for x0, x1 in zip(coords, coords[1:]):
            mb.lane_section((x0 + gap, y), (x1 - gap, y), 1, 1)
    # vertical two-way sections on three columns (18)
    for x in (coords[0], coords[1], coords[3]):
        for y0, y1 in zip(coords, coords[1:]):
            mb.lane_section((x, y0 + gap), (x, y1 - gap), 1, 1)
    # a connected three-section one-way street: exercises chaining (3)
    y = coords[3] + 60.0
    for x0, x1 in ((0.0, 150.0), (150.0, 300.0), (300.0, 450.0)):
        mb.lane_section((x0, y), (x1, y), forward=1, backward=0)
    # a three-lane road (3) and a two-lane spur (2)
    mb.lane_section((0.0, -80.0), (140.0, -80.0), forward=2, backward=1)
    mb.lane_section((200.0, -80.0), (290.0, -80.0), forward=1, backward=1)
    return mb


@pytest.fixture
def town_map() -> LaneletMap:
    return build_town().map


def global_trajectory(projector, local_xy, ts=None) -> Trajectory:
    pts = [projector.unproject(LocalPoint(float(x), float(y)))
           for x, y in local_xy]
    ts = np.arange(len(pts), dtype=float) if ts is None else ts
    return Trajectory(ts, pts, "global")


def write_workspace(tmp_path, route_xy=None, lane_tag_override=None):
    """Town VM + identity SLAM/GNSS + self-derived OSM + config file.

    The GNSS route starts at the VM frame origin so the pipeline's
    projector reproduces the construction frame exactly.
    """
    from mapweld.conflate import build_reference_polylines, collapse_lanelets

    projector = UtmProjector(ORIGIN)
    town = build_town().map

    route = route_xy if route_xy is not None else \
        [(0.0, 0.0), (60.0, 0.0), (120.0, 0.0), (180.0, 2.0), (240.0, 0.0),
         (300.0, 0.0), (348.0, 0.0)]
    assert route[0] == (0.0, 0.0)
    gnss = global_trajectory(projector, route)
    slam = gnss.projected(projector)

    graph = collapse_lanelets(town)
    polys = build_reference_polylines(graph)

    def tags_for(p):
        tags = {"highway": "residential", "maxspeed": "30",
                "name": "Teststraße", "surface": "asphalt", "oneway": "no",
                "lane_markings": "dashed",
                "lanes": str(graph.centerlines[p.centerline_ids[0]].lane_count)}
        if lane_tag_override:
            tags.update(lane_tag_override.get(p.id, {}))
        return tags

    local_net = local_osm_from_polylines(polys, tags_for)
    global_net = OsmRoadNetwork(
        {nid: projector.unproject(p) for nid, p in local_net.nodes.items()},
        {wid: OsmWay(list(w.node_ids), dict(w.tags))
         for wid, w in local_net.ways.items()},
        "global")

    (tmp_path / "town.osm").write_bytes(write_lanelet2(town))
    (tmp_path / "extract.osm").write_bytes(write_osm_network(global_net))
    (tmp_path / "slam.csv").write_text(write_trajectory_csv(slam))
    (tmp_path / "gnss.csv").write_text(write_trajectory_csv(gnss))
    cloud = PointCloudMap(np.array([[x, y, 1.5] for x, y in route]))
    (tmp_path / "town.pcd").write_bytes(save_pcd(cloud))
    (tmp_path / "config.toml").write_text(
        '[inputs]\n'
        'vector_map = "town.osm"\n'
        'point_cloud = "town.pcd"\n'
        'osm = "extract.osm"\n'
        'slam_trajectory = "slam.csv"\n'
        'gnss_trajectory = "gnss.csv"\n'
        '\n'
        '[output]\n'
        'directory = "out"\n')
    return tmp_path / "config.toml", town, projector
