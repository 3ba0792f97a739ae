"""Map artifact models and I/O: Lanelet2 vector maps, OSM road networks,
and ASCII PCD point clouds."""

from .lanelet import (Area, Lanelet, LaneletMap, LineString, Point,
                      RegulatoryElement, parse_lanelet2, write_lanelet2)
from .osm import (OsmRoadNetwork, OsmWay, parse_osm_network, project_network,
                  write_osm_network)
from .pcd import PointCloudMap, load_pcd, save_pcd
from .transform import georeference_map, project_map, transform_map

__all__ = [
    "Area", "Lanelet", "LaneletMap", "LineString", "Point",
    "RegulatoryElement", "parse_lanelet2", "write_lanelet2",
    "OsmRoadNetwork", "OsmWay", "parse_osm_network", "project_network",
    "write_osm_network", "PointCloudMap", "load_pcd", "save_pcd",
    "georeference_map", "project_map", "transform_map",
]
