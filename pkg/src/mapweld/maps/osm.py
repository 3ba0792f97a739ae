"""OpenStreetMap extract parsing: the SD road network used for conflation.

Only ways carrying a ``highway`` tag enter the road graph; everything
else in the extract (buildings, landuse, ...) is dropped.  Way tags are
preserved verbatim.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from ..errors import IntegrityError, ParseError, StateError
from ..geo import GeoPoint, LocalPoint, UtmProjector


@dataclass
class OsmWay:
    node_ids: list[int]
    tags: dict[str, str] = field(default_factory=dict)


@dataclass
class OsmRoadNetwork:
    nodes: dict[int, GeoPoint | LocalPoint] = field(default_factory=dict)
    ways: dict[int, OsmWay] = field(default_factory=dict)
    frame: str = "global"

    def node_xy(self, nid: int) -> tuple[float, float]:
        if self.frame != "local":
            raise StateError("node_xy() requires a projected (local) network")
        p = self.nodes[nid]
        return (p.x, p.y)

    def way_coords(self, wid: int) -> list[tuple[float, float]]:
        return [self.node_xy(n) for n in self.ways[wid].node_ids]


def parse_osm_network(xml_bytes: bytes | str) -> OsmRoadNetwork:
    if isinstance(xml_bytes, str):
        xml_bytes = xml_bytes.encode("utf-8")
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise ParseError(f"malformed OSM XML: {exc.msg.split(':')[0]}",
                         line=exc.position[0]) from exc

    all_nodes: dict[int, GeoPoint] = {}
    for node in root.findall("node"):
        nid = int(node.attrib["id"])
        all_nodes[nid] = GeoPoint(float(node.attrib["lat"]),
                                  float(node.attrib["lon"]))

    net = OsmRoadNetwork()
    for way in root.findall("way"):
        tags = {t.attrib["k"]: t.attrib["v"] for t in way.findall("tag")}
        if "highway" not in tags:
            continue
        wid = int(way.attrib["id"])
        refs = [int(nd.attrib["ref"]) for nd in way.findall("nd")]
        missing = [r for r in refs if r not in all_nodes]
        if missing:
            raise IntegrityError(
                f"way {wid} references missing nodes {missing}", ids=missing)
        net.ways[wid] = OsmWay(refs, tags)
        for r in refs:
            net.nodes[r] = all_nodes[r]
    return net


def write_osm_network(net: OsmRoadNetwork) -> bytes:
    if net.frame != "global":
        raise StateError("can only serialize a global-frame OSM network")
    root = ET.Element("osm", version="0.6", generator="mapweld")
    for nid in sorted(net.nodes):
        p = net.nodes[nid]
        ET.SubElement(root, "node", id=str(nid),
                      lat=repr(float(p.lat)), lon=repr(float(p.lon)))
    for wid in sorted(net.ways):
        way = net.ways[wid]
        elem = ET.SubElement(root, "way", id=str(wid))
        for r in way.node_ids:
            ET.SubElement(elem, "nd", ref=str(r))
        for k in sorted(way.tags):
            ET.SubElement(elem, "tag", k=k, v=way.tags[k])
    ET.indent(root)
    return ET.tostring(root, encoding="UTF-8", xml_declaration=True)


def project_network(net: OsmRoadNetwork, proj: UtmProjector) -> OsmRoadNetwork:
    """Project a global-frame network into the local grid frame."""
    if net.frame != "global":
        raise StateError("network already in local frame")
    nodes = {nid: proj.project(p) for nid, p in net.nodes.items()}
    ways = {wid: OsmWay(list(w.node_ids), dict(w.tags))
            for wid, w in net.ways.items()}
    return OsmRoadNetwork(nodes, ways, "local")
