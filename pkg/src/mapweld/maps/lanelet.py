"""Lanelet2 vector-map model and .osm XML parsing/serialization.

The five primitive classes (points, linestrings, lanelets, areas,
regulatory elements) are kept with stable integer ids and verbatim
attribute dictionaries, so tool-specific tags survive the pipeline.

Coordinate frames: a map is either ``global`` (nodes carry lat/lon) or
``local`` (nodes carry ``local_x``/``local_y`` tags, meters).  Elevation
travels in the ``ele`` tag either way.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from ..errors import IntegrityError, ParseError
from ..geo import GeoPoint, LocalPoint


@dataclass
class Point:
    position: LocalPoint | GeoPoint
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass
class LineString:
    point_ids: list[int]
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass
class Lanelet:
    left: int
    right: int
    attributes: dict[str, str] = field(default_factory=dict)
    regulatory_elements: list[int] = field(default_factory=list)
    # members with roles we do not model, preserved for round-trips
    extra_members: list[tuple[str, str, int]] = field(default_factory=list)


@dataclass
class Area:
    outer: list[int]  # linestring ids forming the outer ring(s)
    attributes: dict[str, str] = field(default_factory=dict)
    extra_members: list[tuple[str, str, int]] = field(default_factory=list)


@dataclass
class RegulatoryElement:
    members: list[tuple[str, str, int]]  # (role, member type, ref id)
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass
class LaneletMap:
    points: dict[int, Point] = field(default_factory=dict)
    linestrings: dict[int, LineString] = field(default_factory=dict)
    lanelets: dict[int, Lanelet] = field(default_factory=dict)
    areas: dict[int, Area] = field(default_factory=dict)
    regulatory_elements: dict[int, RegulatoryElement] = field(default_factory=dict)
    frame: str = "local"

    def validate(self):
        """Raise IntegrityError if any reference dangles or a boundary is missing."""
        missing = []
        for lid, ls in self.linestrings.items():
            missing += [f"way {lid} -> node {p}" for p in ls.point_ids
                        if p not in self.points]
        for llid, ll in self.lanelets.items():
            for b in (ll.left, ll.right):
                if b not in self.linestrings:
                    missing.append(f"lanelet {llid} -> way {b}")
            missing += [f"lanelet {llid} -> regulatory element {r}"
                        for r in ll.regulatory_elements
                        if r not in self.regulatory_elements]
        for aid, area in self.areas.items():
            missing += [f"area {aid} -> way {w}" for w in area.outer
                        if w not in self.linestrings]
        for rid, re_ in self.regulatory_elements.items():
            for role, mtype, ref in re_.members:
                table = {"node": self.points, "way": self.linestrings,
                         "relation": None}[mtype]
                if table is None:
                    if (ref not in self.lanelets and ref not in self.areas
                            and ref not in self.regulatory_elements):
                        missing.append(f"regulatory element {rid} -> relation {ref}")
                elif ref not in table:
                    missing.append(f"regulatory element {rid} -> {mtype} {ref}")
        if missing:
            raise IntegrityError(
                "dangling references: " + "; ".join(missing), ids=missing)

    def linestring_coords(self, ls_id: int):
        """Planar coordinates of a linestring as a list of (x, y) tuples."""
        pts = []
        for pid in self.linestrings[ls_id].point_ids:
            pos = self.points[pid].position
            pts.append((pos.x, pos.y) if self.frame == "local"
                       else (pos.lon, pos.lat))
        return pts


def _tags(elem) -> dict[str, str]:
    return {t.attrib["k"]: t.attrib["v"] for t in elem.findall("tag")}


def _node_position(elem, tags, frame_hint):
    has_local = "local_x" in tags and "local_y" in tags
    ele = tags.pop("ele", None)
    z = float(ele) if ele is not None else None
    if has_local:
        x = float(tags.pop("local_x"))
        y = float(tags.pop("local_y"))
        return LocalPoint(x, y, z), "local"
    if frame_hint == "local":
        raise ParseError(f"node {elem.attrib.get('id')} lacks local_x/local_y "
                         "in a local-frame map")
    try:
        lat = float(elem.attrib["lat"])
        lon = float(elem.attrib["lon"])
    except KeyError as exc:
        raise ParseError(f"node {elem.attrib.get('id')} missing {exc}") from exc
    return GeoPoint(lat, lon, z), "global"


def parse_lanelet2(xml_bytes: bytes | str) -> LaneletMap:
    """Parse a Lanelet2 .osm document into a LaneletMap.

    Unknown tags are preserved verbatim.  A dangling reference raises
    IntegrityError listing every offending id.
    """
    if isinstance(xml_bytes, str):
        xml_bytes = xml_bytes.encode("utf-8")
    try:
        root = ET.fromstring(xml_bytes)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc.msg.split(':')[0]}",
                         line=exc.position[0]) from exc

    m = LaneletMap()
    frame = None
    for node in root.findall("node"):
        nid = int(node.attrib["id"])
        tags = _tags(node)
        pos, node_frame = _node_position(node, tags, frame)
        if frame is None:
            frame = node_frame
        elif frame != node_frame:
            raise IntegrityError(
                f"node {nid} mixes frames: map is {frame}, node is {node_frame}",
                ids=[nid])
        m.points[nid] = Point(pos, tags)
    m.frame = frame or "local"

    for way in root.findall("way"):
        wid = int(way.attrib["id"])
        refs = [int(nd.attrib["ref"]) for nd in way.findall("nd")]
        m.linestrings[wid] = LineString(refs, _tags(way))

    for rel in root.findall("relation"):
        rid = int(rel.attrib["id"])
        tags = _tags(rel)
        members = [(mm.attrib["role"], mm.attrib["type"], int(mm.attrib["ref"]))
                   for mm in rel.findall("member")]
        rtype = tags.get("type")
        if rtype == "lanelet":
            tags.pop("type")
            left = [ref for role, t, ref in members if role == "left" and t == "way"]
            right = [ref for role, t, ref in members if role == "right" and t == "way"]
            if len(left) != 1 or len(right) != 1:
                raise IntegrityError(
                    f"lanelet {rid} must have exactly one left and one right "
                    f"boundary (got {len(left)}/{len(right)})", ids=[rid])
            regs = [ref for role, t, ref in members
                    if role == "regulatory_element" and t == "relation"]
            extra = [mm for mm in members
                     if mm[0] not in ("left", "right", "regulatory_element")]
            m.lanelets[rid] = Lanelet(left[0], right[0], tags, regs, extra)
        elif rtype == "multipolygon":
            tags.pop("type")
            outer = [ref for role, t, ref in members if role == "outer" and t == "way"]
            extra = [mm for mm in members if mm[0] != "outer"]
            m.areas[rid] = Area(outer, tags, extra)
        elif rtype == "regulatory_element":
            m.regulatory_elements[rid] = RegulatoryElement(members, tags)
        else:
            # Unmodelled relation type: keep it as a regulatory-element-like
            # container so nothing is silently dropped.
            m.regulatory_elements[rid] = RegulatoryElement(members, tags)

    m.validate()
    return m


def _write_tags(elem, tags: dict[str, str]):
    for k in sorted(tags):
        ET.SubElement(elem, "tag", k=k, v=tags[k])


def _fmt(v: float) -> str:
    return repr(float(v))


def write_lanelet2(m: LaneletMap) -> bytes:
    """Serialize a LaneletMap back to Lanelet2 .osm XML.

    parse_lanelet2(write_lanelet2(m)) is structurally equal to m.
    """
    m.validate()
    root = ET.Element("osm", version="0.6", generator="mapweld")
    for nid in sorted(m.points):
        pt = m.points[nid]
        tags = dict(pt.attributes)
        if m.frame == "local":
            node = ET.SubElement(root, "node", id=str(nid), lat="0", lon="0")
            tags["local_x"] = _fmt(pt.position.x)
            tags["local_y"] = _fmt(pt.position.y)
            if pt.position.z is not None:
                tags["ele"] = _fmt(pt.position.z)
        else:
            node = ET.SubElement(root, "node", id=str(nid),
                                 lat=_fmt(pt.position.lat),
                                 lon=_fmt(pt.position.lon))
            if pt.position.ele is not None:
                tags["ele"] = _fmt(pt.position.ele)
        _write_tags(node, tags)

    for wid in sorted(m.linestrings):
        ls = m.linestrings[wid]
        way = ET.SubElement(root, "way", id=str(wid))
        for pid in ls.point_ids:
            ET.SubElement(way, "nd", ref=str(pid))
        _write_tags(way, ls.attributes)

    def _rel(rid):
        return ET.SubElement(root, "relation", id=str(rid))

    rel_ids = sorted(set(m.lanelets) | set(m.areas) | set(m.regulatory_elements))
    for rid in rel_ids:
        if rid in m.lanelets:
            ll = m.lanelets[rid]
            rel = _rel(rid)
            ET.SubElement(rel, "member", type="way", role="left", ref=str(ll.left))
            ET.SubElement(rel, "member", type="way", role="right", ref=str(ll.right))
            for reg in ll.regulatory_elements:
                ET.SubElement(rel, "member", type="relation",
                              role="regulatory_element", ref=str(reg))
            for role, mtype, ref in ll.extra_members:
                ET.SubElement(rel, "member", type=mtype, role=role, ref=str(ref))
            tags = dict(ll.attributes)
            tags["type"] = "lanelet"
            _write_tags(rel, tags)
        elif rid in m.areas:
            area = m.areas[rid]
            rel = _rel(rid)
            for way_id in area.outer:
                ET.SubElement(rel, "member", type="way", role="outer",
                              ref=str(way_id))
            for role, mtype, ref in area.extra_members:
                ET.SubElement(rel, "member", type=mtype, role=role, ref=str(ref))
            tags = dict(area.attributes)
            tags["type"] = "multipolygon"
            _write_tags(rel, tags)
        else:
            re_ = m.regulatory_elements[rid]
            rel = _rel(rid)
            for role, mtype, ref in re_.members:
                ET.SubElement(rel, "member", type=mtype, role=role, ref=str(ref))
            _write_tags(rel, re_.attributes)

    ET.indent(root)
    return ET.tostring(root, encoding="UTF-8", xml_declaration=True)
