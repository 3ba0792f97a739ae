"""Stage implementations for the align -> conflate -> georeference
pipeline, shared by the CLI and the review service.

The in-memory functions (align_maps, conflate_maps) do the work; the
run_* wrappers add file I/O and write every intermediate artifact with a
stage suffix so stages can be rerun independently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .align import (AlignmentReport, BoundingBox, build_rubber_sheet,
                    deviation_stats, read_control_points,
                    resample_correspondences, umeyama_fit)
from .config import PipelineConfig
from .conflate import (ConflationReport, MatchParams, buffer_grow_match,
                       build_reference_polylines, classify_matches,
                       collapse_lanelets, delete_lanelets,
                       fragment_candidates, load_highway_mapping,
                       precision_recall, read_labels, transfer_attributes,
                       validate_lane_counts)
from .errors import ConfigError, StateError
from .geo import Trajectory, UtmProjector, read_trajectory_csv, write_trajectory_csv
from .maps import (LaneletMap, PointCloudMap, georeference_map, load_pcd,
                   parse_lanelet2, parse_osm_network, project_network,
                   save_pcd, transform_map, write_lanelet2)


def _dump_json(path: Path, obj: dict):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


@dataclass
class AlignmentOutcome:
    projector: UtmProjector
    rigid: object
    sheet: object | None
    slam_aligned: Trajectory
    gnss_local: Trajectory
    vm_aligned: LaneletMap
    pcm_aligned: PointCloudMap | None
    report: AlignmentReport

    def report_dict(self) -> dict:
        d = self.report.to_dict()
        d["rigid"] = {
            "angle_deg": float(__import__("math").degrees(self.rigid.angle)),
            "translation": [float(t) for t in self.rigid.translation],
        }
        d["control_point_count"] = (0 if self.sheet is None
                                    else len(self.sheet.source_xy) - 4)
        return d


def align_maps(slam: Trajectory, gnss: Trajectory, vm: LaneletMap,
               pcm: PointCloudMap | None, control_points) -> AlignmentOutcome:
    """Project GNSS, rigid-fit SLAM onto it, apply the rigid transform to
    SLAM/VM/PCM, then warp everything with the control-point rubber sheet."""
    if gnss.frame != "global":
        raise StateError("GNSS trajectory must be global (timestamp,lat,lon)")
    projector = UtmProjector(gnss.points[0])  # first fix anchors the frame
    gnss_local = gnss.projected(projector)

    src, dst = resample_correspondences(slam, gnss_local)
    rigid = umeyama_fit(src, dst)
    slam_aligned = slam.with_xy(rigid.apply_xy(slam.xy()))
    vm_aligned = transform_map(vm, rigid)
    pcm_aligned = transform_map(pcm, rigid) if pcm is not None else None

    sheet = None
    if control_points:
        arrays = [slam_aligned.xy(), gnss_local.xy()]
        if vm_aligned.points:
            arrays.append([[p.position.x, p.position.y]
                           for p in vm_aligned.points.values()])
        if pcm_aligned is not None and len(pcm_aligned):
            arrays.append(pcm_aligned.xyz[:, :2])
        arrays.append([[p.source.x, p.source.y] for p in control_points])
        extent = BoundingBox.of(*arrays).expanded(0.10)
        sheet = build_rubber_sheet(control_points, extent)
        slam_aligned = slam_aligned.with_xy(sheet.apply_xy(slam_aligned.xy()))
        vm_aligned = transform_map(vm_aligned, sheet)
        if pcm_aligned is not None:
            pcm_aligned = transform_map(pcm_aligned, sheet)

    report = deviation_stats(slam_aligned, gnss_local)
    return AlignmentOutcome(projector, rigid, sheet, slam_aligned, gnss_local,
                            vm_aligned, pcm_aligned, report)


@dataclass
class ConflationOutcome:
    vm_conflated: LaneletMap
    osm_local: object
    graph: object
    polylines: list
    matches: list
    validation: dict
    fragment_proposals: list
    deleted: list
    report: ConflationReport
    labels_provided: bool

    def report_dict(self) -> dict:
        d = self.report.to_dict()
        d["fragment_proposals"] = self.fragment_proposals
        d["labels_provided"] = self.labels_provided
        return d


def conflate_maps(vm: LaneletMap, osm_local, params: MatchParams,
                  mapping: dict | None = None, labels: dict | None = None,
                  overwrite: bool = False, apply_fragment_removal: bool = True,
                  length_threshold: float = 1.5) -> ConflationOutcome:
    """collapse -> reference polylines -> matching -> transfer ->
    validation -> fragment removal, on an aligned local-frame map."""
    graph = collapse_lanelets(vm)
    polylines = build_reference_polylines(graph)
    matches = buffer_grow_match(polylines, osm_local, params)
    classify_matches(matches, labels or {}, params.classification_threshold)

    vm_out, transfer_report = transfer_attributes(
        vm, matches, polylines, graph, osm_local, mapping, overwrite)
    validation = validate_lane_counts(graph, matches, polylines, osm_local)
    proposals = fragment_candidates(graph, validation)
    if apply_fragment_removal:
        vm_out = delete_lanelets(vm_out, proposals)
        deleted = list(proposals)
    else:
        deleted = []
    metrics = precision_recall(matches, polylines, length_threshold,
                               labels_provided=labels is not None)
    report = ConflationReport(transfer_report, validation, deleted, metrics,
                              matches, polylines)
    return ConflationOutcome(vm_out, osm_local, graph, polylines, matches,
                             validation, proposals, deleted, report,
                             labels is not None)


# -- file-level stage runners -------------------------------------------------


def _stem(path) -> str:
    return Path(path).stem


def run_align(cfg: PipelineConfig) -> AlignmentOutcome:
    cfg.validate(require=("vector_map", "slam_trajectory", "gnss_trajectory"))
    slam = read_trajectory_csv(Path(cfg.slam_trajectory).read_bytes())
    gnss = read_trajectory_csv(Path(cfg.gnss_trajectory).read_bytes())
    vm = parse_lanelet2(Path(cfg.vector_map).read_bytes())
    pcm = (load_pcd(Path(cfg.point_cloud).read_bytes())
           if cfg.point_cloud else None)
    cps = (read_control_points(Path(cfg.control_points).read_text())
           if cfg.control_points else [])

    outcome = align_maps(slam, gnss, vm, pcm, cps)

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{_stem(cfg.vector_map)}_aligned.osm").write_bytes(
        write_lanelet2(outcome.vm_aligned))
    if outcome.pcm_aligned is not None:
        (out / f"{_stem(cfg.point_cloud)}_aligned.pcd").write_bytes(
            save_pcd(outcome.pcm_aligned))
    (out / "slam_aligned.csv").write_text(
        write_trajectory_csv(outcome.slam_aligned), encoding="utf-8")
    (out / "gnss_local.csv").write_text(
        write_trajectory_csv(outcome.gnss_local), encoding="utf-8")
    _dump_json(out / "projector.json", outcome.projector.to_metadata())
    _dump_json(out / "alignment_report.json", outcome.report_dict())
    return outcome


def _load_projector(out: Path) -> UtmProjector:
    meta = out / "projector.json"
    if not meta.exists():
        raise StateError(f"projector metadata missing: {meta}; run align first")
    return UtmProjector.from_metadata(json.loads(meta.read_text()))


def run_conflate(cfg: PipelineConfig) -> ConflationOutcome:
    cfg.validate(require=("vector_map", "osm"))
    out = Path(cfg.out_dir)
    aligned = out / f"{_stem(cfg.vector_map)}_aligned.osm"
    if not aligned.exists():
        raise StateError(f"aligned map missing: {aligned}; run align first")
    vm = parse_lanelet2(aligned.read_bytes())
    projector = _load_projector(out)
    osm_local = project_network(
        parse_osm_network(Path(cfg.osm).read_bytes()), projector)
    mapping = (load_highway_mapping(Path(cfg.mapping_table).read_text())
               if cfg.mapping_table else None)
    labels = (read_labels(Path(cfg.labels).read_text())
              if cfg.labels else None)

    outcome = conflate_maps(vm, osm_local, cfg.match_params(), mapping,
                            labels, cfg.overwrite_attrs,
                            cfg.apply_fragment_removal, cfg.length_threshold)
    (out / f"{_stem(cfg.vector_map)}_conflated.osm").write_bytes(
        write_lanelet2(outcome.vm_conflated))
    _dump_json(out / "conflation_report.json", outcome.report_dict())
    return outcome


def run_georeference(cfg: PipelineConfig) -> LaneletMap:
    cfg.validate(require=("vector_map",))
    out = Path(cfg.out_dir)
    projector = _load_projector(out)
    conflated = out / f"{_stem(cfg.vector_map)}_conflated.osm"
    aligned = out / f"{_stem(cfg.vector_map)}_aligned.osm"
    source = conflated if conflated.exists() else aligned
    if not source.exists():
        raise StateError(f"no aligned/conflated map in {out}; run align first")
    vm = parse_lanelet2(source.read_bytes())
    vm_geo = georeference_map(vm, projector)
    (out / f"{_stem(cfg.vector_map)}_georef.osm").write_bytes(
        write_lanelet2(vm_geo))
    if cfg.point_cloud:
        aligned_pcd = out / f"{_stem(cfg.point_cloud)}_aligned.pcd"
        if aligned_pcd.exists():
            # point cloud stays in the local frame; the geo-origin tag
            # makes it globally placeable
            target = out / f"{_stem(cfg.point_cloud)}_georef.pcd"
            target.write_bytes(aligned_pcd.read_bytes())
            _dump_json(out / f"{_stem(cfg.point_cloud)}_georef_origin.json",
                       projector.to_metadata())
    return vm_geo


def run_evaluate(cfg: PipelineConfig) -> dict:
    out = Path(cfg.out_dir)
    bundle: dict = {}
    alignment = out / "alignment_report.json"
    if alignment.exists():
        rep = json.loads(alignment.read_text())
        bundle["alignment"] = {k: rep[k] for k in
                               ("mean_deviation", "std_deviation", "rmse")}
    conflation = out / "conflation_report.json"
    if conflation.exists():
        rep = json.loads(conflation.read_text())
        labels = (read_labels(Path(cfg.labels).read_text())
                  if cfg.labels else None)
        matches, polylines = _matches_from_report(rep)
        classify_matches(matches, labels or {},
                         cfg.classification_threshold)
        metrics = precision_recall(matches, polylines, cfg.length_threshold,
                                   labels_provided=labels is not None)
        bundle["matching"] = metrics.to_dict()
        bundle["matching"]["labels_provided"] = labels is not None
        bundle["deleted_fragments"] = rep["deleted_fragments"]
        bundle["transfer"] = rep["transfer"]
    if not bundle:
        raise StateError(f"no reports found in {out}; run the pipeline first")
    _dump_json(out / "metrics.json", bundle)
    return bundle


def _matches_from_report(rep: dict):
    """Rehydrate just enough of the match results to re-derive metrics."""
    from .conflate import MatchResult

    class _Poly:
        def __init__(self, pid, length):
            self.id = pid
            self.length = length

    matches = [
        MatchResult(m["reference_polyline"],
                    m["chain_nodes"] if m["matched"] else None,
                    m["chain_way_ids"] if m["matched"] else None,
                    m["similarity"], m["components"], m["attempts"])
        for m in rep["matches"]
    ]
    polylines = [_Poly(p["id"], p["length"])
                 for p in rep["reference_polylines"]]
    return matches, polylines
