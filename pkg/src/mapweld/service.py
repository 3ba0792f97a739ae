"""HTTP review service for the human-in-the-loop workflow.

Serves trajectory/map geometry layers to the browser UI, accepts
versioned control-point sets, runs re-alignment/re-conflation as
background jobs, and applies refinement actions (fragment deletions,
attribute overrides) to the working map.  Single-user, loopback by
default; sessions live in memory with an append-only refinement log.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse

from .align import ControlPointPair
from .config import PipelineConfig
from .errors import MapWeldError
from .geo import read_trajectory_csv
from .maps import (load_pcd, parse_lanelet2, parse_osm_network,
                   project_network, write_lanelet2)
from .pipeline import align_maps, conflate_maps

LAYERS = ("slam_trajectory", "gnss_trajectory", "vm_lanelets",
          "vm_centerlines", "osm_ways", "matches", "validation",
          "triangulation", "point_cloud")
DEFAULT_VERTEX_BUDGET = 50_000
POINT_CLOUD_GRID = 0.5  # meters, downsampling cell for the scatter layer


@dataclass
class Job:
    handle: str
    stage: str
    version: int
    status: str = "queued"  # queued|running|done|failed|superseded|cancelled
    error: str | None = None
    report: dict | None = None


@dataclass
class Session:
    sid: str
    cfg: PipelineConfig
    slam: object = None
    gnss: object = None
    vm: object = None
    pcm: object = None
    osm: object = None
    control_versions: list[list[ControlPointPair]] = field(
        default_factory=lambda: [[]])
    alignment: object = None          # AlignmentOutcome
    alignment_version: int | None = None
    conflation: object = None         # ConflationOutcome
    conflation_version: int | None = None
    working_map: object = None
    reviewed_fragments: dict[int, str] = field(default_factory=dict)
    refinement_log: list[dict] = field(default_factory=list)
    jobs: dict[str, Job] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)
    counter: itertools.count = field(default_factory=itertools.count)

    @property
    def version(self) -> int:
        return len(self.control_versions) - 1

    def stage_status(self) -> dict:
        def entry(outcome, version):
            if outcome is None:
                return {"state": "missing", "version": None}
            state = "ok" if version == self.version else "stale"
            return {"state": state, "version": version}

        return {"align": entry(self.alignment, self.alignment_version),
                "conflate": entry(self.conflation, self.conflation_version)}


def load_session(sid: str, cfg: PipelineConfig) -> Session:
    cfg.validate(require=("vector_map", "slam_trajectory", "gnss_trajectory"))
    s = Session(sid, cfg)
    s.slam = read_trajectory_csv(Path(cfg.slam_trajectory).read_bytes())
    s.gnss = read_trajectory_csv(Path(cfg.gnss_trajectory).read_bytes())
    s.vm = parse_lanelet2(Path(cfg.vector_map).read_bytes())
    if cfg.point_cloud:
        s.pcm = load_pcd(Path(cfg.point_cloud).read_bytes())
    if cfg.osm:
        s.osm = parse_osm_network(Path(cfg.osm).read_bytes())
    if cfg.control_points:
        from .align import read_control_points
        s.control_versions.append(
            read_control_points(Path(cfg.control_points).read_text()))
    # initial rigid-only alignment gives the UI its baseline geometry
    s.alignment = align_maps(s.slam, s.gnss, s.vm, s.pcm,
                             s.control_versions[s.version])
    s.alignment_version = s.version
    s.working_map = s.alignment.vm_aligned
    return s


def _decimate(coords: list, budget: int) -> list:
    if len(coords) <= budget:
        return coords
    stride = -(-len(coords) // budget)
    kept = coords[::stride]
    if kept[-1] != coords[-1]:
        kept.append(coords[-1])
    return kept


def _xy_list(arr) -> list:
    return [[float(x), float(y)] for x, y in arr]


class ReviewService:
    def __init__(self, vertex_budget: int = DEFAULT_VERTEX_BUDGET,
                 ui_dir: Path | None = None):
        self.sessions: dict[str, Session] = {}
        self.budget = vertex_budget
        self.app = FastAPI(title="mapweld review service")
        self.ui_dir = ui_dir
        self._routes()

    # -- session plumbing ---------------------------------------------------

    def _session(self, sid: str) -> Session:
        try:
            return self.sessions[sid]
        except KeyError:
            raise HTTPException(404, f"unknown session {sid!r}") from None

    def create_session(self, sid: str, cfg: PipelineConfig) -> Session:
        session = load_session(sid, cfg)
        self.sessions[sid] = session
        return session

    # -- layer payloads -----------------------------------------------------

    def _geometry(self, s: Session, layer: str) -> dict:
        features: list[dict] = []
        if layer == "slam_trajectory" and s.alignment is not None:
            features = [{"id": 0, "coordinates":
                         _xy_list(s.alignment.slam_aligned.xy())}]
        elif layer == "gnss_trajectory" and s.alignment is not None:
            features = [{"id": 0, "coordinates":
                         _xy_list(s.alignment.gnss_local.xy())}]
        elif layer == "vm_lanelets" and s.working_map is not None:
            m = s.working_map
            for llid in sorted(m.lanelets):
                ll = m.lanelets[llid]
                left = m.linestring_coords(ll.left)
                right = m.linestring_coords(ll.right)
                ring = [[float(x), float(y)] for x, y in left] + \
                       [[float(x), float(y)] for x, y in reversed(right)]
                features.append({"id": llid, "coordinates": ring,
                                 "properties": dict(ll.attributes)})
        elif layer == "vm_centerlines" and s.conflation is not None:
            features = [
                {"id": cid, "coordinates": _xy_list(cl.geometry),
                 "properties": {"forward": cl.forward_ids,
                                "backward": cl.backward_ids}}
                for cid, cl in sorted(s.conflation.graph.centerlines.items())]
        elif layer == "osm_ways" and s.conflation is not None:
            net = s.conflation.osm_local
            features = [
                {"id": wid, "coordinates":
                 [[float(a), float(b)] for a, b in net.way_coords(wid)],
                 "properties": dict(net.ways[wid].tags)}
                for wid in sorted(net.ways)]
        elif layer == "matches" and s.conflation is not None:
            net = s.conflation.osm_local
            by_id = {p.id: p for p in s.conflation.polylines}
            for r in s.conflation.matches:
                if not r.matched:
                    continue
                ref = by_id[r.reference_id]
                mid_ref = ref.geometry[len(ref.geometry) // 2]
                chain = [net.node_xy(n) for n in r.chain_nodes]
                mid_chain = chain[len(chain) // 2]
                features.append({
                    "id": r.reference_id,
                    "coordinates": [[float(mid_ref[0]), float(mid_ref[1])],
                                    [float(mid_chain[0]), float(mid_chain[1])]],
                    "properties": {"similarity": r.similarity,
                                   "classification": r.classification,
                                   "way_ids": r.chain_way_ids,
                                   "reference": _xy_list(ref.geometry)},
                })
        elif layer == "validation" and s.conflation is not None:
            graph = s.conflation.graph
            for cid, entry in sorted(s.conflation.validation.items()):
                features.append({
                    "id": cid,
                    "coordinates": _xy_list(graph.centerlines[cid].geometry),
                    "properties": {
                        "color": entry["color"],
                        "lanelet_count": entry["lanelet_count"],
                        "osm_lanes": entry["osm_lanes"],
                        "lanelet_ids": entry["lanelet_ids"],
                        "proposed_deletions": [
                            i for i in s.conflation.fragment_proposals
                            if i in entry["lanelet_ids"]
                            and i in s.working_map.lanelets
                            and s.reviewed_fragments.get(i) != "rejected"],
                    },
                })
        elif layer == "triangulation" and s.alignment is not None \
                and s.alignment.sheet is not None:
            mesh = s.alignment.sheet.mesh_geometry()
            for k, verts in enumerate(mesh["triangles"]):
                ring = [mesh["vertices"][v] for v in verts]
                features.append({"id": k, "coordinates": ring + ring[:1]})
            features.append({
                "id": "control_points",
                "coordinates": [],
                "properties": {
                    "sources": mesh["vertices"][4:],
                    "targets": mesh["targets"][4:],
                }})
        elif layer == "point_cloud" and s.pcm is not None:
            base = (s.alignment.pcm_aligned
                    if s.alignment is not None and
                    s.alignment.pcm_aligned is not None else s.pcm)
            seen = set()
            pts = []
            for x, y in base.xyz[:, :2]:
                key = (round(x / POINT_CLOUD_GRID), round(y / POINT_CLOUD_GRID))
                if key in seen:
                    continue
                seen.add(key)
                pts.append([float(x), float(y)])
            features = [{"id": 0, "coordinates": pts}]

        total = sum(len(f["coordinates"]) for f in features)
        if total > self.budget:
            share = max(2, self.budget // max(1, len(features)))
            for f in features:
                f["coordinates"] = _decimate(f["coordinates"], share)
        return {"layer": layer, "version": s.version, "features": features}

    # -- jobs ----------------------------------------------------------------

    def _spawn(self, s: Session, stage: str) -> Job:
        with s.lock:
            for job in s.jobs.values():
                if job.status in ("queued", "running"):
                    job.status = "superseded"
            handle = str(next(s.counter))
            job = Job(handle, stage, s.version)
            s.jobs[handle] = job

        def work():
            with s.lock:
                if job.status == "superseded":
                    return
                job.status = "running"
            try:
                if stage == "align":
                    outcome = align_maps(s.slam, s.gnss, s.vm, s.pcm,
                                         s.control_versions[job.version])
                    report = outcome.report_dict()
                elif stage == "conflate":
                    osm_local = project_network(
                        s.osm, s.alignment.projector)
                    mapping = None
                    if s.cfg.mapping_table:
                        from .conflate import load_highway_mapping
                        mapping = load_highway_mapping(
                            Path(s.cfg.mapping_table).read_text())
                    labels = None
                    if s.cfg.labels:
                        from .conflate import read_labels
                        labels = read_labels(Path(s.cfg.labels).read_text())
                    outcome = conflate_maps(
                        s.alignment.vm_aligned, osm_local,
                        s.cfg.match_params(), mapping, labels,
                        s.cfg.overwrite_attrs, apply_fragment_removal=False,
                        length_threshold=s.cfg.length_threshold)
                    report = outcome.report_dict()
                else:  # pragma: no cover - guarded by the endpoint
                    raise ValueError(stage)
            except (MapWeldError, ValueError) as exc:
                with s.lock:
                    if job.status != "superseded":
                        job.status = "failed"
                        job.error = str(exc)
                return
            with s.lock:
                if job.status == "superseded" or job.version != s.version:
                    job.status = "superseded"
                    return
                if stage == "align":
                    s.alignment = outcome
                    s.alignment_version = job.version
                    s.working_map = outcome.vm_aligned
                    # downstream results no longer correspond to this warp
                    s.conflation = None
                    s.conflation_version = None
                else:
                    s.conflation = outcome
                    s.conflation_version = job.version
                    s.working_map = outcome.vm_conflated
                job.report = report
                job.status = "done"

        threading.Thread(target=work, daemon=True).start()
        return job

    # -- refinement -----------------------------------------------------------

    def _apply_refinement(self, s: Session, action: dict,
                          persist: bool = True) -> dict:
        kind = action.get("action")
        if kind == "confirm_fragment_deletion":
            ids = [int(i) for i in action.get("ids", [])]
            if s.conflation is None:
                raise HTTPException(409, "conflation has not run yet")
            unknown = [i for i in ids
                       if i not in s.conflation.fragment_proposals]
            if unknown:
                raise HTTPException(404, f"ids not proposed for deletion: "
                                         f"{unknown}")
            from .conflate import delete_lanelets
            s.working_map = delete_lanelets(s.working_map, ids)
            for i in ids:
                s.reviewed_fragments[i] = "deleted"
        elif kind == "reject_fragment_deletion":
            ids = [int(i) for i in action.get("ids", [])]
            if s.conflation is None:
                raise HTTPException(409, "conflation has not run yet")
            for i in ids:
                if i not in s.conflation.fragment_proposals:
                    raise HTTPException(404, f"id {i} was not proposed")
                s.reviewed_fragments[i] = "rejected"
        elif kind == "override_attribute":
            try:
                ll_id = int(action["lanelet_id"])
                key, value = action["key"], action["value"]
            except KeyError as exc:
                raise HTTPException(422, f"missing field {exc}") from None
            if ll_id not in s.working_map.lanelets:
                raise HTTPException(404, f"unknown lanelet {ll_id}")
            attrs = s.working_map.lanelets[ll_id].attributes
            attrs[str(key)] = str(value)
            attrs[f"{key}:provenance"] = "manual"
        else:
            raise HTTPException(422, f"unknown refinement action {kind!r}")
        entry = dict(action)
        entry["seq"] = len(s.refinement_log)
        s.refinement_log.append(entry)
        if persist:
            self._persist_log(s, entry)
        return {"applied": kind, "seq": entry["seq"]}

    def _persist_log(self, s: Session, entry: dict):
        out = Path(s.cfg.out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "refinement_log.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, sort_keys=True) + "\n")
        except OSError:
            pass  # the in-memory log stays authoritative for the session

    # -- routes ----------------------------------------------------------------

    def _routes(self):
        app = self.app

        @app.post("/session")
        def create(body: dict):
            sid = str(body.get("id", f"session-{len(self.sessions)}"))
            if sid in self.sessions:
                raise HTTPException(409, f"session {sid!r} exists")
            from .config import _INPUT_KEYS, load_config
            path_keys = set(_INPUT_KEYS) | {"out_dir"}
            cfg_overrides = {k: Path(v) if k in path_keys else v
                             for k, v in body.get("inputs", {}).items()}
            try:
                cfg = load_config(body.get("config"), cfg_overrides)
                self.create_session(sid, cfg)
            except (MapWeldError, ValueError, OSError) as exc:
                raise HTTPException(422, str(exc)) from exc
            return {"id": sid, "version": self.sessions[sid].version}

        @app.get("/session/{sid}")
        def status(sid: str):
            s = self._session(sid)
            with s.lock:
                return {"id": sid, "version": s.version,
                        "stages": s.stage_status(),
                        "control_point_count":
                            len(s.control_versions[s.version]),
                        "fragment_proposals":
                            ([] if s.conflation is None
                             else s.conflation.fragment_proposals),
                        "reviewed_fragments": s.reviewed_fragments}

        @app.get("/session/{sid}/geometry/{layer}")
        def geometry(sid: str, layer: str):
            s = self._session(sid)
            if layer not in LAYERS:
                raise HTTPException(
                    422, f"unknown layer {layer!r}; expected one of {LAYERS}")
            with s.lock:
                return self._geometry(s, layer)

        @app.put("/session/{sid}/control-points")
        def put_control_points(sid: str, body: list[dict]):
            s = self._session(sid)
            pairs = []
            seen = set()
            for i, entry in enumerate(body):
                try:
                    pair = ControlPointPair.of(*entry["source"],
                                               *entry["target"])
                except (KeyError, TypeError, ValueError) as exc:
                    raise HTTPException(
                        422, f"invalid control point at index {i}: {exc}"
                    ) from None
                key = (pair.source.x, pair.source.y)
                if key in seen:
                    raise HTTPException(
                        422, f"duplicate source point at index {i}")
                seen.add(key)
                pairs.append(pair)
            with s.lock:
                s.control_versions.append(pairs)
                return {"version": s.version}

        @app.post("/session/{sid}/recompute/{stage}")
        def recompute(sid: str, stage: str):
            s = self._session(sid)
            if stage not in ("align", "conflate"):
                raise HTTPException(422, f"unknown stage {stage!r}")
            if stage == "conflate":
                if s.osm is None:
                    raise HTTPException(409, "session has no OSM extract")
                with s.lock:
                    if s.alignment is None \
                            or s.alignment_version != s.version:
                        raise HTTPException(
                            409, "alignment is stale; recompute align first")
            job = self._spawn(s, stage)
            return {"job": job.handle, "version": job.version}

        @app.get("/session/{sid}/job/{handle}")
        def job_status(sid: str, handle: str):
            s = self._session(sid)
            with s.lock:
                job = s.jobs.get(handle)
                if job is None:
                    raise HTTPException(404, f"unknown job {handle!r}")
                return {"job": handle, "stage": job.stage,
                        "status": job.status, "version": job.version,
                        "error": job.error, "report": job.report}

        @app.post("/session/{sid}/refinement")
        def refinement(sid: str, body: dict):
            s = self._session(sid)
            with s.lock:
                return self._apply_refinement(s, body)

        @app.get("/session/{sid}/report/{stage}")
        def report(sid: str, stage: str):
            s = self._session(sid)
            with s.lock:
                if stage == "align" and s.alignment is not None:
                    return {"stage": stage,
                            "version": s.alignment_version,
                            "report": s.alignment.report_dict()}
                if stage == "conflate" and s.conflation is not None:
                    return {"stage": stage,
                            "version": s.conflation_version,
                            "report": s.conflation.report_dict()}
            raise HTTPException(404, f"no report for stage {stage!r}")

        @app.get("/session/{sid}/map")
        def working_map(sid: str):
            s = self._session(sid)
            with s.lock:
                data = write_lanelet2(s.working_map)
            from fastapi import Response
            return Response(content=data, media_type="application/xml")

        if self.ui_dir is not None:
            from fastapi.staticfiles import StaticFiles

            @app.get("/")
            def index():
                return FileResponse(self.ui_dir / "index.html")

            app.mount("/ui", StaticFiles(directory=self.ui_dir, html=True),
                      name="ui")


def replay_refinements(cfg: PipelineConfig, control_points,
                       log: list[dict]):
    """Re-run the pipeline on the original inputs and reapply the
    refinement log; returns the reproduced working map."""
    s = load_session("replay", cfg)
    s.control_versions.append(list(control_points))
    s.alignment = align_maps(s.slam, s.gnss, s.vm, s.pcm, control_points)
    s.alignment_version = s.version
    s.working_map = s.alignment.vm_aligned
    if s.osm is not None:
        osm_local = project_network(s.osm, s.alignment.projector)
        mapping = labels = None
        if cfg.mapping_table:
            from .conflate import load_highway_mapping
            mapping = load_highway_mapping(Path(cfg.mapping_table).read_text())
        if cfg.labels:
            from .conflate import read_labels
            labels = read_labels(Path(cfg.labels).read_text())
        s.conflation = conflate_maps(
            s.alignment.vm_aligned, osm_local, s.cfg.match_params(),
            mapping, labels, s.cfg.overwrite_attrs,
            apply_fragment_removal=False,
            length_threshold=s.cfg.length_threshold)
        s.conflation_version = s.version
        s.working_map = s.conflation.vm_conflated
    service = ReviewService()
    for entry in sorted(log, key=lambda e: e["seq"]):
        action = {k: v for k, v in entry.items() if k != "seq"}
        service._apply_refinement(s, action, persist=False)
    return s.working_map


def serve(cfg: PipelineConfig, host: str = "127.0.0.1", port: int = 8077):
    """Start the review service with a session loaded from the config."""
    import uvicorn

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    service = ReviewService(ui_dir=ui_dir if ui_dir.exists() else None)
    service.create_session("default", cfg)
    print(f"review session 'default' ready at http://{host}:{port}")
    uvicorn.run(service.app, host=host, port=port, log_level="warning")
