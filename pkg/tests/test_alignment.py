"""Umeyama fit, triangulation, rubber-sheet, and deviation statistics."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mapweld.align import (BoundingBox, ControlPointPair, TriangleMesh,
                           build_rubber_sheet, deviation_stats,
                           min_distances_to_polyline, quadrilateral_test,
                           read_control_points, resample_correspondences,
                           umeyama_fit, write_control_points)
from mapweld.errors import CoverageError, DegenerateInputError
from mapweld.geo import LocalPoint, RigidTransform2D, Trajectory


def make_traj(xy, ts=None, frame="local"):
    xy = np.asarray(xy, dtype=float)
    if ts is None:
        ts = np.arange(len(xy), dtype=float)
    return Trajectory(ts, [LocalPoint(x, y) for x, y in xy], frame)


class TestUmeyama:
    def test_identity_when_equal(self):
        pts = np.random.default_rng(0).normal(size=(20, 2))
        t = umeyama_fit(pts, pts)
        assert np.allclose(t.rotation, np.eye(2), atol=1e-12)
        assert np.allclose(t.translation, 0.0, atol=1e-12)

    def test_recovers_constructed_transform(self):
        rng = np.random.default_rng(1)
        src = rng.normal(scale=30.0, size=(50, 2))
        truth = RigidTransform2D.from_angle(math.radians(37.0), (5.0, -3.0))
        dst = truth.apply_xy(src)
        fit = umeyama_fit(src, dst)
        assert np.abs(fit.rotation - truth.rotation).max() < 1e-9
        assert np.abs(fit.translation - truth.translation).max() < 1e-9

    def test_collinear_points_recovered(self):
        src = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [5.0, 0.0]])
        truth = RigidTransform2D.from_angle(math.radians(63.0), (-2.0, 4.0))
        dst = truth.apply_xy(src)
        fit = umeyama_fit(src, dst)
        assert np.abs(fit.apply_xy(src) - dst).max() < 1e-9

    def test_two_points_suffice(self):
        src = np.array([[0.0, 0.0], [2.0, 0.0]])
        truth = RigidTransform2D.from_angle(1.1, (3.0, 3.0))
        dst = truth.apply_xy(src)
        fit = umeyama_fit(src, dst)
        assert np.abs(fit.apply_xy(src) - dst).max() < 1e-9

    def test_degenerate_input(self):
        with pytest.raises(DegenerateInputError):
            umeyama_fit([[1.0, 1.0]] * 5, [[0.0, 0.0]] * 5)

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            umeyama_fit([[0, 0], [1, 1]], [[0, 0], [1, 1], [2, 2]])

    def test_never_increases_residuals(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            src = rng.normal(scale=10, size=(rng.integers(2, 40), 2))
            dst = src + rng.normal(scale=1.0, size=src.shape)
            fit = umeyama_fit(src, dst)
            before = ((src - dst) ** 2).sum()
            after = ((fit.apply_xy(src) - dst) ** 2).sum()
            assert after <= before + 1e-9

    def test_noisy_fit_not_worse_than_grid_search(self):
        rng = np.random.default_rng(3)
        src = rng.uniform(-50, 50, size=(120, 2))
        truth = RigidTransform2D.from_angle(0.8, (12.0, -7.0))
        dst = truth.apply_xy(src) + rng.normal(scale=0.1, size=src.shape)
        fit = umeyama_fit(src, dst)
        fit_rmse = np.sqrt(((fit.apply_xy(src) - dst) ** 2).sum(axis=1).mean())
        best = np.inf
        for theta in np.linspace(0.8 - 0.01, 0.8 + 0.01, 81):
            rot = RigidTransform2D.from_angle(theta)
            # optimal translation for a fixed rotation
            t = dst.mean(axis=0) - rot.apply_xy(src).mean(axis=0)
            r = np.sqrt(((src @ rot.rotation.T + t - dst) ** 2)
                        .sum(axis=1).mean())
            best = min(best, r)
        assert fit_rmse <= best + 1e-6


class TestResample:
    def test_identical_grids(self):
        slam = make_traj([[0, 0], [1, 0], [2, 0]])
        gnss = make_traj([[0, 1], [1, 1], [2, 1]])
        src, dst = resample_correspondences(slam, gnss)
        assert np.array_equal(src, slam.xy())
        assert np.array_equal(dst, gnss.xy())

    def test_midpoint_interpolation(self):
        slam = make_traj([[0, 0], [1, 0]], ts=[0.5, 0.75])
        gnss = make_traj([[0, 0], [10, 4]], ts=[0.0, 1.0])
        src, dst = resample_correspondences(slam, gnss)
        assert dst[0] == pytest.approx([5.0, 2.0])

    def test_against_scalar_oracle(self):
        rng = np.random.default_rng(4)
        ts = np.sort(rng.uniform(0, 100, size=40))
        ts += np.arange(40) * 1e-6  # guarantee strict monotonicity
        slam = make_traj(rng.normal(size=(40, 2)), ts=ts)
        tg = np.sort(rng.uniform(-10, 110, size=25))
        tg += np.arange(25) * 1e-6
        gxy = rng.normal(size=(25, 2))
        gnss = make_traj(gxy, ts=tg)
        src, dst = resample_correspondences(slam, gnss)
        k = 0
        for i, t in enumerate(ts):
            if t < tg[0] or t > tg[-1]:
                continue
            j = np.searchsorted(tg, t, side="right") - 1
            j = min(j, len(tg) - 2)
            w = (t - tg[j]) / (tg[j + 1] - tg[j])
            expected = (1 - w) * gxy[j] + w * gxy[j + 1]
            assert dst[k] == pytest.approx(expected, abs=1e-9)
            k += 1
        assert k == len(dst)

    def test_no_overlap(self):
        slam = make_traj([[0, 0], [1, 0]], ts=[0, 1])
        gnss = make_traj([[0, 0], [1, 0]], ts=[5, 6])
        with pytest.raises(ValueError):
            resample_correspondences(slam, gnss)


UNIT = BoundingBox(0.0, 0.0, 1.0, 1.0)


def _pair_mesh(s1, s2, p, q):
    """Two-triangle mesh around a shared edge, for quadrilateral tests."""
    from mapweld.align import Triangle
    mesh = TriangleMesh(BoundingBox(-10.0, -10.0, 10.0, 10.0))
    mesh.vertex_xy = [s1, s2, p, q]
    mesh.triangles = [Triangle((0, 1, 2), [1, None, None]),
                      Triangle((1, 0, 3), [0, None, None])]
    return mesh


def mesh_with(points, extent=UNIT, validate_each=True):
    mesh = TriangleMesh(extent)
    for x, y in points:
        mesh.insert(x, y)
        if validate_each:
            mesh.validate()
    return mesh


class TestMesh:
    def test_initial_rectangle(self):
        mesh = TriangleMesh(UNIT)
        mesh.validate()
        assert len(mesh.live_ids()) == 2

    def test_single_insert_gives_six_triangles(self):
        mesh = mesh_with([(0.4, 0.5)])
        # 1 -> 3 split of one of the two halves, plus flips, never loses area
        assert len(mesh.live_ids()) == 4

    def test_validity_after_many_random_inserts(self):
        rng = np.random.default_rng(6)
        mesh = mesh_with(rng.uniform(0.05, 0.95, size=(40, 2)))
        assert len(mesh.live_ids()) == 2 + 2 * 40

    def test_on_edge_insert(self):
        # The initial diagonal runs (0,0)-(1,1); a point on it splits 1->2 twice.
        mesh = TriangleMesh(UNIT)
        mesh.insert(0.5, 0.5)
        mesh.validate()
        assert len(mesh.live_ids()) == 4

    def test_insert_outside_rejected(self):
        mesh = TriangleMesh(UNIT)
        with pytest.raises(ValueError):
            mesh.insert(1.5, 0.5)
        with pytest.raises(ValueError):
            mesh.insert(1.0, 0.5)  # boundary is not strictly inside

    def test_locate_lowest_id_on_ties(self):
        mesh = TriangleMesh(UNIT)
        # (0.5, 0.5) lies exactly on the shared diagonal of triangles 0 and 1
        assert mesh.locate(0.5, 0.5) == 0
        assert mesh.locate(0.0, 0.0) == 0  # extent corner: lowest owner

    def test_locate_outside(self):
        mesh = TriangleMesh(UNIT)
        with pytest.raises(CoverageError):
            mesh.locate(2.0, 2.0)

    def test_locate_against_brute_force(self):
        rng = np.random.default_rng(7)
        mesh = mesh_with(rng.uniform(0.05, 0.95, size=(15, 2)),
                         validate_each=False)
        live = mesh.live_ids()
        pts = rng.uniform(0.0, 1.0, size=(10_000, 2))
        for x, y in pts:
            got = mesh.locate(x, y)
            # brute-force barycentric scan, lowest id wins
            expected = None
            for i in live:
                a, b, c = mesh.coords(i)
                mat = np.array([[b[0] - a[0], c[0] - a[0]],
                                [b[1] - a[1], c[1] - a[1]]])
                lam = np.linalg.solve(mat, np.array([x - a[0], y - a[1]]))
                bary = np.array([1 - lam.sum(), lam[0], lam[1]])
                if np.all(bary >= -1e-10):
                    expected = i
                    break
            assert got == expected


class TestQuadrilateralTest:
    def test_square_tie_keeps(self):
        mesh = TriangleMesh(UNIT)  # two right isoceles halves of a square
        assert quadrilateral_test(mesh, 0, 1) == "keep"

    def test_rectangle_diagonals_symmetric_keep(self):
        # Even a very flat rectangle keeps: its two diagonals are congruent.
        mesh = TriangleMesh(BoundingBox(0.0, 0.0, 10.0, 0.5))
        assert quadrilateral_test(mesh, 0, 1) == "keep"

    def test_sliver_swaps(self):
        # Shared edge (0,0)-(1,0) with a nearly-flat apex above and a deep
        # apex below; swapping raises the minimum angle from ~2 to ~40 deg.
        s1, s2 = (0.0, 0.0), (1.0, 0.0)
        p = (0.5, 0.5 * math.tan(math.radians(2.0)))
        q = (0.5, -0.6)
        mesh = _pair_mesh(s1, s2, p, q)
        assert quadrilateral_test(mesh, 0, 1) == "swap"

        def tri_angles(a, b, c):
            out = []
            for x, y, z in ((a, b, c), (b, c, a), (c, a, b)):
                v1 = np.subtract(y, x)
                v2 = np.subtract(z, x)
                cosv = v1 @ v2 / (np.linalg.norm(v1) * np.linalg.norm(v2))
                out.append(math.acos(np.clip(cosv, -1, 1)))
            return out

        now = math.degrees(min(tri_angles(s1, s2, p) + tri_angles(s2, s1, q)))
        swapped = math.degrees(min(tri_angles(p, q, s1) + tri_angles(q, p, s2)))
        assert now == pytest.approx(2.0, abs=0.1)
        assert swapped > 35.0

    def test_non_convex_keeps(self):
        mesh = TriangleMesh(UNIT)
        mesh.insert(0.9, 0.5)
        mesh.validate()
        kept = 0
        for i in mesh.live_ids():
            for n in mesh.triangles[i].neighbors:
                if n is None:
                    continue
                shared = [v for v in mesh.triangles[i].vertices
                          if v in mesh.triangles[n].vertices]
                p = next(v for v in mesh.triangles[i].vertices if v not in shared)
                q = next(v for v in mesh.triangles[n].vertices if v not in shared)
                # detect a non-convex union: diagonals must not cross
                s1, s2 = (mesh.vertex_xy[v] for v in shared)
                pp, qq = mesh.vertex_xy[p], mesh.vertex_xy[q]
                def cross(o, a, b):
                    return ((a[0] - o[0]) * (b[1] - o[1])
                            - (a[1] - o[1]) * (b[0] - o[0]))
                if cross(pp, qq, s1) * cross(pp, qq, s2) >= 0:
                    assert quadrilateral_test(mesh, i, n) == "keep"
                    kept += 1
        assert kept > 0  # fixture really contains non-convex unions

    def test_non_adjacent_rejected(self):
        mesh = TriangleMesh(UNIT)
        mesh.insert(0.3, 0.7)
        ids = mesh.live_ids()
        found = False
        for i in ids:
            for j in ids:
                if i >= j:
                    continue
                shared = [v for v in mesh.triangles[i].vertices
                          if v in mesh.triangles[j].vertices]
                if len(shared) != 2:
                    with pytest.raises(ValueError):
                        quadrilateral_test(mesh, i, j)
                    found = True
        assert found


def solve_affine_oracle(src_tri, dst_tri):
    """Literal nine-equation solve for one triangle's matrix."""
    a = np.zeros((9, 9))
    b = np.zeros(9)
    for i, ((ux, uy), (vx, vy)) in enumerate(zip(src_tri, dst_tri)):
        u = (ux, uy, 1.0)
        for r in range(3):
            a[3 * i + r, 3 * r:3 * r + 3] = u
        b[3 * i:3 * i + 3] = (vx, vy, 1.0)
    return np.linalg.solve(a, b).reshape(3, 3)


class TestRubberSheet:
    def test_identity_control_point(self):
        sheet = build_rubber_sheet([ControlPointPair.of(0.3, 0.4, 0.3, 0.4)],
                                   UNIT)
        assert np.allclose(sheet.matrices - np.eye(3), 0.0, atol=1e-12)
        pts = np.random.default_rng(8).uniform(0, 1, size=(50, 2))
        assert np.abs(sheet.apply_xy(pts) - pts).max() < 1e-12

    def test_single_displaced_point_matches_nine_equation_oracle(self):
        d = 0.2
        sheet = build_rubber_sheet([ControlPointPair.of(0.5, 0.25, 0.5 + d, 0.25)],
                                   UNIT)
        # one interior insertion: the containing half splits 1 -> 3
        assert sheet.triangle_count == 4
        for k, verts in enumerate(sheet.triangles):
            src = [sheet.source_xy[v] for v in verts]
            dst = [sheet.target_xy[v] for v in verts]
            oracle = solve_affine_oracle(src, dst)
            assert np.abs(sheet.matrices[k] - oracle).max() < 1e-9

    def test_control_points_map_exactly(self):
        rng = np.random.default_rng(9)
        for trial in range(10):
            n = int(rng.integers(1, 26))
            src = rng.uniform(0.05, 0.95, size=(n, 2))
            dst = src + rng.uniform(-0.03, 0.03, size=(n, 2))
            cps = [ControlPointPair.of(*s, *t) for s, t in zip(src, dst)]
            sheet = build_rubber_sheet(cps, UNIT)
            out = sheet.apply_xy(src)
            assert np.abs(out - dst).max() < 1e-9

    def test_continuity_across_edges(self):
        rng = np.random.default_rng(10)
        src = rng.uniform(0.1, 0.9, size=(12, 2))
        dst = src + rng.uniform(-0.05, 0.05, size=(12, 2))
        sheet = build_rubber_sheet(
            [ControlPointPair.of(*s, *t) for s, t in zip(src, dst)], UNIT)
        # Every interior edge: its midpoint must map identically under both
        # adjacent triangle matrices.
        edges = {}
        for k, verts in enumerate(sheet.triangles):
            for i in range(3):
                e = tuple(sorted((verts[i], verts[(i + 1) % 3])))
                edges.setdefault(e, []).append(k)
        checked = 0
        for (va, vb), owners in edges.items():
            if len(owners) != 2:
                continue
            mid = (sheet.source_xy[va] + sheet.source_xy[vb]) / 2.0
            h = np.array([mid[0], mid[1], 1.0])
            r1 = sheet.matrices[owners[0]] @ h
            r2 = sheet.matrices[owners[1]] @ h
            assert np.abs(r1 - r2).max() < 1e-9
            checked += 1
        assert checked > 10

    def test_third_row_is_homogeneous(self):
        rng = np.random.default_rng(11)
        src = rng.uniform(0.1, 0.9, size=(8, 2))
        dst = src + rng.uniform(-0.05, 0.05, size=(8, 2))
        sheet = build_rubber_sheet(
            [ControlPointPair.of(*s, *t) for s, t in zip(src, dst)], UNIT)
        assert np.abs(sheet.matrices[:, 2, :] - [0.0, 0.0, 1.0]).max() < 1e-12

    def test_local_linearity_in_triangle(self):
        sheet = build_rubber_sheet([ControlPointPair.of(0.5, 0.5, 0.62, 0.47)],
                                   UNIT)
        tri = sheet.locate(LocalPoint(0.2, 0.1))
        verts = sheet.triangles[tri]
        a, b, c = (sheet.source_xy[v] for v in verts)
        centroid = (np.asarray(a) + b + c) / 3.0
        inner = centroid + (np.asarray(a) - centroid) * 0.5
        pts = np.array([centroid, (centroid + inner) / 2.0, inner])
        out = sheet.apply_xy(pts)
        cross = ((out[1] - out[0])[0] * (out[2] - out[0])[1]
                 - (out[1] - out[0])[1] * (out[2] - out[0])[0])
        assert abs(cross) < 1e-12

    def test_zero_displacement_is_identity_everywhere(self):
        rng = np.random.default_rng(12)
        src = rng.uniform(0.1, 0.9, size=(6, 2))
        sheet = build_rubber_sheet(
            [ControlPointPair.of(*s, *s) for s in src], UNIT)
        pts = rng.uniform(0, 1, size=(500, 2))
        assert np.abs(sheet.apply_xy(pts) - pts).max() < 1e-12

    def test_duplicate_source_rejected(self):
        with pytest.raises(ValueError):
            build_rubber_sheet([ControlPointPair.of(0.5, 0.5, 0.6, 0.6),
                                ControlPointPair.of(0.5, 0.5, 0.4, 0.4)], UNIT)

    def test_boundary_control_point_rejected(self):
        with pytest.raises(ValueError):
            build_rubber_sheet([ControlPointPair.of(0.0, 0.5, 0.1, 0.5)], UNIT)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            build_rubber_sheet([], UNIT)

    def test_coverage_error_reports_coordinates(self):
        sheet = build_rubber_sheet([ControlPointPair.of(0.5, 0.5, 0.5, 0.5)],
                                   UNIT)
        with pytest.raises(CoverageError) as exc:
            sheet.apply_xy(np.array([[0.5, 0.5], [3.0, 0.5]]))
        assert exc.value.points == ((3.0, 0.5),)
        assert "3.0" in str(exc.value)

    def test_control_point_json_round_trip(self):
        cps = [ControlPointPair.of(1, 2, 3, 4), ControlPointPair.of(5, 6, 7, 8)]
        again = read_control_points(write_control_points(cps))
        assert again == cps

    @given(st.integers(1, 12), st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_interpolation_exactness_property(self, n, seed):
        rng = np.random.default_rng(seed)
        src = rng.uniform(0.05, 0.95, size=(n, 2))
        # hypothesis may generate coincident sources; drop duplicates
        src = np.unique(src, axis=0)
        dst = src + rng.uniform(-0.04, 0.04, size=src.shape)
        sheet = build_rubber_sheet(
            [ControlPointPair.of(*s, *t) for s, t in zip(src, dst)], UNIT)
        assert np.abs(sheet.apply_xy(src) - dst).max() < 1e-9


class TestDeviationStats:
    def test_identical_trajectories(self):
        t = make_traj([[0, 0], [5, 0], [10, 2]])
        rep = deviation_stats(t, t)
        assert rep.mean_deviation == 0.0
        assert rep.std_deviation == 0.0
        assert rep.rmse == 0.0

    def test_constant_lateral_offset(self):
        a = make_traj([[0, 2], [5, 2], [10, 2]])
        b = make_traj([[-5, 0], [15, 0]])
        rep = deviation_stats(a, b)
        assert rep.mean_deviation == pytest.approx(2.0)
        assert rep.rmse == pytest.approx(2.0)
        assert rep.std_deviation == pytest.approx(0.0, abs=1e-12)

    def test_point_to_segment_not_vertex(self):
        # Nearest GNSS vertex is far, but the segment passes close by.
        slam = make_traj([[5, 1], [5, 1.5]])
        gnss = make_traj([[0, 0], [10, 0]])
        rep = deviation_stats(slam, gnss)
        assert rep.residuals[0] == pytest.approx(1.0)

    def test_against_brute_force_oracle(self):
        rng = np.random.default_rng(13)
        slam_xy = rng.uniform(-20, 20, size=(60, 2))
        gnss_xy = rng.uniform(-20, 20, size=(25, 2))
        got = min_distances_to_polyline(slam_xy, gnss_xy)

        def seg_dist(p, a, b):
            ab = np.subtract(b, a)
            t = np.clip(np.dot(np.subtract(p, a), ab) / (ab @ ab), 0, 1)
            return float(np.linalg.norm(np.subtract(p, a) - t * ab))

        for i, p in enumerate(slam_xy):
            exp = min(seg_dist(p, gnss_xy[j], gnss_xy[j + 1])
                      for j in range(len(gnss_xy) - 1))
            assert got[i] == pytest.approx(exp, abs=1e-12)

    def test_rmse_mean_consistency(self):
        rng = np.random.default_rng(14)
        a = make_traj(rng.uniform(-5, 5, size=(30, 2)))
        b = make_traj(rng.uniform(-5, 5, size=(12, 2)))
        rep = deviation_stats(a, b)
        assert rep.rmse ** 2 >= rep.mean_deviation ** 2 - 1e-12
        assert rep.rmse ** 2 == pytest.approx(
            rep.mean_deviation ** 2 + rep.std_deviation ** 2)

    def test_frame_mismatch(self):
        a = make_traj([[0, 0], [1, 0]])
        b = Trajectory([0.0, 1.0], [LocalPoint(0, 0), LocalPoint(1, 0)], "local")
        b.frame = "global"
        with pytest.raises(ValueError):
            deviation_stats(a, b)
