"""Similarity score and buffer-growing matching."""

import math

import numpy as np
import pytest

from conftest import MapBuilder, local_osm_from_polylines
from mapweld.conflate import (MatchParams, buffer_grow_match,
                              build_reference_polylines, collapse_lanelets,
                              similarity_score)
from mapweld.geo import LocalPoint
from mapweld.maps import OsmRoadNetwork, OsmWay


def make_network(ways: dict[int, list[tuple[float, float]]],
                 tags: dict[int, dict] | None = None) -> OsmRoadNetwork:
    net = OsmRoadNetwork(frame="local")
    nid = 1
    cache = {}
    for wid, coords in ways.items():
        refs = []
        for x, y in coords:
            key = (x, y)
            if key not in cache:
                cache[key] = nid
                net.nodes[nid] = LocalPoint(float(x), float(y))
                nid += 1
            refs.append(cache[key])
        net.ways[wid] = OsmWay(refs, dict((tags or {}).get(wid, {"highway": "x"})))
    return net


class TestSimilarityScore:
    def test_identical_polylines_score_one(self):
        line = [(0, 0), (10, 0), (20, 5)]
        score, comps = similarity_score(line, line)
        assert score == 1.0
        assert all(v == 1.0 for v in comps.values())

    def test_perpendicular_chords_angle_zero(self):
        a = [(-5, 0), (5, 0)]
        b = [(0, -5), (0, 5)]
        _, comps = similarity_score(a, b)
        assert comps["angle"] == pytest.approx(0.0, abs=1e-12)

    def test_parallel_offset_area_term(self):
        length, d = 40.0, 2.0
        a = [(0, 0), (length, 0)]
        b = [(0, d), (length, d)]
        _, comps = similarity_score(a, b)
        # enclosed area = d * L (shoelace oracle), normalized by L^2
        ring = np.array(a + b[::-1])
        x, y = ring[:, 0], ring[:, 1]
        shoelace = 0.5 * abs(x @ np.roll(y, -1) - y @ np.roll(x, -1))
        assert shoelace == pytest.approx(d * length)
        assert comps["area"] == pytest.approx(1.0 - d / length)

    def test_orientation_alignment_is_symmetric(self):
        a = [(0, 0), (30, 4)]
        b = [(29, 5), (1, 0)]  # roughly the reverse of a
        s1, _ = similarity_score(a, b)
        s2, _ = similarity_score(a, b[::-1])
        assert s1 == pytest.approx(s2)

    def test_length_ratio(self):
        a = [(0, 0), (10, 0)]
        b = [(0, 0), (5, 0)]
        _, comps = similarity_score(a, b)
        assert comps["length"] == pytest.approx(0.5)

    def test_degenerate_rejected(self):
        with pytest.raises(ValueError):
            similarity_score([(0, 0)], [(1, 1), (2, 2)])
        with pytest.raises(ValueError):
            similarity_score([(0, 0), (0, 0)], [(1, 1), (2, 2)])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            MatchParams(weights=(0.5, 0.5, 0.5, 0.5))


def single_reference(geometry):
    mb = MapBuilder()
    start, end = geometry[0], geometry[-1]
    mb.lane_section(start, end, 1, 0)
    graph = collapse_lanelets(mb.map)
    polys = build_reference_polylines(graph)
    assert len(polys) == 1
    return polys


class TestBufferGrowing:
    def test_coincident_way_matches_with_max_similarity(self):
        polys = single_reference([(0, -1.75), (100, -1.75)])
        ref = polys[0]
        net = make_network({7: [tuple(p) for p in ref.geometry]})
        (res,) = buffer_grow_match(polys, net)
        assert res.matched
        assert res.chain_way_ids == [7]
        assert res.similarity == pytest.approx(1.0)
        assert res.attempts == 1

    def test_no_candidate_grows_exactly_three_times(self):
        polys = single_reference([(0, 0), (100, 0)])
        # the only way lies far beyond the largest buffer (5 * 1.5^3 ~ 17 m)
        net = make_network({7: [(0, 500), (100, 500)]})
        (res,) = buffer_grow_match(polys, net)
        assert not res.matched
        assert res.attempts == 4  # initial + three growths

    def test_growth_finds_candidate_on_retry(self):
        polys = single_reference([(0, 0), (100, 0)])
        ref_y = polys[0].geometry[0][1]
        # offset 6.5 m: outside the initial 5 m buffer, inside 7.5 m
        net = make_network({7: [(0, ref_y + 6.5), (100, ref_y + 6.5)]})
        (res,) = buffer_grow_match(polys, net)
        assert res.attempts == 2
        assert res.matched

    def test_below_threshold_rejected(self):
        polys = single_reference([(0, 0), (100, 0)])
        # short stub inside the buffer: poor length/area score
        net = make_network({7: [(45, 0.25), (52, 1.0)]})
        (res,) = buffer_grow_match(polys, net, MatchParams(accept_threshold=0.8))
        assert not res.matched
        assert res.similarity is not None and res.similarity <= 0.8
        assert res.attempts == 1

    def test_empty_network_rejected(self):
        polys = single_reference([(0, 0), (100, 0)])
        with pytest.raises(ValueError):
            buffer_grow_match(polys, OsmRoadNetwork(frame="local"))

    def test_junction_configuration_matches_exhaustive_oracle(self):
        # Reference A-B with a nearby junction offering chains F-G, C-D,
        # C-E, D-E; the scored argmax must equal brute-force enumeration.
        polys = single_reference([(0, -1.75), (100, -1.75)])
        ref = polys[0]
        a, b = ref.geometry[0], ref.geometry[-1]
        net = make_network({
            1: [(a[0], a[1] + 1.0), (55.0, a[1] + 2.5)],        # F-G
            2: [(55.0, a[1] + 2.5), (b[0], b[1] + 1.5)],        # C-D
            3: [(55.0, a[1] + 2.5), (60.0, a[1] - 2.0)],        # C-E
            4: [(b[0], b[1] + 1.5), (60.0, a[1] - 2.0)],        # D-E
        })
        params = MatchParams(accept_threshold=0.3)
        (res,) = buffer_grow_match(polys, net, params)
        assert res.matched

        expected = _oracle_best(ref, net, params)
        assert res.similarity == pytest.approx(expected[0], abs=1e-12)
        assert res.chain_nodes == expected[1]

    def test_reference_used_once_osm_reused(self):
        mb = MapBuilder()
        mb.lane_section((0, 0), (100, 0), 1, 0)
        mb.lane_section((0, 4), (100, 4), 1, 0)
        graph = collapse_lanelets(mb.map)
        polys = build_reference_polylines(graph)
        assert len(polys) == 2
        net = make_network({7: [(0, 0), (100, 0)]})
        results = buffer_grow_match(polys, net,
                                    MatchParams(accept_threshold=0.5))
        assert len(results) == 2
        assert {r.reference_id for r in results} == {0, 1}
        # the single OSM way may serve both references
        assert all(r.chain_way_ids == [7] for r in results if r.matched)
        assert sum(1 for r in results if r.matched) == 2


def _corridor_contains(ref_xy, seg_a, seg_b, width):
    ts = np.linspace(0.0, 1.0, 33)
    pts = np.outer(1 - ts, seg_a) + np.outer(ts, seg_b)
    from mapweld.align import min_distances_to_polyline
    return bool(min_distances_to_polyline(pts, ref_xy).max() <= width)


def _oracle_best(ref, net, params):
    """Independent exhaustive enumeration + scoring.

    Corridor membership via sampled point-to-polyline distances, chains
    via DFS over all simple paths between non-through nodes.
    """
    width = params.buffer_init
    for _ in range(params.max_retries + 1):
        edges = []
        for wid in sorted(net.ways):
            refs = net.ways[wid].node_ids
            for u, v in zip(refs, refs[1:]):
                if _corridor_contains(ref.geometry,
                                      np.array(net.node_xy(u)),
                                      np.array(net.node_xy(v)), width):
                    edges.append((u, v, wid))
        if edges:
            break
        width *= params.buffer_growth
    if not edges:
        return None

    adj = {}
    global_deg = {}
    for wid in sorted(net.ways):
        refs = net.ways[wid].node_ids
        for u, v in zip(refs, refs[1:]):
            global_deg[u] = global_deg.get(u, 0) + 1
            global_deg[v] = global_deg.get(v, 0) + 1
    for u, v, wid in edges:
        adj.setdefault(u, []).append((v, wid))
        adj.setdefault(v, []).append((u, wid))
    special = {n for n in adj
               if len(adj[n]) != 2 or global_deg.get(n, 0) != 2}
    if not special:
        special = {min(adj)}

    chains = []

    def walk(path, ways, used):
        cur = path[-1]
        if len(path) > 1 and cur in special:
            if tuple(reversed(path)) not in {tuple(c[0]) for c in chains}:
                chains.append((list(path), list(ways)))
        if len(path) >= params.max_chain_nodes:
            return
        for nxt, wid in sorted(adj.get(cur, ())):
            ekey = (min(cur, nxt), max(cur, nxt), wid)
            if ekey in used or nxt in path:
                continue
            walk(path + [nxt], ways + [wid], used | {ekey})

    for s in sorted(special):
        walk([s], [], set())

    best = None
    for nodes, ways in chains:
        xy = np.array([net.node_xy(n) for n in nodes])
        score, comps = similarity_score(ref.geometry, xy, params.weights)
        key = (-score, -comps["endpoint"], min(ways), tuple(nodes))
        if best is None or key < best[0]:
            best = (key, score, nodes)
    if best is None or best[1] <= params.accept_threshold:
        return None
    return best[1], best[2]


class TestSelfConflationOracle:
    def test_town_matches_its_own_centerlines_exactly(self, town_map):
        graph = collapse_lanelets(town_map)
        polys = build_reference_polylines(graph)
        net = local_osm_from_polylines(
            polys, lambda p: {"highway": "residential", "lanes": "2"})
        params = MatchParams()
        results = buffer_grow_match(polys, net, params)
        assert all(r.matched for r in results)
        assert all(r.similarity == pytest.approx(1.0) for r in results)
        for r, p in zip(results, polys):
            expected = _oracle_best(p, net, params)
            assert expected is not None
            assert r.chain_nodes == expected[1]
            assert r.similarity == pytest.approx(expected[0], abs=1e-12)
