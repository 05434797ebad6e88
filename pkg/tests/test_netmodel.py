import json
import logging
import math

import pytest
from hypothesis import given, settings, strategies as st

from tsa.errors import EmptyNetwork, MalformedGazetteer, ParseError, UnknownRegion
from tsa.netmodel import (
    BoundingBox,
    build_grid_network,
    configure_traffic_signals,
    dumps_network,
    generate_basic_map,
    geocode,
    ingest_geojson,
    loads_network,
    preprocess_for_tsc,
)
from tsa.netmodel.model import connected_components


@pytest.fixture
def gazetteer(tmp_path):
    p = tmp_path / "gaz.json"
    p.write_text(json.dumps({"yizhuang": [116.48, 39.77, 116.56, 39.82]}))
    return p


def line(fid, coords, **props):
    props.setdefault("highway", "residential")
    return {"type": "Feature", "id": fid, "properties": props,
            "geometry": {"type": "LineString", "coordinates": coords}}


def collection(*features):
    return json.dumps({"type": "FeatureCollection", "features": list(features)})


# -- geocode ---------------------------------------------------------------

def test_geocode_returns_stored_box(gazetteer):
    assert geocode("yizhuang", gazetteer) == BoundingBox(116.48, 39.77, 116.56, 39.82)


def test_geocode_normalizes_name(gazetteer):
    assert geocode("  Yizhuang ", gazetteer) == geocode("yizhuang", gazetteer)


def test_geocode_unknown_region(gazetteer):
    with pytest.raises(UnknownRegion):
        geocode("atlantis", gazetteer)


@pytest.mark.parametrize("content", ["not json", "[1, 2]", '{"x": [1, 2, 3]}', '{"x": [2, 2, 1, 3]}'])
def test_geocode_malformed_gazetteer(tmp_path, content):
    p = tmp_path / "bad.json"
    p.write_text(content)
    with pytest.raises(MalformedGazetteer):
        geocode("x", p)


# -- grid ------------------------------------------------------------------

def expected_directed_roads(rows, cols):
    internal = rows * (cols - 1) + cols * (rows - 1)
    stubs = 2 * (rows + cols)
    return 2 * (internal + stubs)


@pytest.mark.parametrize("rows,cols,roads", [(1, 1, 8), (2, 2, 24), (1, 2, 14)])
def test_grid_examples(rows, cols, roads):
    net = build_grid_network(rows, cols, 200, 1, 13.89)
    assert len(net.junctions) == rows * cols
    assert len(net.roads) == roads


@pytest.mark.parametrize("rows", range(1, 7))
@pytest.mark.parametrize("cols", range(1, 7))
def test_grid_counts_follow_formula(rows, cols):
    net = build_grid_network(rows, cols)
    assert len(net.junctions) == rows * cols
    assert len(net.roads) == expected_directed_roads(rows, cols)
    boundary = [r for r in net.roads if r.from_junction is None or r.to_junction is None]
    assert len(boundary) == 2 * 2 * (rows + cols)
    for j in net.junctions:
        # 4 approaches, 3 non-U-turn exits each
        assert len(j.movements) == 12
        plan = j.signal_plan
        assert [p.kind for p in plan.phases] == ["green", "green"]
        assert plan.cycle == 60.0


def test_grid_plan_splits_east_west_and_north_south():
    net = build_grid_network(1, 1)
    j = net.junctions[0]
    ew, ns = j.signal_plan.phases
    assert {m.in_road for m in ew.served} == {"J0_0.W>J0_0", "J0_0.E>J0_0"}
    assert {m.in_road for m in ns.served} == {"J0_0.N>J0_0", "J0_0.S>J0_0"}


def test_grid_turns_classified():
    net = build_grid_network(1, 1)
    j = net.junctions[0]
    turns = {(m.in_road, m.out_road): m.turn for m in j.movements}
    # travelling east (entering from W): north exit is a left turn
    assert turns[("J0_0.W>J0_0", "J0_0>J0_0.N")] == "left"
    assert turns[("J0_0.W>J0_0", "J0_0>J0_0.E")] == "straight"
    assert turns[("J0_0.W>J0_0", "J0_0>J0_0.S")] == "right"


def test_grid_neighbors():
    net = build_grid_network(2, 2)
    assert net.junction("J0_0").neighbors == ("J0_1", "J1_0")


# -- signals ---------------------------------------------------------------

def test_configure_four_way_with_yellow():
    net = configure_traffic_signals(build_grid_network(1, 1), 30, 3)
    plan = net.junctions[0].signal_plan
    assert [p.kind for p in plan.phases] == ["green", "yellow", "green", "yellow"]
    assert plan.cycle == 2 * 30 + 2 * 3


def test_configure_zero_yellow():
    plan = configure_traffic_signals(build_grid_network(1, 1), 30, 0).junctions[0].signal_plan
    assert [p.kind for p in plan.phases] == ["green", "green"]
    assert plan.cycle == 60


def test_pass_through_junction_is_unsignalized():
    net = ingest_geojson(collection(line(1, [[116.0, 39.0], [116.001, 39.0]]),
                                    line(2, [[116.001, 39.0], [116.002, 39.0]])))
    net = configure_traffic_signals(net, 30, 3)
    assert [j.signal_plan for j in net.junctions] == [None]


def test_preprocess_removes_yellow():
    net = preprocess_for_tsc(configure_traffic_signals(build_grid_network(1, 1), 30, 3))
    plan = net.junctions[0].signal_plan
    assert [(p.kind, p.duration) for p in plan.phases] == [("green", 30), ("green", 30)]
    assert plan.cycle == 60


def test_preprocess_keeps_served_movements():
    before = configure_traffic_signals(build_grid_network(2, 2), 30, 3)
    after = preprocess_for_tsc(before)
    for jb, ja in zip(before.junctions, after.junctions):
        greens = [p for p in jb.signal_plan.phases if p.kind == "green"]
        assert list(ja.signal_plan.phases) == greens


def test_preprocess_yellow_free_identity_and_unsignalized():
    net = build_grid_network(2, 3)
    assert preprocess_for_tsc(net).junctions == net.junctions
    pt = ingest_geojson(collection(line(1, [[0, 0], [0.001, 0]]), line(2, [[0.001, 0], [0.002, 0]])))
    assert preprocess_for_tsc(pt).junctions == pt.junctions


@given(green=st.integers(1, 120), yellow=st.integers(0, 10), rows=st.integers(1, 3), cols=st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_configure_then_preprocess_cycle(green, yellow, rows, cols):
    net = configure_traffic_signals(build_grid_network(rows, cols), green, yellow)
    once = preprocess_for_tsc(net)
    twice = preprocess_for_tsc(once)
    assert twice.junctions == once.junctions
    for j in once.junctions:
        kinds = [p.kind for p in j.signal_plan.phases]
        assert "yellow" not in kinds
        assert j.signal_plan.cycle == len(kinds) * green


# -- geojson ---------------------------------------------------------------

def test_geojson_two_lines_share_endpoint():
    net = ingest_geojson(collection(line(1, [[116.0, 39.0], [116.001, 39.0]]),
                                    line(2, [[116.001, 39.0], [116.001, 39.001]])))
    assert len(net.junctions) == 1
    ends = [r for r in net.roads if r.from_junction is None or r.to_junction is None]
    assert len(net.roads) == 4
    # each street has one boundary end, shared by its two directions
    assert len({r.shape[0] if r.from_junction is None else r.shape[-1] for r in ends}) == 2


def test_geojson_length_from_geometry():
    net = ingest_geojson(collection(line(1, [[0.0, 0.0], [0.0, 0.001]]),))
    # one thousandth of a degree of latitude, mean earth radius
    assert net.roads[0].length == pytest.approx(6371008.8 * math.pi / 180 * 0.001, rel=1e-9)
    assert net.roads[0].lanes == 1
    assert net.roads[0].speed_limit == 13.89


def test_geojson_tags():
    net = ingest_geojson(collection(line(1, [[0.0, 0.0], [0.001, 0.0]], lanes="4", maxspeed="60"),
                                    line(2, [[0.001, 0.0], [0.002, 0.0]], oneway="yes")))
    r1 = net.road("w1:f")
    assert r1.lanes == 2 and r1.speed_limit == pytest.approx(60 / 3.6)
    assert "w2:r" not in net.road_index


def test_geojson_empty():
    with pytest.raises(EmptyNetwork):
        ingest_geojson(collection())


@pytest.mark.parametrize("doc", ["{", '{"type": "Feature"}', '{"type": "FeatureCollection", "features": 3}'])
def test_geojson_parse_errors(doc):
    with pytest.raises(ParseError):
        ingest_geojson(doc)


def test_geojson_zero_length_skipped(caplog):
    with caplog.at_level(logging.WARNING):
        net = ingest_geojson(collection(line(1, [[0.0, 0.0], [0.0, 0.0]]),
                                        line(2, [[0.0, 0.0], [0.001, 0.0]])))
    assert len(net.roads) == 2
    assert "zero-length" in caplog.text
    assert net.meta["skipped_features"] == "1"


def test_geojson_aoi_attaches_nearest_road():
    feats = [line(1, [[0.0, 0.0], [0.001, 0.0]]), line(2, [[0.001, 0.0], [0.001, 0.001]]),
             {"type": "Feature", "id": 9, "properties": {"amenity": "hospital", "beds": 12},
              "geometry": {"type": "Point", "coordinates": [0.00105, 0.0008]}}]
    net = ingest_geojson(collection(*feats))
    (aoi,) = net.aois
    assert aoi.kind == "hospital" and aoi.capacity == 12
    # both directions of street 2 are equally near; lower id wins
    assert aoi.attached_road == "w2:f"


def test_geojson_drops_disconnected_component():
    net = ingest_geojson(collection(line(1, [[0.0, 0.0], [0.001, 0.0]]),
                                    line(2, [[0.001, 0.0], [0.002, 0.0]]),
                                    line(3, [[1.0, 1.0], [1.001, 1.0]])))
    assert {r.id[:2] for r in net.roads} == {"w1", "w2"}


points = st.tuples(st.integers(0, 4), st.integers(0, 4))


@given(st.lists(st.tuples(points, points), min_size=1, max_size=8),
       st.lists(points, max_size=3))
@settings(max_examples=80, deadline=None)
def test_geojson_random_collections_satisfy_invariants(segments, aoi_pts):
    feats = [line(i, [[a[0] * 1e-3, a[1] * 1e-3], [b[0] * 1e-3, b[1] * 1e-3]])
             for i, (a, b) in enumerate(segments)]
    feats += [{"type": "Feature", "id": 100 + i, "properties": {"landuse": "residential"},
               "geometry": {"type": "Point", "coordinates": [p[0] * 1e-3, p[1] * 1e-3]}}
              for i, p in enumerate(aoi_pts)]
    try:
        net = ingest_geojson(collection(*feats))
    except EmptyNetwork:
        assert all(a == b for a, b in segments)
        return
    net.validate()
    assert len(connected_components(net)) == 1
    signalized = configure_traffic_signals(net, 20, 2)
    signalized.validate()


# -- serialization / pipeline ---------------------------------------------

def test_network_round_trip_is_exact():
    net = configure_traffic_signals(build_grid_network(2, 3, gates=True), 25, 3)
    text = dumps_network(net)
    assert dumps_network(loads_network(text)) == text
    assert set(json.loads(text)) == {"version", "junctions", "roads", "aois", "meta"}


def test_generate_basic_map_uses_offline_extract(gazetteer):
    net = generate_basic_map("Yizhuang", gazetteer)
    assert net.meta["region"] == "Yizhuang"
    assert len(net.junctions) == 9
    assert any(a.kind == "hospital" for a in net.aois)
    assert all(j.signal_plan is not None for j in net.junctions)
