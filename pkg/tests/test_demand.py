import json
import random
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_force_route, random_network
from tsa.demand import (
    DepartureCurve,
    OdMatrix,
    ProfileSpec,
    generate_od_matrix,
    generate_profiles,
    path_cost,
    route,
    sample_departures,
    synthesize_trips,
)
from tsa.demand.trips import TripTable
from tsa.errors import InconsistentCounts, InvalidSpec, TooFewAois, Unreachable
from tsa.netmodel import Aoi, Junction, Road, RoadNetwork, build_grid_network, ingest_geojson
from tsa.netmodel.model import all_movements, neighbors_of


# -- profiles ---------------------------------------------------------------

def test_profiles_empty():
    assert generate_profiles(0, ProfileSpec(), 1) == []


def test_profiles_gender_share():
    spec = ProfileSpec(gender_distribution={"female": 0.7, "male": 0.3})
    people = generate_profiles(10000, spec, seed=1)
    share = sum(p.gender == "female" for p in people) / len(people)
    assert abs(share - 0.7) <= 0.02


def test_profiles_deterministic():
    a = generate_profiles(500, ProfileSpec(), 9)
    b = generate_profiles(500, ProfileSpec(), 9)
    assert json.dumps([vars(p) for p in a], default=vars) == json.dumps([vars(p) for p in b], default=vars)
    assert a != generate_profiles(500, ProfileSpec(), 10)


def test_profiles_respect_ranges():
    spec = ProfileSpec(age_ranges=((35, 55, 1.0),), cons_ranges=((4, 7, 1.0),))
    people = generate_profiles(300, spec, 3)
    assert all(35 <= p.age <= 55 and 4 <= p.consumption <= 7 for p in people)


@pytest.mark.parametrize("spec", [
    ProfileSpec(gender_distribution={"female": 0.6, "male": 0.3}),
    ProfileSpec(age_ranges=((18, 40, 0.5), (30, 60, 0.5))),
    ProfileSpec(cons_ranges=((5, 3, 1.0),)),
])
def test_profiles_invalid_spec(spec):
    with pytest.raises(InvalidSpec):
        generate_profiles(5, spec, 0)


# -- departures -------------------------------------------------------------

def test_departures_empty():
    assert sample_departures(0, DepartureCurve(), 0, 100, 1) == []


def test_departures_uniform_mean():
    steps = sample_departures(10000, DepartureCurve("uniform"), 0, 100, seed=4)
    assert abs(np.mean(steps) - 50) <= 2
    assert steps == sorted(steps)


def test_departures_gaussian_clamped():
    curve = DepartureCurve("gaussian_peak", 27000, 3600, (28800.0,), (1800.0,))
    steps = sample_departures(5000, curve, 27000, 3600, seed=2)
    assert min(steps) >= 27000 and max(steps) < 30600
    # clamping piles up mass at the window edges
    assert steps.count(27000) > 0 and steps.count(30599) > 0


@given(n=st.integers(0, 300), start=st.integers(0, 1000), dur=st.integers(1, 500),
       kind=st.sampled_from(["uniform", "gaussian_peak", "bimodal"]), seed=st.integers(0, 99))
@settings(max_examples=60, deadline=None)
def test_departures_window_and_sorted(n, start, dur, kind, seed):
    curve = DepartureCurve(kind, start, dur, (start + dur / 3, start + dur), (dur / 5, dur / 2), (0.4, 0.6))
    steps = sample_departures(n, curve, seed=seed)
    assert len(steps) == n
    assert steps == sorted(steps)
    assert all(start <= s < start + dur for s in steps)


# -- OD ---------------------------------------------------------------------

def two_aoi_net():
    net = build_grid_network(1, 2)
    aois = (Aoi("A", "residential", "J0_0>J0_1", 1.0, None, (50.0, 0.0)),
            Aoi("B", "workplace", "J0_1>J0_0", 2.0, None, (150.0, 10.0)))
    return replace(net, aois=aois, meta={})


def test_od_two_aois():
    od = generate_od_matrix(two_aoi_net(), 50, seed=3)
    assert set(od.entries) <= {("A", "B"), ("B", "A")}
    assert od.entries.get(("A", "B"), 0) + od.entries.get(("B", "A"), 0) == 50


def test_od_empty_and_too_few():
    assert generate_od_matrix(two_aoi_net(), 0, 1).entries == {}
    net = replace(two_aoi_net(), aois=two_aoi_net().aois[:1])
    with pytest.raises(TooFewAois):
        generate_od_matrix(net, 10, 1)


def gate_net(rows=2, cols=3):
    return build_grid_network(rows, cols, gates=True)


def test_od_scaling_invariance():
    net = gate_net()
    doubled = replace(net, aois=tuple(replace(a, attractiveness=a.attractiveness * 2) for a in net.aois))
    for seed in range(5):
        assert generate_od_matrix(net, 400, seed).entries == generate_od_matrix(doubled, 400, seed).entries


@given(n=st.integers(0, 500), seed=st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_od_total_and_no_diagonal(n, seed):
    od = generate_od_matrix(gate_net(), n, seed)
    assert od.total == n
    assert all(o != d and c > 0 for (o, d), c in od.entries.items())


def test_od_gravity_prefers_near_pairs():
    net = gate_net(1, 4)
    od = generate_od_matrix(net, 20000, 0)
    near = od.entries.get(("gate.J0_0.N", "gate.J0_0.W"), 0)
    far = od.entries.get(("gate.J0_0.W", "gate.J0_3.E"), 0)
    assert near > 5 * far


# -- routing ----------------------------------------------------------------

def detour_fixture():
    pos = {"A": (0.0, 0.0), "B": (500.0, 0.0), "C": (250.0, 200.0), "D": (1000.0, 0.0), "E": (250.0, -300.0)}
    spec = [("A", "B", 500, 5.0),      # slow direct link
            ("A", "C", 320, 20.0), ("C", "B", 320, 20.0),   # fast detour
            ("B", "D", 500, 13.89), ("A", "E", 390, 10.0), ("E", "B", 390, 10.0)]
    roads = [Road("S>A", None, "A", 100, 1, 13.89, ((-100.0, 0.0), pos["A"]))]
    for a, b, length, v in spec:
        roads.append(Road(f"{a}>{b}", a, b, length, 1, v, (pos[a], pos[b])))
    juncs = []
    for j in sorted(pos):
        ins = [r for r in roads if r.to_junction == j]
        outs = [r for r in roads if r.from_junction == j]
        juncs.append(Junction(j, pos[j], all_movements(ins, outs), None, neighbors_of(j, roads)))
    return RoadNetwork(tuple(juncs), tuple(roads), (), {}).validate()


def test_route_same_road():
    net = gate_net()
    assert route(net, "J0_0>J0_1", "J0_0>J0_1") == ["J0_0>J0_1"]


def test_route_prefers_fast_detour():
    net = detour_fixture()
    path = route(net, "S>A", "B>D")
    assert path == ["S>A", "A>C", "C>B", "B>D"]
    assert brute_force_route(net, "S>A", "B>D") == (path_cost(net, path), tuple(path))


def test_route_unreachable():
    net = detour_fixture()
    with pytest.raises(Unreachable):
        route(net, "B>D", "S>A")


def test_route_matches_brute_force_on_random_graphs():
    rng = random.Random(7)
    checked = 0
    for _ in range(60):
        net = random_network(rng)
        for rid_a in [r.id for r in net.roads]:
            for rid_b in [r.id for r in net.roads]:
                oracle = brute_force_route(net, rid_a, rid_b)
                if oracle is None:
                    with pytest.raises(Unreachable):
                        route(net, rid_a, rid_b)
                else:
                    assert path_cost(net, route(net, rid_a, rid_b)) == oracle[0]
                    checked += 1
    assert checked > 200


# -- trip synthesis ---------------------------------------------------------

def trips_for(net, n=120, mode="unified", seed=5):
    od = generate_od_matrix(net, n, seed)
    profiles = generate_profiles(n, ProfileSpec(), seed)
    curve = DepartureCurve("uniform", 0, 600)
    return synthesize_trips(net, od, profiles, curve, mode, seed)


def test_trips_unified_params_identical():
    table = trips_for(gate_net())
    assert len({tuple(vars(p.driving).values()) for p in table.persons}) == 1


def test_trips_personalized_deterministic_and_age_monotone():
    net = gate_net()
    a, b = trips_for(net, mode="personalized"), trips_for(net, mode="personalized")
    assert a.to_jsonl() == b.to_jsonl()
    by_age = sorted(a.persons, key=lambda p: p.age)
    factors = [p.driving.desired_speed_factor for p in by_age]
    assert factors == sorted(factors, reverse=True)


def test_trips_routes_connect_od():
    net = gate_net()
    table = trips_for(net, 200)
    for p in table.persons:
        assert p.route[0] == net.origin_road(p.origin)
        assert p.route[-1] == net.destination_road(p.destination)
        for a, b in zip(p.route, p.route[1:]):
            assert b in net.successors(a)
        assert 0 <= p.departure_step < 600


def test_trips_inconsistent_counts():
    net = gate_net()
    with pytest.raises(InconsistentCounts):
        synthesize_trips(net, OdMatrix({("gate.J0_0.N", "gate.J0_0.W"): 3}),
                         generate_profiles(2), DepartureCurve())


def test_trips_unroutable_person_dropped():
    # street b is one-way into the boundary: an AOI on it can never reach another AOI
    fc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "id": 1, "properties": {"highway": "primary"},
         "geometry": {"type": "LineString", "coordinates": [[0.0, 0.0], [0.002, 0.0]]}},
        {"type": "Feature", "id": 2, "properties": {"highway": "primary"},
         "geometry": {"type": "LineString", "coordinates": [[0.002, 0.0], [0.004, 0.0]]}},
        {"type": "Feature", "id": 3, "properties": {"highway": "primary", "oneway": "yes"},
         "geometry": {"type": "LineString", "coordinates": [[0.002, 0.0], [0.002, -0.003]]}},
        {"type": "Feature", "id": 10, "properties": {"landuse": "residential"},
         "geometry": {"type": "Point", "coordinates": [0.0005, 0.0001]}},
        {"type": "Feature", "id": 11, "properties": {"office": "yes"},
         "geometry": {"type": "Point", "coordinates": [0.0035, 0.0001]}},
        {"type": "Feature", "id": 12, "properties": {"landuse": "residential"},
         "geometry": {"type": "Point", "coordinates": [0.0021, -0.0025]}},
    ]}
    net = ingest_geojson(json.dumps(fc))
    assert net.aoi_index["a12"].attached_road == "w3:f"
    od = OdMatrix({("a10", "a11"): 4, ("a12", "a10"): 1})
    table = synthesize_trips(net, od, generate_profiles(5, seed=1), DepartureCurve(), seed=1)
    assert table.dropped == 1
    assert table.persons_num == 4 == len(table.persons)


def test_trip_table_jsonl_round_trip():
    table = trips_for(gate_net(), 30)
    text = table.to_jsonl()
    assert TripTable.from_jsonl(text).to_jsonl() == text
    header = json.loads(text.splitlines()[0])
    assert header["seed"] == 5 and header["persons_num"] == len(table.persons)


def test_vehicles_num_assigns_walkers():
    net = gate_net()
    od = generate_od_matrix(net, 40, 2)
    table = synthesize_trips(net, od, generate_profiles(40, seed=2), DepartureCurve(), seed=2, vehicles_num=25)
    assert table.vehicles_num == 25 and table.persons_num == 40
    assert sum(p.mode == "walk" for p in table.persons) == 15
