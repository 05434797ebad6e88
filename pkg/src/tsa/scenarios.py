"""Reproducible benchmark scenarios used by the evaluation suite and CLI."""

from __future__ import annotations

from dataclasses import dataclass, replace

from tsa.demand import DepartureCurve, ProfileSpec, generate_od_matrix, generate_profiles, synthesize_trips
from tsa.demand.trips import TripTable
from tsa.netmodel import RoadNetwork, build_grid_network
from tsa.netmodel.model import SignalPlan

SATURATION_PER_LANE = 0.5


def entry_gates(net: RoadNetwork) -> list:
    return [a for a in net.aois if net.road(a.attached_road).from_junction is None]


def saturation_rate(net: RoadNetwork, per_lane: float = SATURATION_PER_LANE) -> float:
    """Vehicles per second the entry approaches can discharge under their plan.

    Each entry gate contributes its lanes times the per-lane saturation
    flow times the share of the cycle its approach is green.
    """
    total = 0.0
    for a in entry_gates(net):
        road = net.road(a.attached_road)
        j = net.junction(road.to_junction)
        plan: SignalPlan | None = j.signal_plan
        share = 1.0
        if plan is not None:
            green = sum(p.duration for p in plan.phases if any(m.in_road == road.id for m in p.served))
            share = green / plan.cycle
        total += road.lanes * per_lane * share
    return total


@dataclass
class Scenario:
    net: RoadNetwork
    trips: TripTable
    duration: int
    saturation: float
    demand_rate: float


def congested_grid(seed: int = 0, rows: int = 3, cols: int = 3, duration: int = 1800,
                   demand_ratio: float = 1.2, major_weight: float = 10.0, beta: float = 2.0,
                   edge_length: float = 200.0) -> Scenario:
    """Grid with gate demand at ``demand_ratio`` times entry saturation.

    East and west gates carry ``major_weight`` times the attractiveness of
    north and south gates, so the east-west approaches are the busy ones
    and an even fixed-time split under-serves them.
    """
    net = build_grid_network(rows, cols, edge_length, gates=True)
    aois = tuple(replace(a, attractiveness=major_weight if a.id[-1] in "WE" else 1.0)
                 for a in net.aois)
    net = replace(net, aois=aois, meta=dict(net.meta))
    sat = saturation_rate(net)
    n = int(round(demand_ratio * sat * duration))
    od = generate_od_matrix(net, n, seed, beta=beta)
    profiles = generate_profiles(n, ProfileSpec(), seed)
    curve = DepartureCurve("uniform", 0, duration)
    trips = synthesize_trips(net, od, profiles, curve, "unified", seed, beta=beta)
    return Scenario(net, trips, duration, sat, n / duration)
