"""Signal-plan generation and TSC preprocessing."""

from __future__ import annotations

import math

from tsa.netmodel.model import Junction, Phase, RoadNetwork, SignalPlan

# approaches whose axes differ by less than this share a green phase
AXIS_TOLERANCE_DEG = 30.0


def movement_groups(net: RoadNetwork, junction: Junction) -> list[list[str]]:
    """Cluster a junction's in-roads into opposing-approach groups.

    Approaches are grouped by the axis (heading mod 180 degrees) they arrive
    on, so the two arms of a straight street land in one group.  Groups are
    ordered by axis angle, in-roads within a group by id.
    """
    approaches = []
    for r in net.in_roads(junction.id):
        axis = math.degrees(r.heading_in()) % 180.0
        approaches.append((axis, r.id))
    approaches.sort()
    groups: list[tuple[float, list[str]]] = []
    for axis, rid in approaches:
        for g_axis, members in groups:
            diff = abs(axis - g_axis) % 180.0
            if min(diff, 180.0 - diff) < AXIS_TOLERANCE_DEG:
                members.append(rid)
                break
        else:
            groups.append((axis, [rid]))
    return [sorted(members) for _, members in groups]


def build_plan(net: RoadNetwork, junction: Junction, green_time: float,
               yellow_time: float = 0.0) -> SignalPlan | None:
    groups = movement_groups(net, junction)
    phases = []
    for members in groups:
        member_set = set(members)
        served = frozenset(m for m in junction.movements if m.in_road in member_set)
        if not served:
            continue
        phases.append(Phase(served, float(green_time), "green"))
        if yellow_time > 0:
            phases.append(Phase(frozenset(), float(yellow_time), "yellow"))
    return SignalPlan(tuple(phases)) if phases else None


def configure_traffic_signals(net: RoadNetwork, green_time: float = 30.0,
                              yellow_time: float = 3.0) -> RoadNetwork:
    """Attach a fixed-time plan to every junction with at least three streets.

    Lower-degree junctions lose any plan they had and stay unsignalized.
    """
    if not green_time > 0:
        raise ValueError("green_time must be positive")
    if yellow_time < 0:
        raise ValueError("yellow_time must be nonnegative")
    out = []
    for j in net.junctions:
        plan = None
        if net.degree(j.id) >= 3 and j.movements:
            plan = build_plan(net, j, green_time, yellow_time)
        out.append(Junction(j.id, j.position, j.movements, plan, j.neighbors))
    return net.with_junctions(out)


def preprocess_for_tsc(net: RoadNetwork) -> RoadNetwork:
    """Drop every yellow phase; green phases are kept in order, untouched."""
    out = []
    for j in net.junctions:
        plan = j.signal_plan
        if plan is not None and any(p.kind == "yellow" for p in plan.phases):
            plan = SignalPlan(tuple(p for p in plan.phases if p.kind != "yellow"))
            j = Junction(j.id, j.position, j.movements, plan, j.neighbors)
        out.append(j)
    return net.with_junctions(out)
