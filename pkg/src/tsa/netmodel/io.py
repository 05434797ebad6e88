"""Versioned JSON serialization of RoadNetwork."""

from __future__ import annotations

import json

from tsa.errors import ParseError
from tsa.netmodel.model import (
    NETWORK_SCHEMA_VERSION,
    Aoi,
    Junction,
    Movement,
    Phase,
    Road,
    RoadNetwork,
    SignalPlan,
)


def network_to_dict(net: RoadNetwork) -> dict:
    junctions = []
    for j in net.junctions:
        plan = None
        if j.signal_plan is not None:
            plan = {
                "cycle": j.signal_plan.cycle,
                "phases": [{"kind": p.kind, "duration": p.duration,
                            "served": sorted([m.in_road, m.out_road] for m in p.served)}
                           for p in j.signal_plan.phases],
            }
        junctions.append({
            "id": j.id,
            "position": list(j.position),
            "movements": [[m.in_road, m.out_road, m.turn] for m in j.movements],
            "signal_plan": plan,
            "neighbors": list(j.neighbors),
        })
    roads = [{
        "id": r.id, "from": r.from_junction, "to": r.to_junction, "length": r.length,
        "lanes": r.lanes, "speed_limit": r.speed_limit, "shape": [list(p) for p in r.shape],
        "reverse": r.reverse,
    } for r in net.roads]
    aois = [{
        "id": a.id, "kind": a.kind, "attached_road": a.attached_road,
        "attractiveness": a.attractiveness, "capacity": a.capacity, "position": list(a.position),
    } for a in net.aois]
    return {"version": NETWORK_SCHEMA_VERSION, "junctions": junctions, "roads": roads,
            "aois": aois, "meta": dict(net.meta)}


def network_from_dict(doc: dict) -> RoadNetwork:
    if not isinstance(doc, dict) or doc.get("version") != NETWORK_SCHEMA_VERSION:
        raise ParseError("unsupported network document version")
    try:
        roads = tuple(Road(r["id"], r["from"], r["to"], r["length"], r["lanes"], r["speed_limit"],
                           tuple(tuple(p) for p in r["shape"]), r["reverse"])
                      for r in doc["roads"])
        junctions = []
        for j in doc["junctions"]:
            moves = tuple(Movement(a, b, t) for a, b, t in j["movements"])
            by_key = {m.key: m for m in moves}
            plan = None
            if j["signal_plan"] is not None:
                plan = SignalPlan(tuple(
                    Phase(frozenset(by_key[(a, b)] for a, b in p["served"]), p["duration"], p["kind"])
                    for p in j["signal_plan"]["phases"]))
            junctions.append(Junction(j["id"], tuple(j["position"]), moves, plan,
                                      tuple(j["neighbors"])))
        aois = tuple(Aoi(a["id"], a["kind"], a["attached_road"], a["attractiveness"],
                         a["capacity"], tuple(a["position"])) for a in doc["aois"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed network document: {exc!r}") from exc
    return RoadNetwork(tuple(junctions), roads, aois, dict(doc.get("meta", {}))).validate()


def dumps_network(net: RoadNetwork) -> str:
    return json.dumps(network_to_dict(net), sort_keys=True, separators=(",", ":"))


def loads_network(text: str) -> RoadNetwork:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return network_from_dict(doc)


def network_summary(net: RoadNetwork) -> dict:
    return {
        "junctions": len(net.junctions),
        "roads": len(net.roads),
        "aois": len(net.aois),
        "signalized": len(net.signalized_junctions),
        "region": net.meta.get("region", ""),
    }
