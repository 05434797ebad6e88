"""Deterministic synthetic grid networks."""

from __future__ import annotations

from tsa.netmodel.model import (
    Aoi,
    Junction,
    Road,
    RoadNetwork,
    all_movements,
    neighbors_of,
)
from tsa.netmodel.signals import configure_traffic_signals

_SIDES = {"N": (0.0, 1.0), "S": (0.0, -1.0), "W": (-1.0, 0.0), "E": (1.0, 0.0)}


def junction_id(r: int, c: int) -> str:
    return f"J{r}_{c}"


def build_grid_network(rows: int, cols: int, edge_length: float = 200.0, lanes: int = 1,
                       speed_limit: float = 13.89, green_time: float = 30.0,
                       gates: bool = False) -> RoadNetwork:
    """Build a ``rows`` x ``cols`` grid with boundary stubs on the perimeter.

    Row 0 is the northern edge.  Every street is two directed roads; stubs
    leading off the map have the same length as internal edges.  Each junction
    gets all non-U-turn movements and a two-phase (east-west, north-south)
    green plan of ``green_time`` seconds per phase.

    With ``gates=True`` an AOI of kind ``other`` is attached to every inbound
    stub so demand can enter and leave at the map edge.
    """
    if min(rows, cols, lanes) < 1 or edge_length <= 0 or speed_limit <= 0:
        raise ValueError("grid parameters must be positive")
    L = float(edge_length)
    pos = {junction_id(r, c): (c * L, (rows - 1 - r) * L) for r in range(rows) for c in range(cols)}

    roads: list[Road] = []

    def street(a: str, b: str, pa, pb, a_j: str | None, b_j: str | None):
        fwd, bwd = f"{a}>{b}", f"{b}>{a}"
        roads.append(Road(fwd, a_j, b_j, L, lanes, speed_limit, (pa, pb), bwd))
        roads.append(Road(bwd, b_j, a_j, L, lanes, speed_limit, (pb, pa), fwd))

    for r in range(rows):
        for c in range(cols):
            j = junction_id(r, c)
            if c + 1 < cols:
                k = junction_id(r, c + 1)
                street(j, k, pos[j], pos[k], j, k)
            if r + 1 < rows:
                k = junction_id(r + 1, c)
                street(j, k, pos[j], pos[k], j, k)

    gate_aois = []
    for r in range(rows):
        for c in range(cols):
            j = junction_id(r, c)
            sides = []
            if r == 0:
                sides.append("N")
            if r == rows - 1:
                sides.append("S")
            if c == 0:
                sides.append("W")
            if c == cols - 1:
                sides.append("E")
            for side in sides:
                dx, dy = _SIDES[side]
                x, y = pos[j]
                edge = (x + dx * L, y + dy * L)
                b = f"{j}.{side}"
                # inbound first so the gate AOI attaches to the entry road
                street(b, j, edge, pos[j], None, j)
                if gates:
                    mid = (x + dx * L / 2, y + dy * L / 2)
                    gate_aois.append(Aoi(f"gate.{b}", "other", f"{b}>{j}", 1.0, None, mid))

    road_by_id = {r.id: r for r in roads}
    junctions = []
    for jid in sorted(pos):
        ins = [rd for rd in roads if rd.to_junction == jid]
        outs = [rd for rd in roads if rd.from_junction == jid]
        junctions.append(Junction(jid, pos[jid], all_movements(ins, outs), None,
                                  neighbors_of(jid, roads)))
    assert len(road_by_id) == len(roads)
    net = RoadNetwork(tuple(junctions), tuple(sorted(roads, key=lambda r: r.id)),
                      tuple(gate_aois),
                      {"region": f"grid{rows}x{cols}", "source": "grid",
                       "edge_length": repr(L)})
    net = configure_traffic_signals(net, green_time, 0.0)
    return net.validate()
