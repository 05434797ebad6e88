"""Static road-network types.

All types are frozen dataclasses so a built network can be shared freely
between threads and simulation instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable

from tsa.errors import InvalidNetwork

NETWORK_SCHEMA_VERSION = 1

TURNS = ("left", "straight", "right")
PHASE_KINDS = ("green", "yellow")
AOI_KINDS = ("residential", "workplace", "commercial", "hospital", "other")

Point = tuple[float, float]


@dataclass(frozen=True, order=True)
class Movement:
    in_road: str
    out_road: str
    turn: str = "straight"

    def __post_init__(self):
        if self.in_road == self.out_road:
            raise InvalidNetwork(f"movement loops on road {self.in_road}")
        if self.turn not in TURNS:
            raise InvalidNetwork(f"unknown turn {self.turn!r}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.in_road, self.out_road)


@dataclass(frozen=True)
class Phase:
    served: frozenset[Movement]
    duration: float
    kind: str = "green"

    def __post_init__(self):
        if self.duration <= 0:
            raise InvalidNetwork("phase duration must be positive")
        if self.kind not in PHASE_KINDS:
            raise InvalidNetwork(f"unknown phase kind {self.kind!r}")
        if self.kind == "yellow" and self.served:
            raise InvalidNetwork("yellow phases serve no movements")

    def serves(self, movement: Movement) -> bool:
        return movement in self.served


@dataclass(frozen=True)
class SignalPlan:
    phases: tuple[Phase, ...]

    @property
    def cycle(self) -> float:
        return math.fsum(p.duration for p in self.phases)

    @property
    def green_indices(self) -> list[int]:
        return [i for i, p in enumerate(self.phases) if p.kind == "green"]


@dataclass(frozen=True)
class Junction:
    id: str
    position: Point
    movements: tuple[Movement, ...] = ()
    signal_plan: SignalPlan | None = None
    neighbors: tuple[str, ...] = ()

    @property
    def signalized(self) -> bool:
        return self.signal_plan is not None


@dataclass(frozen=True)
class Road:
    """A directed road. ``None`` at either end marks the network boundary."""

    id: str
    from_junction: str | None
    to_junction: str | None
    length: float
    lanes: int = 1
    speed_limit: float = 13.89
    shape: tuple[Point, ...] = ()
    reverse: str | None = None

    def __post_init__(self):
        if not self.length > 0 or not math.isfinite(self.length):
            raise InvalidNetwork(f"road {self.id} has non-positive length")
        if self.lanes < 1:
            raise InvalidNetwork(f"road {self.id} needs at least one lane")
        if not self.speed_limit > 0:
            raise InvalidNetwork(f"road {self.id} has non-positive speed limit")

    @property
    def free_flow_time(self) -> float:
        return self.length / self.speed_limit

    def heading_in(self) -> float:
        """Direction of travel (radians) where the road enters its end node."""
        (x0, y0), (x1, y1) = self.shape[-2], self.shape[-1]
        return math.atan2(y1 - y0, x1 - x0)

    def heading_out(self) -> float:
        (x0, y0), (x1, y1) = self.shape[0], self.shape[1]
        return math.atan2(y1 - y0, x1 - x0)


@dataclass(frozen=True)
class Aoi:
    id: str
    kind: str
    attached_road: str
    attractiveness: float = 1.0
    capacity: int | None = None
    position: Point = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in AOI_KINDS:
            raise InvalidNetwork(f"unknown AOI kind {self.kind!r}")
        if self.attractiveness < 0:
            raise InvalidNetwork("AOI attractiveness must be nonnegative")
        if (self.capacity is not None) != (self.kind == "hospital"):
            raise InvalidNetwork(f"AOI {self.id}: capacity present iff kind is hospital")


@dataclass(frozen=True)
class BoundingBox:
    min_lon: float
    min_lat: float
    max_lon: float
    max_lat: float

    def __post_init__(self):
        if not (self.min_lon < self.max_lon and self.min_lat < self.max_lat):
            raise InvalidNetwork("bounding box needs min < max on both axes")

    def as_list(self) -> list[float]:
        return [self.min_lon, self.min_lat, self.max_lon, self.max_lat]

    def contains(self, lon: float, lat: float) -> bool:
        return self.min_lon <= lon <= self.max_lon and self.min_lat <= lat <= self.max_lat


@dataclass(frozen=True)
class RoadNetwork:
    junctions: tuple[Junction, ...]
    roads: tuple[Road, ...]
    aois: tuple[Aoi, ...] = ()
    meta: dict = field(default_factory=dict, compare=False, hash=False)

    # lookups -----------------------------------------------------------
    @cached_property
    def road_index(self) -> dict[str, Road]:
        return {r.id: r for r in self.roads}

    @cached_property
    def junction_index(self) -> dict[str, Junction]:
        return {j.id: j for j in self.junctions}

    @cached_property
    def aoi_index(self) -> dict[str, Aoi]:
        return {a.id: a for a in self.aois}

    @cached_property
    def _in_roads(self) -> dict[str, list[Road]]:
        out: dict[str, list[Road]] = {j.id: [] for j in self.junctions}
        for r in self.roads:
            if r.to_junction is not None and r.to_junction in out:
                out[r.to_junction].append(r)
        return out

    @cached_property
    def _out_roads(self) -> dict[str, list[Road]]:
        out: dict[str, list[Road]] = {j.id: [] for j in self.junctions}
        for r in self.roads:
            if r.from_junction is not None and r.from_junction in out:
                out[r.from_junction].append(r)
        return out

    def road(self, road_id: str) -> Road:
        return self.road_index[road_id]

    def junction(self, junction_id: str) -> Junction:
        return self.junction_index[junction_id]

    def in_roads(self, junction_id: str) -> list[Road]:
        return self._in_roads[junction_id]

    def out_roads(self, junction_id: str) -> list[Road]:
        return self._out_roads[junction_id]

    def degree(self, junction_id: str) -> int:
        """Number of distinct incident streets (a two-way street counts once)."""
        seen = set()
        for r in self.in_roads(junction_id) + self.out_roads(junction_id):
            seen.add(min(r.id, r.reverse) if r.reverse else r.id)
        return len(seen)

    @property
    def signalized_junctions(self) -> list[Junction]:
        return [j for j in self.junctions if j.signal_plan is not None]

    def total_lane_km(self) -> float:
        return sum(r.length * r.lanes for r in self.roads) / 1000.0

    def successors(self, road_id: str) -> list[str]:
        """Roads reachable from the end of ``road_id`` via a junction movement."""
        return self._successors.get(road_id, [])

    @cached_property
    def _successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {}
        for j in self.junctions:
            for m in j.movements:
                succ.setdefault(m.in_road, []).append(m.out_road)
        for k in succ:
            succ[k].sort()
        return succ

    def movement(self, in_road: str, out_road: str) -> Movement | None:
        return self._movement_index.get((in_road, out_road))

    @cached_property
    def _movement_index(self) -> dict[tuple[str, str], Movement]:
        return {m.key: m for j in self.junctions for m in j.movements}

    # AOI access roads ----------------------------------------------------
    def origin_road(self, aoi_id: str) -> str:
        """Road a trip starting at the AOI departs on.

        An AOI attached to a road that exits the network departs on its
        reverse twin instead, so boundary gates work as origins.
        """
        road = self.road(self.aoi_index[aoi_id].attached_road)
        if road.to_junction is None and road.reverse and road.reverse in self.road_index:
            return road.reverse
        return road.id

    def destination_road(self, aoi_id: str) -> str:
        road = self.road(self.aoi_index[aoi_id].attached_road)
        if road.from_junction is None and road.reverse and road.reverse in self.road_index:
            return road.reverse
        return road.id

    # maintenance ---------------------------------------------------------
    def with_junctions(self, junctions: Iterable[Junction]) -> "RoadNetwork":
        return replace(self, junctions=tuple(junctions), meta=dict(self.meta))

    def validate(self) -> "RoadNetwork":
        """Check every structural invariant; returns self so calls can chain."""
        jids = self.junction_index
        if len(jids) != len(self.junctions):
            raise InvalidNetwork("duplicate junction ids")
        if len(self.road_index) != len(self.roads):
            raise InvalidNetwork("duplicate road ids")
        if len(self.aoi_index) != len(self.aois):
            raise InvalidNetwork("duplicate AOI ids")
        for r in self.roads:
            for end in (r.from_junction, r.to_junction):
                if end is not None and end not in jids:
                    raise InvalidNetwork(f"road {r.id} references unknown junction {end}")
            if r.reverse is not None and r.reverse not in self.road_index:
                raise InvalidNetwork(f"road {r.id} has dangling reverse {r.reverse}")
        for j in self.junctions:
            keys = [m.key for m in j.movements]
            if len(set(keys)) != len(keys):
                raise InvalidNetwork(f"junction {j.id} has duplicate movements")
            in_ids = {r.id for r in self.in_roads(j.id)}
            out_ids = {r.id for r in self.out_roads(j.id)}
            for m in j.movements:
                if m.in_road not in in_ids or m.out_road not in out_ids:
                    raise InvalidNetwork(f"junction {j.id}: movement {m.key} not incident")
            expected_nb = tuple(sorted({r.to_junction for r in self.out_roads(j.id)
                                        if r.to_junction is not None}))
            if tuple(j.neighbors) != expected_nb:
                raise InvalidNetwork(f"junction {j.id}: neighbors {j.neighbors} != {expected_nb}")
            if j.signal_plan is not None:
                plan = j.signal_plan
                if not plan.green_indices:
                    raise InvalidNetwork(f"junction {j.id}: plan has no green phase")
                movs = set(j.movements)
                served = set()
                for p in plan.phases:
                    if not p.served <= movs:
                        raise InvalidNetwork(f"junction {j.id}: plan serves unknown movement")
                    served |= p.served
                if served != movs:
                    raise InvalidNetwork(f"junction {j.id}: some movements never served")
        for a in self.aois:
            if a.attached_road not in self.road_index:
                raise InvalidNetwork(f"AOI {a.id} attached to unknown road")
        if len(connected_components(self)) > 1:
            raise InvalidNetwork("road graph is not weakly connected")
        return self


def connected_components(net: RoadNetwork) -> list[set[str]]:
    """Weak components over junction ids; junction-less roads are their own nodes."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a: str, b: str) -> None:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for j in net.junctions:
        parent[j.id] = j.id
    for r in net.roads:
        ends = [e for e in (r.from_junction, r.to_junction) if e is not None]
        if not ends:
            # a free-standing street: it and its twin form one node
            node = "road:" + (min(r.id, r.reverse) if r.reverse else r.id)
            parent.setdefault(node, node)
            ends = [node]
        for e in ends[1:]:
            union(ends[0], e)
    groups: dict[str, set[str]] = {}
    for node in parent:
        groups.setdefault(find(node), set()).add(node)
    return sorted(groups.values(), key=lambda g: (-len(g), min(g)))


def turn_kind(in_heading: float, out_heading: float) -> str:
    delta = math.degrees(out_heading - in_heading)
    delta = (delta + 180.0) % 360.0 - 180.0
    if abs(delta) < 45.0:
        return "straight"
    return "left" if delta > 0 else "right"


def all_movements(net_roads_in: list[Road], net_roads_out: list[Road]) -> tuple[Movement, ...]:
    """Every in/out pair at a junction except the U-turn back onto the twin."""
    moves = []
    for rin in sorted(net_roads_in, key=lambda r: r.id):
        for rout in sorted(net_roads_out, key=lambda r: r.id):
            if rout.id == rin.id or rout.id == rin.reverse:
                continue
            moves.append(Movement(rin.id, rout.id, turn_kind(rin.heading_in(), rout.heading_out())))
    return tuple(moves)


def neighbors_of(junction_id: str, roads: Iterable[Road]) -> tuple[str, ...]:
    return tuple(sorted({r.to_junction for r in roads
                         if r.from_junction == junction_id and r.to_junction is not None}))
