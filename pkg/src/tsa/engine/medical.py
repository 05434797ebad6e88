"""Offline medical-service scenario: assigning patients to hospitals.

Travel times are free-flow route costs.  Under ``nearest`` every person
heads for the closest hospital; when it is full they are sent on from
there to the closest hospital that still has room, and the legs add up.
Under ``mass_benefit`` persons are taken in departure order and each is
sent straight to the quickest hospital with remaining capacity.  A person
is served when their total travel time stays within ``patience``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from tsa.demand.routing import RouteCache
from tsa.errors import NoHospital
from tsa.netmodel.model import RoadNetwork

STRATEGIES = ("nearest", "mass_benefit")
DEFAULT_PATIENCE = 3600.0


@dataclass
class MedicalReport:
    strategy: str
    serve_rate: float = 0.0
    att: float = 0.0
    score: float = 0.0
    served: int = 0
    total: int = 0
    assignments: dict | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("assignments")
        return d


def _hospitals(net: RoadNetwork):
    hs = sorted((a for a in net.aois if a.kind == "hospital" and (a.capacity or 0) > 0),
                key=lambda a: a.id)
    if not hs:
        raise NoHospital("network has no hospital with capacity")
    return hs


def _assign(net, persons, strategy, patience, cache):
    hospitals = _hospitals(net)
    left = {h.id: int(h.capacity) for h in hospitals}
    dest = {h.id: net.destination_road(h.id) for h in hospitals}

    def leg(from_road, hid):
        return cache.cost(from_road, dest[hid])

    def ranked(from_road, only_free):
        opts = []
        for h in hospitals:
            if only_free and left[h.id] <= 0:
                continue
            c = leg(from_road, h.id)
            if c is not None:
                opts.append((c, h.id))
        opts.sort()
        return opts

    out = {}
    for p in sorted(persons, key=lambda p: (p.departure_step or 0, p.id)):
        start = net.origin_road(p.origin) if p.origin in net.aoi_index else (p.route or [None])[0]
        if start is None:
            out[p.id] = (None, math.inf)
            continue
        if strategy == "mass_benefit":
            opts = ranked(start, True)
            if not opts:
                out[p.id] = (None, math.inf)
                continue
            cost, hid = opts[0]
        else:
            opts = ranked(start, False)
            if not opts:
                out[p.id] = (None, math.inf)
                continue
            cost, hid = opts[0]
            visited = {hid}
            while left[hid] <= 0:
                # full on arrival: continue from this hospital to the nearest one with room
                nxt = [(c, h) for c, h in ranked(dest[hid], True) if h not in visited]
                if not nxt:
                    hid = None
                    cost = math.inf
                    break
                c, hid = nxt[0]
                visited.add(hid)
                cost += c
        if hid is not None:
            left[hid] -= 1
        out[p.id] = (hid, cost)
    return out


def _report(strategy, assignment, patience) -> MedicalReport:
    total = len(assignment)
    times = [c for _, c in assignment.values() if c <= patience]
    served = len(times)
    return MedicalReport(strategy, served / total if total else 0.0,
                         math.fsum(times) / served if served else 0.0, 0.0, served, total,
                         {k: v[0] for k, v in assignment.items()})


def _z(values):
    arr = np.asarray(values, dtype=float)
    sd = arr.std()
    if sd == 0:
        return np.zeros_like(arr)
    return (arr - arr.mean()) / sd


def compare_medical(net: RoadNetwork, trips, patience: float = DEFAULT_PATIENCE) -> dict[str, MedicalReport]:
    """Run every strategy and attach the z-normalized score to each report.

    score = z(serve_rate) - z(att), with population standard deviation over
    the compared strategies; identical strategies all score 0.
    """
    persons = trips.persons if hasattr(trips, "persons") else list(trips)
    _hospitals(net)
    cache = RouteCache(net)
    reports = {s: _report(s, _assign(net, persons, s, patience, cache), patience)
               for s in STRATEGIES}
    zs = _z([r.serve_rate for r in reports.values()])
    za = _z([r.att for r in reports.values()])
    for r, a, b in zip(reports.values(), zs, za):
        r.score = float(a - b)
    return reports


def run_offline_medical(net: RoadNetwork, trips, strategy: str = "mass_benefit",
                        patience: float = DEFAULT_PATIENCE) -> MedicalReport:
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    return compare_medical(net, trips, patience)[strategy]
