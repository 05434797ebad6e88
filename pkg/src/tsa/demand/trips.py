"""Disaggregate an OD matrix into routed, timed individual trips."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from tsa.demand.departures import DepartureCurve, sample_departures
from tsa.demand.od import DEFAULT_BETA, OdMatrix, gravity_weights
from tsa.demand.profiles import DrivingParams, Person, personalized_driving
from tsa.demand.routing import RouteCache
from tsa.errors import InconsistentCounts, InvalidSpec, ParseError, Unreachable
from tsa.netmodel.model import RoadNetwork

log = logging.getLogger(__name__)

MAX_RESAMPLES = 10
WALK_SPEED = 1.4
DRIVING_MODES = ("unified", "personalized")


@dataclass
class TripTable:
    persons: list[Person] = field(default_factory=list)
    vehicles_num: int = 0
    persons_num: int = 0
    seed: int = 0
    dropped: int = 0
    spec_hash: str = ""

    @property
    def cars(self) -> list[Person]:
        return [p for p in self.persons if p.mode in ("car",)]

    def to_jsonl(self) -> str:
        header = {"kind": "header", "seed": self.seed, "spec_hash": self.spec_hash,
                  "persons_num": self.persons_num, "vehicles_num": self.vehicles_num,
                  "dropped": self.dropped}
        lines = [json.dumps(header, sort_keys=True)]
        for p in self.persons:
            lines.append(json.dumps(asdict(p), sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "TripTable":
        rows = [json.loads(line) for line in text.splitlines() if line.strip()]
        if not rows or rows[0].get("kind") != "header":
            raise ParseError("trip table must start with a header record")
        h = rows[0]
        persons = []
        for r in rows[1:]:
            r = dict(r)
            r["driving"] = DrivingParams(**r["driving"])
            persons.append(Person(**r))
        table = cls(persons, h["vehicles_num"], h["persons_num"], h["seed"], h.get("dropped", 0),
                    h.get("spec_hash", ""))
        if table.persons_num != len(persons):
            raise ParseError("header persons_num does not match body")
        return table

    def digest(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode()).hexdigest()


def synthesize_trips(net: RoadNetwork, od: OdMatrix, profiles: list[Person], curve: DepartureCurve,
                     driving_mode: str = "unified", seed: int = 0, vehicles_num: int | None = None,
                     spec_hash: str = "", beta: float = DEFAULT_BETA) -> TripTable:
    """Assign OD pairs, departures, routes and driving parameters to profiles.

    Pairs are shuffled before assignment so demographics and OD are
    independent.  A pair whose route does not exist keeps its origin and
    redraws the destination from the origin's gravity row, up to
    ``MAX_RESAMPLES`` times; after that the person is dropped and counted in
    ``TripTable.dropped``.  The first ``vehicles_num`` persons drive; the rest
    walk and are routed but never enter the car-following engine.
    """
    if driving_mode not in DRIVING_MODES:
        raise InvalidSpec(f"driving_mode must be one of {DRIVING_MODES}")
    n = len(profiles)
    if od.total != n:
        raise InconsistentCounts(f"OD total {od.total} != {n} profiles")
    vehicles_num = n if vehicles_num is None else vehicles_num
    if not 0 <= vehicles_num <= n:
        raise InconsistentCounts("vehicles_num must be within [0, persons_num]")
    if n == 0:
        return TripTable([], 0, 0, seed, 0, spec_hash)

    pairs = od.pairs()
    order = np.random.default_rng([seed, 41]).permutation(n)
    pairs = [pairs[i] for i in order]
    departures = sample_departures(n, curve, seed=seed)
    resample_rng = np.random.default_rng([seed, 42])
    routes = RouteCache(net)
    aois = sorted(net.aois, key=lambda a: a.id)
    rows: dict[str, tuple[list[str], np.ndarray]] = {}

    def redraw(origin: str) -> str:
        if origin not in rows:
            ps, w = gravity_weights(aois, beta)
            keep = [i for i, (o, _) in enumerate(ps) if o == origin]
            dest = [ps[i][1] for i in keep]
            ww = w[keep]
            rows[origin] = (dest, ww / ww.sum() if ww.sum() > 0 else np.full(len(ww), 1 / len(ww)))
        dest, p = rows[origin]
        return dest[int(resample_rng.choice(len(dest), p=p))]

    persons = []
    dropped = 0
    for i, (prof, (o, d), dep) in enumerate(zip(profiles, pairs, departures)):
        path = None
        for attempt in range(MAX_RESAMPLES + 1):
            try:
                path = routes.route(net.origin_road(o), net.destination_road(d))
                break
            except Unreachable:
                if attempt == MAX_RESAMPLES:
                    break
                d = redraw(o)
        if path is None:
            dropped += 1
            continue
        mode = "car" if i < vehicles_num else "walk"
        drive = personalized_driving(prof) if driving_mode == "personalized" else DrivingParams()
        persons.append(Person(prof.id, prof.age, prof.gender, prof.education, prof.consumption,
                              mode, o, d, dep, path, drive))
    if dropped:
        log.warning("dropped %d unroutable persons", dropped)
    cars = sum(1 for p in persons if p.mode == "car")
    return TripTable(persons, cars, len(persons), seed, dropped, spec_hash)


def walk_time(net: RoadNetwork, person: Person) -> float:
    return sum(net.road(r).length for r in person.route) / WALK_SPEED
