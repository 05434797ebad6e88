"""GeoJSON (RFC 7946 subset) ingestion into a RoadNetwork."""

from __future__ import annotations

import json
import logging
import math
import re

from tsa.errors import EmptyNetwork, InvalidNetwork, ParseError
from tsa.netmodel.model import (
    Aoi,
    Junction,
    Road,
    RoadNetwork,
    all_movements,
    connected_components,
    neighbors_of,
)

log = logging.getLogger(__name__)

EARTH_RADIUS = 6371008.8
DEFAULT_LANES = 1
DEFAULT_SPEED = 13.89
DEFAULT_HOSPITAL_CAPACITY = 100
_KEY_DIGITS = 7


class Projection:
    """Equirectangular projection around a reference corner of the data."""

    def __init__(self, lon0: float, lat0: float):
        self.lon0 = lon0
        self.lat0 = lat0
        self._kx = math.cos(math.radians(lat0)) * EARTH_RADIUS * math.pi / 180.0
        self._ky = EARTH_RADIUS * math.pi / 180.0

    def forward(self, lon: float, lat: float) -> tuple[float, float]:
        return ((lon - self.lon0) * self._kx, (lat - self.lat0) * self._ky)

    def inverse(self, x: float, y: float) -> tuple[float, float]:
        return (self.lon0 + x / self._kx, self.lat0 + y / self._ky)


def _first_number(value) -> float | None:
    if value is None:
        return None
    if isinstance(value, (int, float)):
        return float(value)
    m = re.search(r"\d+(\.\d+)?", str(value))
    return float(m.group()) if m else None


def _speed(props: dict) -> float:
    raw = props.get("maxspeed")
    num = _first_number(raw)
    if num is None or num <= 0:
        return DEFAULT_SPEED
    if "mph" in str(raw):
        return num * 0.44704
    return num / 3.6


def _aoi_kind(props: dict) -> str | None:
    explicit = props.get("aoi_kind")
    if explicit:
        return str(explicit)
    amenity = props.get("amenity")
    if amenity in ("hospital", "clinic"):
        return "hospital"
    landuse = props.get("landuse")
    building = props.get("building")
    if landuse == "residential" or building in ("residential", "apartments", "house"):
        return "residential"
    if landuse in ("commercial", "retail") or "shop" in props:
        return "commercial"
    if "office" in props or landuse == "industrial":
        return "workplace"
    if amenity or landuse or building:
        return "other"
    return None


def _seg_distance(p, a, b) -> float:
    (px, py), (ax, ay), (bx, by) = p, a, b
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    t = 0.0 if seg2 == 0 else max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / seg2))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _polyline_distance(p, shape) -> float:
    return min(_seg_distance(p, shape[i], shape[i + 1]) for i in range(len(shape) - 1))


def _polyline_length(shape) -> float:
    return math.fsum(math.dist(shape[i], shape[i + 1]) for i in range(len(shape) - 1))


def ingest_geojson(doc: str | dict) -> RoadNetwork:
    """Turn a FeatureCollection into a validated RoadNetwork.

    Highway LineStrings become streets between their endpoints; endpoints
    shared by two or more streets become junctions, the rest are boundary
    ends.  Only the largest weakly connected component is kept.  Zero-length
    and self-looping lines are skipped with a logged warning.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise ParseError("expected a GeoJSON FeatureCollection")
    features = doc.get("features")
    if not isinstance(features, list):
        raise ParseError("FeatureCollection.features must be a list")

    lines = []
    aoi_feats = []
    for idx, feat in enumerate(features):
        if not isinstance(feat, dict) or feat.get("type") != "Feature":
            raise ParseError(f"feature {idx} is not a Feature")
        geom = feat.get("geometry") or {}
        props = feat.get("properties") or {}
        gtype = geom.get("type")
        fid = str(props.get("id", feat.get("id", idx)))
        if gtype == "LineString" and "highway" in props:
            coords = geom.get("coordinates")
            if not isinstance(coords, list) or len(coords) < 2:
                raise ParseError(f"feature {fid}: LineString needs two positions")
            try:
                coords = [(float(c[0]), float(c[1])) for c in coords]
            except (TypeError, ValueError, IndexError) as exc:
                raise ParseError(f"feature {fid}: bad coordinates") from exc
            lines.append((fid, coords, props))
        elif gtype in ("Point", "Polygon"):
            aoi_feats.append((fid, gtype, geom.get("coordinates"), props))

    if not lines:
        raise EmptyNetwork("no usable highway LineStrings")
    lon0 = min(c[0] for _, cs, _ in lines for c in cs)
    lat0 = min(c[1] for _, cs, _ in lines for c in cs)
    proj = Projection(lon0, lat0)

    def key(c):
        return (round(c[0], _KEY_DIGITS), round(c[1], _KEY_DIGITS))

    usable = []
    skipped = 0
    for fid, coords, props in lines:
        shape = tuple(proj.forward(*c) for c in coords)
        length = _polyline_length(shape)
        if not length > 0:
            log.warning("skipping zero-length LineString %s", fid)
            skipped += 1
            continue
        if key(coords[0]) == key(coords[-1]):
            log.warning("skipping self-looping LineString %s", fid)
            skipped += 1
            continue
        usable.append((fid, coords, shape, length, props))
    if not usable:
        raise EmptyNetwork("all LineStrings were degenerate")

    usage: dict[tuple, int] = {}
    for _, coords, *_ in usable:
        for c in (coords[0], coords[-1]):
            usage[key(c)] = usage.get(key(c), 0) + 1
    junction_keys = sorted(k for k, n in usage.items() if n >= 2)
    jid_of = {k: f"n{i}" for i, k in enumerate(junction_keys)}

    roads: list[Road] = []
    seen_ids: set[str] = set()
    for fid, coords, shape, length, props in usable:
        base = f"w{fid}"
        if base in seen_ids:
            raise ParseError(f"duplicate feature id {fid}")
        seen_ids.add(base)
        a, b = jid_of.get(key(coords[0])), jid_of.get(key(coords[-1]))
        total_lanes = int(_first_number(props.get("lanes")) or 0)
        oneway = str(props.get("oneway", "no")).lower()
        speed = _speed(props)
        fwd_id, bwd_id = f"{base}:f", f"{base}:r"
        if oneway in ("yes", "true", "1"):
            roads.append(Road(fwd_id, a, b, length, max(1, total_lanes or DEFAULT_LANES), speed, shape))
        elif oneway == "-1":
            roads.append(Road(bwd_id, b, a, length, max(1, total_lanes or DEFAULT_LANES), speed,
                              tuple(reversed(shape))))
        else:
            per_dir = max(1, total_lanes // 2) if total_lanes else DEFAULT_LANES
            roads.append(Road(fwd_id, a, b, length, per_dir, speed, shape, bwd_id))
            roads.append(Road(bwd_id, b, a, length, per_dir, speed, tuple(reversed(shape)), fwd_id))

    positions = {jid_of[k]: proj.forward(*k) for k in junction_keys}
    net = _assemble(positions, roads, (), {})
    comps = connected_components(net)
    if len(comps) > 1:
        keep = comps[0]
        dropped = [r for r in roads if not _road_in(r, keep)]
        log.warning("dropping %d roads outside the largest connected component", len(dropped))
        roads = [r for r in roads if _road_in(r, keep)]
        positions = {j: p for j, p in positions.items() if j in keep}

    aois = []
    for fid, gtype, coords, props in aoi_feats:
        kind = _aoi_kind(props)
        if kind is None:
            continue
        try:
            if gtype == "Point":
                lon, lat = float(coords[0]), float(coords[1])
            else:
                ring = coords[0]
                if len(ring) > 1 and ring[0] == ring[-1]:
                    ring = ring[:-1]
                lon = math.fsum(float(p[0]) for p in ring) / len(ring)
                lat = math.fsum(float(p[1]) for p in ring) / len(ring)
        except (TypeError, ValueError, IndexError, ZeroDivisionError) as exc:
            raise ParseError(f"feature {fid}: bad AOI geometry") from exc
        p = proj.forward(lon, lat)
        nearest = min(roads, key=lambda rd: (_polyline_distance(p, rd.shape), rd.id))
        capacity = None
        if kind == "hospital":
            capacity = int(_first_number(props.get("capacity", props.get("beds")))
                           or DEFAULT_HOSPITAL_CAPACITY)
        attractiveness = _first_number(props.get("attractiveness"))
        try:
            aois.append(Aoi(f"a{fid}", kind, nearest.id,
                            1.0 if attractiveness is None else attractiveness, capacity, p))
        except InvalidNetwork as exc:
            raise ParseError(str(exc)) from exc

    lats = [c[1] for _, cs, *_ in usable for c in cs]
    lons = [c[0] for _, cs, *_ in usable for c in cs]
    meta = {
        "source": "geojson",
        "origin_lon": repr(lon0),
        "origin_lat": repr(lat0),
        "bbox": json.dumps([min(lons), min(lats), max(lons), max(lats)]),
        "skipped_features": str(skipped),
    }
    return _assemble(positions, roads, tuple(aois), meta).validate()


def _road_in(road: Road, comp: set[str]) -> bool:
    ends = [e for e in (road.from_junction, road.to_junction) if e is not None]
    if not ends:
        return "road:" + (min(road.id, road.reverse) if road.reverse else road.id) in comp
    return ends[0] in comp


def _assemble(positions, roads, aois, meta) -> RoadNetwork:
    junctions = []
    for jid in sorted(positions, key=lambda s: int(s[1:])):
        ins = [r for r in roads if r.to_junction == jid]
        outs = [r for r in roads if r.from_junction == jid]
        junctions.append(Junction(jid, positions[jid], all_movements(ins, outs), None,
                                  neighbors_of(jid, roads)))
    return RoadNetwork(tuple(junctions), tuple(sorted(roads, key=lambda r: r.id)), aois, meta)
