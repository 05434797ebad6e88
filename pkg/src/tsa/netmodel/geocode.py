"""Region lookup against an offline gazetteer, plus map-source resolution."""

from __future__ import annotations

import json
import logging
import os
import random
from importlib import resources
from pathlib import Path

from tsa.errors import InvalidNetwork, MalformedGazetteer, UnknownRegion
from tsa.netmodel.model import BoundingBox

log = logging.getLogger(__name__)

GAZETTEER_ENV = "TSA_GAZETTEER"
MAP_DIR_ENV = "TSA_MAP_DIR"
OVERPASS_URL = "https://overpass-api.de/api/interpreter"


def default_gazetteer_path() -> Path:
    env = os.environ.get(GAZETTEER_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("tsa") / "data" / "gazetteer.json"))


def normalize_region(name: str) -> str:
    return name.strip().lower()


def load_gazetteer(path: str | os.PathLike | None = None) -> dict[str, BoundingBox]:
    path = Path(path) if path is not None else default_gazetteer_path()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedGazetteer(f"cannot read gazetteer {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedGazetteer("gazetteer must be a JSON object")
    out = {}
    for name, box in raw.items():
        if not (isinstance(box, list) and len(box) == 4
                and all(isinstance(v, (int, float)) for v in box)):
            raise MalformedGazetteer(f"entry {name!r} is not four numbers")
        try:
            out[normalize_region(name)] = BoundingBox(*map(float, box))
        except InvalidNetwork as exc:
            raise MalformedGazetteer(f"entry {name!r}: {exc}") from exc
    return out


def geocode(region_name: str, gazetteer: str | os.PathLike | None = None) -> BoundingBox:
    """Return the stored bounding box for ``region_name`` (case/space-insensitive)."""
    table = load_gazetteer(gazetteer)
    box = table.get(normalize_region(region_name))
    if box is None:
        raise UnknownRegion(f"region {region_name.strip()!r} not in gazetteer")
    return box


def find_map_document(region_name: str, map_dir: str | os.PathLike | None = None) -> str | None:
    """Locate an offline GeoJSON extract for the region, if one is shipped."""
    slug = normalize_region(region_name).replace(" ", "_")
    candidates = []
    if map_dir is not None:
        candidates.append(Path(map_dir))
    if os.environ.get(MAP_DIR_ENV):
        candidates.append(Path(os.environ[MAP_DIR_ENV]))
    candidates.append(Path(str(resources.files("tsa") / "data" / "maps")))
    for d in candidates:
        p = d / f"{slug}.geojson"
        if p.is_file():
            return p.read_text(encoding="utf-8")
    return None


def synthetic_region_geojson(box: BoundingBox, rows: int = 3, cols: int = 3,
                             seed: int = 0, hospitals: int = 2) -> dict:
    """A street lattice inside ``box`` with scattered AOIs.

    Used to produce the shipped offline extracts and as a stand-in when a
    region has no extract.  Deterministic per arguments.
    """
    rng = random.Random(seed)
    lons = [box.min_lon + (box.max_lon - box.min_lon) * (c + 0.5) / cols for c in range(cols)]
    lats = [box.min_lat + (box.max_lat - box.min_lat) * (r + 0.5) / rows for r in range(rows)]
    feats = []
    fid = 0

    def line(a, b, highway="secondary", lanes=2):
        nonlocal fid
        feats.append({"type": "Feature", "id": fid,
                      "properties": {"highway": highway, "lanes": str(lanes), "maxspeed": "50"},
                      "geometry": {"type": "LineString", "coordinates": [list(a), list(b)]}})
        fid += 1

    dlon = (box.max_lon - box.min_lon) / cols / 2
    dlat = (box.max_lat - box.min_lat) / rows / 2
    for r, lat in enumerate(lats):
        line((lons[0] - dlon, lat), (lons[0], lat), "primary")
        for c in range(cols - 1):
            line((lons[c], lat), (lons[c + 1], lat), "primary")
        line((lons[-1], lat), (lons[-1] + dlon, lat), "primary")
    for c, lon in enumerate(lons):
        line((lon, lats[0] - dlat), (lon, lats[0]))
        for r in range(rows - 1):
            line((lon, lats[r]), (lon, lats[r + 1]))
        line((lon, lats[-1]), (lon, lats[-1] + dlat))

    kinds = ["residential", "workplace", "commercial", "residential", "workplace"]
    n_aois = rows * cols * 2
    for i in range(n_aois):
        lon = rng.uniform(box.min_lon, box.max_lon)
        lat = rng.uniform(box.min_lat, box.max_lat)
        kind = kinds[i % len(kinds)]
        props = {"aoi_kind": kind, "attractiveness": round(rng.uniform(0.5, 3.0), 3)}
        feats.append({"type": "Feature", "id": 1000 + i, "properties": props,
                      "geometry": {"type": "Point", "coordinates": [lon, lat]}})
    for h in range(hospitals):
        lon = rng.uniform(box.min_lon, box.max_lon)
        lat = rng.uniform(box.min_lat, box.max_lat)
        feats.append({"type": "Feature", "id": 2000 + h,
                      "properties": {"amenity": "hospital", "capacity": 40 + 20 * h},
                      "geometry": {"type": "Point", "coordinates": [lon, lat]}})
    return {"type": "FeatureCollection", "features": feats}


def fetch_osm_geojson(box: BoundingBox, timeout: float = 60.0) -> dict:  # pragma: no cover
    """Fetch highways inside ``box`` from Overpass and convert them to GeoJSON.

    Needs network access; the offline extracts are used everywhere else.
    """
    import urllib.parse
    import urllib.request

    query = (f"[out:json][timeout:{int(timeout)}];"
             f'way["highway"]({box.min_lat},{box.min_lon},{box.max_lat},{box.max_lon});'
             "out body;>;out skel qt;")
    data = urllib.parse.urlencode({"data": query}).encode()
    with urllib.request.urlopen(OVERPASS_URL, data=data, timeout=timeout) as resp:
        osm = json.load(resp)
    nodes = {e["id"]: (e["lon"], e["lat"]) for e in osm["elements"] if e["type"] == "node"}
    feats = []
    for e in osm["elements"]:
        if e["type"] != "way":
            continue
        coords = [list(nodes[n]) for n in e.get("nodes", []) if n in nodes]
        if len(coords) >= 2:
            feats.append({"type": "Feature", "id": e["id"], "properties": dict(e.get("tags", {})),
                          "geometry": {"type": "LineString", "coordinates": coords}})
    return {"type": "FeatureCollection", "features": feats}
