"""Static road networks: types, builders, ingestion and signal plans."""

from tsa.netmodel.geocode import (
    find_map_document,
    geocode,
    load_gazetteer,
    synthetic_region_geojson,
)
from tsa.netmodel.geojson import ingest_geojson
from tsa.netmodel.grid import build_grid_network
from tsa.netmodel.io import dumps_network, loads_network, network_summary
from tsa.netmodel.model import (
    Aoi,
    BoundingBox,
    Junction,
    Movement,
    Phase,
    Road,
    RoadNetwork,
    SignalPlan,
)
from tsa.netmodel.signals import configure_traffic_signals, preprocess_for_tsc


def generate_basic_map(region: str, gazetteer=None, map_dir=None, green_time: float = 30.0,
                       yellow_time: float = 3.0) -> RoadNetwork:
    """Region name to signalized network: geocode, load the extract, build plans."""
    box = geocode(region, gazetteer)
    doc = find_map_document(region, map_dir)
    if doc is None:
        doc = synthetic_region_geojson(box)
    net = ingest_geojson(doc)
    net = configure_traffic_signals(net, green_time, yellow_time)
    net.meta.update({"region": region.strip(), "bbox": str(box.as_list())})
    return net


__all__ = [
    "Aoi",
    "BoundingBox",
    "Junction",
    "Movement",
    "Phase",
    "Road",
    "RoadNetwork",
    "SignalPlan",
    "build_grid_network",
    "configure_traffic_signals",
    "dumps_network",
    "find_map_document",
    "generate_basic_map",
    "geocode",
    "ingest_geojson",
    "load_gazetteer",
    "loads_network",
    "network_summary",
    "preprocess_for_tsc",
    "synthetic_region_geojson",
]
