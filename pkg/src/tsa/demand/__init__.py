"""Travel demand synthesis: profiles, departures, OD, routes, trips."""

from tsa.demand.departures import TIME_WINDOWS, DepartureCurve, curve_for_window, sample_departures
from tsa.demand.od import OdMatrix, generate_od_matrix
from tsa.demand.profiles import DrivingParams, Person, ProfileSpec, generate_profiles
from tsa.demand.routing import RouteCache, path_cost, route, shortest_paths_from
from tsa.demand.trips import TripTable, synthesize_trips

__all__ = [
    "TIME_WINDOWS",
    "DepartureCurve",
    "DrivingParams",
    "OdMatrix",
    "Person",
    "ProfileSpec",
    "RouteCache",
    "TripTable",
    "build_trip_table",
    "curve_for_window",
    "generate_od_matrix",
    "generate_profiles",
    "path_cost",
    "route",
    "sample_departures",
    "shortest_paths_from",
    "synthesize_trips",
]


def build_trip_table(net, persons_num: int, seed: int = 0, spec: ProfileSpec | None = None,
                     curve: DepartureCurve | None = None, driving_mode: str = "unified",
                     vehicles_num: int | None = None, aoi_ids=None) -> TripTable:
    """Full trip-generator chain: OD matrix, profiles, then synthesis."""
    spec = spec or ProfileSpec()
    od = generate_od_matrix(net, persons_num, seed, aoi_ids=aoi_ids)
    profiles = generate_profiles(persons_num, spec, seed)
    return synthesize_trips(net, od, profiles, curve or DepartureCurve(), driving_mode, seed,
                            vehicles_num, spec.digest())
