"""Green-wave speed advisory for individual vehicles."""

from __future__ import annotations

import math

from tsa.contract import VehicleAction, VehicleObservation

FLOOR_SHARE = 0.3


def vehicle_agent_decide(obs: VehicleObservation) -> VehicleAction:
    """Advise a speed that reaches the stop line as the light turns green.

    Green and reachable before the change, or with no usable timing, the
    advice is the speed limit.  Red with a known wait ``t_g`` gives
    ``clamp(d / t_g, 0.3 limit, limit)``.
    """
    limit = obs.speed_limit
    d = max(0.0, obs.distance_to_signal)
    if obs.movement_green:
        return VehicleAction(obs.vehicle_id, limit)
    t_g = obs.time_to_green
    if t_g is None or not math.isfinite(t_g) or t_g <= 0:
        return VehicleAction(obs.vehicle_id, limit)
    advice = min(limit, max(FLOOR_SHARE * limit, d / t_g))
    return VehicleAction(obs.vehicle_id, max(0.0, advice))
