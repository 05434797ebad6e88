"""Perception-decision-action types exchanged between the engine and policies."""

from __future__ import annotations

from dataclasses import dataclass, field

from tsa.netmodel.model import Movement


@dataclass
class JunctionObservation:
    junction_id: str
    step: int = 0
    active_phase: int = 0
    elapsed_in_phase: float = 0.0
    queue_per_movement: dict[Movement, int] = field(default_factory=dict)
    # queued vehicles at the far end of each movement's out-road (0 at the boundary)
    downstream_queue: dict[Movement, int] = field(default_factory=dict)
    phase_movements: list[frozenset[Movement]] = field(default_factory=list)
    green_phases: list[int] = field(default_factory=list)
    total_queue: int = 0
    pressure_per_phase: dict[int, float] = field(default_factory=dict)
    neighbor_total_queue: int = 0
    approaching: list[tuple[str, float, float, Movement]] = field(default_factory=list)
    regional_density: float = 0.0
    time_to_change: float | None = None


@dataclass
class VehicleObservation:
    vehicle_id: str
    road_id: str
    speed: float
    speed_limit: float
    distance_to_signal: float
    movement_green: bool
    time_to_change: float | None = None
    time_to_green: float | None = None
    leader_gap: float | None = None


HOLD = "hold"
SET_PHASE = "set_phase"


@dataclass(frozen=True)
class SignalAction:
    junction_id: str
    kind: str = HOLD
    phase: int | None = None

    @classmethod
    def set_phase(cls, junction_id: str, phase: int) -> "SignalAction":
        return cls(junction_id, SET_PHASE, phase)

    @classmethod
    def hold(cls, junction_id: str) -> "SignalAction":
        return cls(junction_id, HOLD, None)

    def to_dict(self) -> dict:
        return {"junction": self.junction_id, "kind": self.kind, "phase": self.phase}


@dataclass(frozen=True)
class VehicleAction:
    vehicle_id: str
    advised_speed: float

    def __post_init__(self):
        if self.advised_speed < 0:
            raise ValueError("advised_speed must be nonnegative")


class Controller:
    """Online policy consulted by the engine at decision epochs.

    ``interval`` overrides the run's control interval when set.  Controllers
    that leave ``controls_signals`` false let the signal plans rotate on
    their own; ``observes_vehicles`` asks the engine for per-vehicle
    observations.
    """

    interval: int | None = None
    controls_signals: bool = True
    observes_vehicles: bool = False

    def reset(self, net) -> None:
        pass

    def decide(self, junctions: list[JunctionObservation], vehicles: list[VehicleObservation],
               step: int) -> list:
        raise NotImplementedError
