"""Run configuration and physical engine parameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from tsa.metrics.carbon import CarbonCoeffs

SCENARIOS = ("tsc", "auto_drive", "fusion", "medical_service")


@dataclass(frozen=True)
class SimConfig:
    start_step: int = 0
    duration_step: int = 3600
    dt: float = 1.0
    scenario_name: str = "tsc"
    algorithm: str = "fixed_time"
    reward_type: str = "composite"
    llm_control_interval: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.duration_step < 0:
            raise ValueError("duration_step must be nonnegative")
        if self.llm_control_interval < 1:
            raise ValueError("llm_control_interval must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scenario_name not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario_name!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class EngineParams:
    """Physical defaults; per-person driving params override the IDM ones."""

    delta: float = 4.0
    vehicle_length: float = 5.0
    max_decel: float = 9.0
    saturation_flow: float = 0.5        # veh/s/lane per movement
    queue_speed: float = 0.1            # m/s
    queue_distance: float = 100.0       # m from the stop line
    approach_horizon: float = 150.0     # m
    carbon: CarbonCoeffs = field(default_factory=CarbonCoeffs)
    record_vehicle_states: bool = False
