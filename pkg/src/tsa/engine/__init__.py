"""Microscopic simulation engine and offline scenarios."""

from tsa.engine.config import SCENARIOS, EngineParams, SimConfig
from tsa.engine.medical import MedicalReport, compare_medical, run_offline_medical
from tsa.engine.sim import Simulation, SignalState, Vehicle, idm_acceleration, run
from tsa.engine.trace import SimTrace, StepRecord, VehicleRecord

__all__ = [
    "SCENARIOS",
    "EngineParams",
    "MedicalReport",
    "SignalState",
    "SimConfig",
    "SimTrace",
    "Simulation",
    "StepRecord",
    "Vehicle",
    "VehicleRecord",
    "compare_medical",
    "idm_acceleration",
    "run",
    "run_offline_medical",
]
