"""Decision makers for signals and vehicles."""

from tsa.policies.controllers import (
    AdaptiveController,
    FixedTimeController,
    FusionController,
    LlmController,
    MaxPressureController,
    TargetedController,
    VehicleAgentController,
    build_controller,
)
from tsa.policies.llm import LlmEndpoint, MockTranscript, build_prompt, llm_decide, parse_actions
from tsa.policies.pressure import all_phase_pressures, phase_pressure
from tsa.policies.selection import ALGORITHMS, select_algorithm
from tsa.policies.signal import (
    REWARD_TYPES,
    DecisionRecord,
    RewardWeights,
    adaptive_agent_decide,
    composite_reward,
    max_pressure_decide,
    queue_bucket,
    weights_for,
)
from tsa.policies.vehicle import vehicle_agent_decide

__all__ = [
    "ALGORITHMS",
    "AdaptiveController",
    "DecisionRecord",
    "FixedTimeController",
    "FusionController",
    "LlmController",
    "LlmEndpoint",
    "MaxPressureController",
    "MockTranscript",
    "REWARD_TYPES",
    "RewardWeights",
    "TargetedController",
    "VehicleAgentController",
    "adaptive_agent_decide",
    "all_phase_pressures",
    "build_controller",
    "build_prompt",
    "composite_reward",
    "llm_decide",
    "max_pressure_decide",
    "parse_actions",
    "phase_pressure",
    "queue_bucket",
    "select_algorithm",
    "vehicle_agent_decide",
    "weights_for",
]
