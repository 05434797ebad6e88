"""Instruction understanding, planning and routed execution."""

from tsa.orchestrator.executor import (
    TOOL_NAMES,
    AggregatedResult,
    SimOutcome,
    StepOutput,
    critical_junctions,
    default_registry,
    execute_plan,
)
from tsa.orchestrator.planner import MODULES, ExecutionPlan, PlanStep, plan, workflow_stages
from tsa.orchestrator.task import (
    TaskSpec,
    extract_key_parameters,
    parse_instruction,
    understand_instruction,
    validate_parameters,
)

__all__ = [
    "MODULES",
    "TOOL_NAMES",
    "AggregatedResult",
    "ExecutionPlan",
    "PlanStep",
    "SimOutcome",
    "StepOutput",
    "TaskSpec",
    "critical_junctions",
    "default_registry",
    "execute_plan",
    "extract_key_parameters",
    "parse_instruction",
    "plan",
    "understand_instruction",
    "validate_parameters",
    "workflow_stages",
]
