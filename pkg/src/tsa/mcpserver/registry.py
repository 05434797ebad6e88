"""Tool descriptors: names, groups and argument schemas."""

from __future__ import annotations

from dataclasses import dataclass

GROUPS = ("task_understanding", "orchestrator", "map_generator", "trip_generator",
          "simulation_executor", "context_common", "context_memory", "auxiliary")
DEFAULT_ACTIVE = frozenset({"context_common"})

_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_NUM = {"type": "number"}
_STR = {"type": "string"}
_RANGES = {"type": "array", "items": {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}}
_DIST = {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}}

# parameters each group takes, as listed in the architecture table
GROUP_PARAMS: dict[str, dict] = {
    "task_understanding": {"natural_language_input": {"type": "string", "minLength": 1}},
    "orchestrator": {},
    "map_generator": {
        "region": {"type": "string", "minLength": 1},
        "green_time": {"type": "number", "exclusiveMinimum": 0},
        "yellow_time": {"type": "number", "minimum": 0},
    },
    "trip_generator": {
        "boundary_coordinates": {"type": "array", "items": _NUM, "minItems": 4, "maxItems": 4},
        "age_ranges": _RANGES,
        "cons_ranges": _RANGES,
        "gender_distribution": _DIST,
        "education_distribution": _DIST,
        "start_step": _NONNEG_INT,
        "duration_step": _POS_INT,
        "persons_num": _POS_INT,
        "vehicles_num": _POS_INT,
    },
    "simulation_executor": {
        "algorithm": {"type": "string", "enum": ["fixed_time", "max_pressure", "adaptive_agent", "llm"]},
        "scenario_name": {"type": "string", "enum": ["tsc", "auto_drive", "fusion", "medical_service"]},
        "reward_type": {"type": "string", "enum": ["composite", "pressure_only", "queue_only"]},
        "llm_control_interval": _POS_INT,
        "start_step": _NONNEG_INT,
        "duration_step": _POS_INT,
    },
    "context_common": {"session_id": _STR},
    "context_memory": {
        "session_id": _STR,
        "max_conversation_length": _POS_INT,
        "max_session_memory": _POS_INT,
        "memory_retention_days": {"type": "number", "exclusiveMinimum": 0},
        "auto_summarize_interval": _POS_INT,
        "background_info_length": _POS_INT,
        "max_context_variables": _POS_INT,
        "context_summary_length": _POS_INT,
    },
    "auxiliary": {},
}

# (name, group, description, required, operation-specific arguments)
_TOOLS = [
    ("analyze-requirement", "task_understanding",
     "Parse an instruction into a structured TaskSpec.", ["natural_language_input"], {}),
    ("extract-key-parameter", "task_understanding",
     "Per-module key parameters recognized in an instruction.", ["natural_language_input"], {}),
    ("validate-parameters", "task_understanding",
     "Validate an instruction or a JSON TaskSpec.", ["natural_language_input"], {}),
    ("agent_router", "orchestrator",
     "Turn a TaskSpec into an ordered execution plan.", [],
     {"task_spec": {"type": "object"}}),
    ("generate-basic-map", "map_generator",
     "Geocode a region and build its signalized road network.", ["region"], {}),
    ("configure-traffic-signals", "map_generator",
     "Rebuild signal plans of the current network.", [], {}),
    ("preprocess-map-for-tsc", "map_generator",
     "Remove yellow phases from the current network for signal control.", [], {}),
    ("select-origins-destinations", "trip_generator",
     "Draw the origin-destination matrix over the network's AOIs.", ["persons_num"], {}),
    ("generate-profiles", "trip_generator",
     "Sample demographic profiles.", ["persons_num"], {}),
    ("configure-departure-times", "trip_generator",
     "Set the departure-time window.", ["start_step", "duration_step"], {}),
    ("generate-persons-vehicles", "trip_generator",
     "Synthesize persons, vehicles and routes.", ["persons_num"], {}),
    ("configure-personalized-driving", "trip_generator",
     "Give every driver profile-dependent driving parameters.", [], {}),
    ("demand-recognition", "simulation_executor",
     "Recognize the scenario and optimization demand of the current task.", [], {}),
    ("select-algorithm", "simulation_executor",
     "Choose the signal-control algorithm for the current task.", [], {}),
    ("execute-scenario", "simulation_executor",
     "Start a simulation run; returns a run handle.", ["scenario_name"], {}),
    ("monitor-simulation-progress", "simulation_executor",
     "Progress {step, total, tv, tp} of a run.", [], {"handle": _STR}),
    ("extract-simulation-metrics", "simulation_executor",
     "Metrics report of a completed run.", [], {"handle": _STR}),
    ("create_session", "context_common", "Create a new session.", [], {}),
    ("get_session", "context_common", "Read a session.", [], {}),
    ("export_session", "context_common", "Export a session as canonical JSON.", [], {}),
    ("import_session", "context_common", "Import an exported session.", ["data"], {"data": _STR}),
    ("record_tool_call", "context_common", "Append a tool-call record.", ["tool"],
     {"tool": _STR, "params": {"type": "object"}, "outcome": {"type": "string", "enum": ["ok", "error"]},
      "error_message": _STR, "duration": {"type": "number", "minimum": 0}}),
    ("get_tool_call_history", "context_common", "Tool-call history, optionally filtered.", [],
     {"tool": _STR, "outcome": {"type": "string", "enum": ["ok", "error"]}}),
    ("get_agent_state", "context_common", "Read an agent's state.", ["agent"], {"agent": _STR}),
    ("update_agent_state", "context_common", "Merge into an agent's state.", ["agent", "state"],
     {"agent": _STR, "state": {}}),
    ("get_agent_background", "context_memory", "Background knowledge of the session.", [], {}),
    ("record_decision", "context_memory", "Store an agent decision record.", ["agent", "record"],
     {"agent": _STR, "record": {"type": "object", "required": ["step", "junction_id", "action",
                                                               "reward_after"]}}),
    ("add_background_knowledge", "context_memory", "Append background knowledge.", ["text"],
     {"text": _STR}),
    ("search_conversation", "context_memory", "Case-insensitive search of the conversation.",
     ["query"], {"query": _STR}),
    ("get_conversation_summary", "context_memory", "Extractive summary of recent entries.", [], {}),
    ("clear_memory", "context_memory", "Drop decisions and conversation.", [], {}),
    ("health_check", "context_memory", "Store reachability and session count.", [], {}),
]

TOOL_NAMES = tuple(t[0] for t in _TOOLS)


@dataclass(frozen=True)
class ToolDescriptor:
    name: str
    group: str
    description: str
    params_schema: dict

    def to_dict(self, active: bool) -> dict:
        return {"name": self.name, "group": self.group, "description": self.description,
                "inputSchema": self.params_schema, "active": active}


def _schema(group: str, required: list[str], extra: dict) -> dict:
    props = dict(GROUP_PARAMS[group])
    if group in ("trip_generator", "simulation_executor"):
        props["seed"] = _NONNEG_INT
    props.update(extra)
    return {"type": "object", "properties": props, "required": list(required),
            "additionalProperties": False}


def build_descriptors() -> dict[str, ToolDescriptor]:
    out = {}
    for name, group, desc, required, extra in _TOOLS:
        if name in out:
            raise ValueError(f"duplicate tool {name}")
        out[name] = ToolDescriptor(name, group, desc, _schema(group, required, extra))
    return out
