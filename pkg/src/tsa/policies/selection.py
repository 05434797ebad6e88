"""Rule table choosing the optimization approach for a task."""

from __future__ import annotations

import os
import re

ALGORITHMS = ("fixed_time", "max_pressure", "adaptive_agent", "llm")

# explicit names in an instruction, matched case-insensitively
_EXPLICIT = [
    (re.compile(r"max[\s_-]?pressure", re.I), "max_pressure"),
    (re.compile(r"fixed[\s_-]?time", re.I), "fixed_time"),
    (re.compile(r"adaptive[\s_-]?agent", re.I), "adaptive_agent"),
    (re.compile(r"\bllm\b", re.I), "llm"),
]
_QUALITATIVE = ("while", "safety", "safe", "trade", "balance", "comfort", "fair", "maintain",
                "congestion", "smooth")
_NUMERIC = ("travel time", "queue", "throughput", "emission", "carbon", "delay", "eta", "speed")


def explicit_algorithm(text: str) -> str | None:
    for pat, label in _EXPLICIT:
        if pat.search(text or ""):
            return label
    return None


def select_algorithm(task, llm_configured: bool | None = None) -> str:
    """Return the signal-control label for a task.

    An algorithm set on the task or named in its objective wins.  A single
    numeric target selects MaxPressure; trade-offs or qualitative goals
    select the adaptive agent, or the LLM controller when an endpoint is
    configured.
    """
    if getattr(task, "algorithm", None):
        return task.algorithm
    objective = getattr(task, "objective", "") or ""
    named = explicit_algorithm(objective)
    if named:
        return named
    if llm_configured is None:
        llm_configured = bool(os.environ.get("TSA_LLM_ENDPOINT"))
    low = objective.lower()
    numeric = sum(1 for k in _NUMERIC if k in low)
    qualitative = any(re.search(rf"\b{k}", low) for k in _QUALITATIVE)
    if qualitative or numeric > 1:
        return "llm" if llm_configured else "adaptive_agent"
    return "max_pressure"


def vehicle_agent_enabled(scenario_name: str) -> bool:
    return scenario_name in ("auto_drive", "fusion")


def signal_control_enabled(scenario_name: str) -> bool:
    return scenario_name in ("tsc", "fusion")
