"""Plan synthesis: TaskSpec to an ordered DAG of module steps."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from tsa.orchestrator.task import TaskSpec
from tsa.policies.selection import select_algorithm, signal_control_enabled

MODULES = ("map", "trip", "sim", "analyze", "optimize", "report")


@dataclass
class PlanStep:
    module: str
    params: dict = field(default_factory=dict)
    depends_on: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.module not in MODULES:
            raise ValueError(f"unknown module {self.module!r}")

    def to_dict(self) -> dict:
        return {"module": self.module, "params": self.params, "depends_on": list(self.depends_on)}


@dataclass
class ExecutionPlan:
    steps: list[PlanStep] = field(default_factory=list)

    def validate(self) -> "ExecutionPlan":
        for i, s in enumerate(self.steps):
            if any(not 0 <= d < i for d in s.depends_on):
                raise ValueError(f"step {i} depends on a step that does not precede it")
            if s.module == "sim":
                kinds = {self.steps[d].module for d in s.depends_on}
                if not {"map", "trip"} <= kinds:
                    raise ValueError(f"sim step {i} needs a map and a trip dependency")
        return self

    @property
    def modules(self) -> list[str]:
        return [s.module for s in self.steps]

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "ExecutionPlan":
        return cls([PlanStep(s["module"], dict(s.get("params", {})), list(s.get("depends_on", [])))
                    for s in d.get("steps", [])]).validate()


def branch_label(region: str, window: str) -> str:
    return f"{region}/{window}"


def plan(spec: TaskSpec) -> ExecutionPlan:
    """One map, trip, sim chain per comparison pair, in the listed order.

    A region's map is generated once and shared by its later branches.
    Several sims are followed by an analyze step.  An optimization
    objective appends optimize, a validation sim and a report; otherwise a
    lone sim gets a report.
    """
    steps: list[PlanStep] = []
    maps: dict[str, int] = {}
    sims: list[int] = []
    branch_inputs: list[int] = []
    chosen = spec.algorithm or select_algorithm(spec, llm_configured=False)
    # when optimizing, the measured branches show the uncontrolled baseline
    base_algorithm = "fixed_time" if spec.optimize else chosen
    map_tsc = signal_control_enabled(spec.scenario_name)
    for region, window in spec.comparisons:
        if region not in maps:
            maps[region] = len(steps)
            steps.append(PlanStep("map", {"region": region, "green_time": 30.0, "yellow_time": 3.0,
                                          "preprocess_for_tsc": map_tsc}))
        label, start, dur = spec.window(window)
        trip_idx = len(steps)
        steps.append(PlanStep("trip", {
            "region": region, "window": label, "start_step": start, "duration_step": dur,
            "persons_num": spec.persons_num, "vehicles_num": spec.vehicles_num,
            "profile": spec.profile.to_dict(), "driving_mode": spec.driving_mode,
            "seed": spec.seed}, [maps[region]]))
        sims.append(len(steps))
        branch_inputs += [maps[region], trip_idx]
        steps.append(PlanStep("sim", {
            "branch": branch_label(region, label), "scenario_name": spec.scenario_name,
            "algorithm": base_algorithm, "reward_type": "composite", "llm_control_interval": 5,
            "start_step": start, "duration_step": dur, "seed": spec.seed},
            [maps[region], trip_idx]))
    last = sims
    if len(sims) > 1:
        last = [len(steps)]
        steps.append(PlanStep("analyze", {"objective": spec.objective}, list(sims)))
    if spec.optimize:
        opt = len(steps)
        steps.append(PlanStep("optimize", {"algorithm": "max_pressure" if chosen == "fixed_time"
                                           else chosen, "seed": spec.seed}, list(last)))
        val = len(steps)
        steps.append(PlanStep("sim", {"branch": "validation", "scenario_name": spec.scenario_name,
                                      "validation": True, "seed": spec.seed},
                              [opt] + sorted(set(branch_inputs))))
        steps.append(PlanStep("report", {}, [val, opt]))
    elif len(sims) == 1:
        steps.append(PlanStep("report", {}, list(sims)))
    return ExecutionPlan(steps).validate()


_STAGE_NAMES = {
    "map": "map generation",
    "trip": "trip generation",
    "sim": "simulation",
    "analyze": "comparative analysis",
    "optimize": "targeted optimization",
    "report": "report",
}


def workflow_stages(p: ExecutionPlan) -> list[str]:
    """Human-level stages; a validation sim and its report read as one stage."""
    out = []
    steps = p.steps
    i = 0
    while i < len(steps):
        s = steps[i]
        if (s.module == "sim" and s.params.get("validation") and i + 1 < len(steps)
                and steps[i + 1].module == "report"):
            out.append("validation simulation & report")
            i += 2
            continue
        name = _STAGE_NAMES[s.module]
        if s.module == "trip":
            name += f" ({s.params.get('window')})"
        elif s.module == "map":
            name += f" ({s.params.get('region')})"
        out.append(name)
        i += 1
    return out
