"""Routed plan execution with session bookkeeping and one reflection retry."""

from __future__ import annotations

import copy
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from tsa.context import SessionStore
from tsa.demand import ProfileSpec, build_trip_table
from tsa.demand.departures import curve_for_window
from tsa.engine import SimConfig, SimTrace, compare_medical, run
from tsa.errors import PlanFailure
from tsa.metrics import Leaderboard, MetricsReport, mrr
from tsa.netmodel import generate_basic_map, network_summary, preprocess_for_tsc
from tsa.orchestrator.planner import ExecutionPlan, PlanStep
from tsa.policies import TargetedController, build_controller

# bookkeeping name of each module step in the session history
TOOL_NAMES = {
    "map": "generate-basic-map",
    "trip": "generate-persons-vehicles",
    "sim": "execute-scenario",
    "analyze": "agent_router",
    "optimize": "select-algorithm",
    "report": "extract-simulation-metrics",
}


@dataclass
class StepOutput:
    module: str
    value: object
    summary: dict = field(default_factory=dict)


@dataclass
class SimOutcome:
    branch: str
    algorithm: str
    params: dict
    trace: SimTrace | None = None
    report: MetricsReport | None = None
    medical: dict | None = None
    incidents: list[str] = field(default_factory=list)

    def summary(self) -> dict:
        d = {"branch": self.branch, "algorithm": self.algorithm}
        if self.report is not None:
            d["metrics"] = self.report.to_dict(series=False)
            d["hash"] = self.trace.digest()
        if self.medical is not None:
            d["medical"] = {k: r.to_dict() for k, r in self.medical.items()}
        if self.incidents:
            d["incidents"] = len(self.incidents)
        return d


# -- default tools ----------------------------------------------------------

def _dep(inputs: dict[int, StepOutput], module: str, step: PlanStep | None = None):
    found = [(i, o) for i, o in sorted(inputs.items()) if o.module == module]
    if not found:
        raise ValueError(f"missing {module} input")
    return found


def map_tool(params: dict, inputs: dict, gazetteer=None, map_dir=None) -> StepOutput:
    net = generate_basic_map(params["region"], gazetteer, map_dir,
                             float(params.get("green_time", 30.0)), float(params.get("yellow_time", 3.0)))
    if params.get("preprocess_for_tsc"):
        net = preprocess_for_tsc(net)
    return StepOutput("map", net, network_summary(net))


def window_seed(params: dict) -> int:
    """Per-window demand seed so different windows of one region draw different trips."""
    return int(params.get("seed", 0)) * 100003 + zlib.crc32(str(params.get("window")).encode()) % 100003


def trip_tool(params: dict, inputs: dict) -> StepOutput:
    (_, m), = _dep(inputs, "map")
    curve = curve_for_window(params["window"], params.get("start_step"), params.get("duration_step"))
    spec = ProfileSpec.from_dict(params.get("profile", {}))
    trips = build_trip_table(m.value, int(params["persons_num"]), window_seed(params), spec,
                             curve, params.get("driving_mode", "unified"), params.get("vehicles_num"))
    return StepOutput("trip", trips, {"persons": len(trips.persons), "cars": len(trips.cars),
                                      "digest": trips.digest()})


def sim_tool(params: dict, inputs: dict) -> StepOutput:
    targets = None
    if params.get("validation"):
        (_, opt), = _dep(inputs, "optimize")
        plan_ = opt.value
        net, trips = inputs[plan_["map_step"]].value, inputs[plan_["trip_step"]].value
        base = dict(plan_["branch_params"])
        base.update(algorithm=plan_["algorithm"], branch=f"{plan_['branch']} (optimized)")
        targets = plan_["critical_junctions"]
    else:
        (_, m), = _dep(inputs, "map")
        (_, t), = _dep(inputs, "trip")
        net, trips, base = m.value, t.value, dict(params)
    scenario = base.get("scenario_name", "tsc")
    algorithm = base.get("algorithm") or "fixed_time"
    if scenario == "medical_service":
        out = SimOutcome(base["branch"], "offline", base, medical=compare_medical(net, trips))
        return StepOutput("sim", out, out.summary())
    seed = int(base.get("seed", 0))
    controller = build_controller(algorithm, scenario, base.get("reward_type", "composite"), seed)
    if targets and controller is not None and algorithm != "fixed_time" and scenario == "tsc":
        controller = TargetedController(controller, targets, int(base.get("llm_control_interval", 5)))
    cfg = SimConfig(start_step=int(base.get("start_step", 0)),
                    duration_step=int(base.get("duration_step", 3600)), scenario_name=scenario,
                    algorithm=algorithm, reward_type=base.get("reward_type", "composite"),
                    llm_control_interval=int(base.get("llm_control_interval", 5)), seed=seed)
    trace, report = run(net, trips, cfg, controller)
    incidents = list(getattr(controller, "incidents", []) or [])
    out = SimOutcome(base["branch"], algorithm, base, trace, report, incidents=incidents)
    return StepOutput("sim", out, out.summary())


def _branch_board(outcomes: list[SimOutcome]) -> Leaderboard:
    if all(o.report is not None for o in outcomes):
        return Leaderboard.from_reports({o.branch: o.report for o in outcomes})
    rows = []
    for o in outcomes:
        r = o.medical["mass_benefit"]
        rows.append([r.serve_rate, r.att])
    return Leaderboard([o.branch for o in outcomes],
                       [("serve_rate", "higher_better"), ("att", "lower_better")], rows)


def critical_junctions(trace: SimTrace) -> list[str]:
    """Junctions whose mean queue is at least the network's per-junction mean."""
    if trace is None or not trace.steps or not trace.junction_ids:
        return []
    n = len(trace.steps)
    means = [math.fsum(r.junction_queues[k] for r in trace.steps) / n
             for k in range(len(trace.junction_ids))]
    overall = math.fsum(means) / len(means)
    ranked = sorted(zip(means, trace.junction_ids), key=lambda x: (-x[0], x[1]))
    return [j for q, j in ranked if q > 0 and q >= overall]


def analyze_tool(params: dict, inputs: dict) -> StepOutput:
    sims = [(i, o.value) for i, o in _dep(inputs, "sim")]
    board = _branch_board([o for _, o in sims])
    scores = mrr(board)
    # lowest MRR is the worst-performing branch; the earlier branch wins ties
    worst_idx, worst = min(sims, key=lambda s: (scores[s[1].branch], s[0]))
    value = {"leaderboard": board, "mrr": scores, "worst_branch": worst.branch,
             "worst_step": worst_idx, "critical_junctions": critical_junctions(worst.trace)}
    return StepOutput("analyze", value, {"mrr": scores, "worst_branch": worst.branch,
                                         "critical_junctions": value["critical_junctions"]})


def optimize_tool(params: dict, inputs: dict, plan_steps: list[PlanStep] | None = None) -> StepOutput:
    analyses = [o for _, o in sorted(inputs.items()) if o.module == "analyze"]
    if analyses:
        a = analyses[0].value
        sim_idx, critical = a["worst_step"], a["critical_junctions"]
    else:
        (sim_idx, s), = _dep(inputs, "sim")
        critical = critical_junctions(s.value.trace)
    sim_step = plan_steps[sim_idx]
    map_step = next(d for d in sim_step.depends_on if plan_steps[d].module == "map")
    trip_step = next(d for d in sim_step.depends_on if plan_steps[d].module == "trip")
    value = {"branch": sim_step.params["branch"], "algorithm": params.get("algorithm", "max_pressure"),
             "critical_junctions": critical, "sim_step": sim_idx, "map_step": map_step,
             "trip_step": trip_step, "branch_params": dict(sim_step.params)}
    return StepOutput("optimize", value, {k: value[k] for k in ("branch", "algorithm",
                                                                 "critical_junctions")})


def report_tool(params: dict, inputs: dict, outputs: dict | None = None) -> StepOutput:
    sims = [o.value for _, o in _dep(inputs, "sim")]
    opt = [o.value for o in inputs.values() if o.module == "optimize"]
    lines = []
    body = {"branches": [s.summary() for s in sims]}
    if opt:
        base = outputs[opt[0]["sim_step"]].value
        new = next(s for s in sims if s.params is not base.params and s.branch.endswith("(optimized)"))
        body["baseline"] = base.summary()
        if base.report is not None and new.report is not None:
            def change(a, b):
                return (b - a) / a * 100.0 if a else 0.0
            body["aql_change_pct"] = change(base.report.aql, new.report.aql)
            body["tp_change_pct"] = change(base.report.tp, new.report.tp)
            lines.append(f"{base.branch}: {base.algorithm} -> {new.algorithm} on "
                         f"{len(opt[0]['critical_junctions'])} critical junctions; "
                         f"AQL {base.report.aql:.2f} -> {new.report.aql:.2f} "
                         f"({body['aql_change_pct']:+.1f}%), TP {base.report.tp} -> {new.report.tp} "
                         f"({body['tp_change_pct']:+.1f}%)")
    for s in sims:
        if s.report is not None:
            r = s.report
            lines.append(f"{s.branch} [{s.algorithm}]: TP {r.tp}, AQL {r.aql:.2f}, "
                         f"ATT-f {r.att_finished:.1f} s, TCE {r.tce:.1f} g")
        elif s.medical is not None:
            for name, r in s.medical.items():
                lines.append(f"{s.branch} [{name}]: SR {r.serve_rate:.3f}, ATT {r.att:.1f} s, "
                             f"score {r.score:.3f}")
    body["text"] = "\n".join(lines)
    return StepOutput("report", body, {"text": body["text"]})


def default_registry(gazetteer=None, map_dir=None) -> dict:
    """Module name -> callable(params, inputs, context) returning a StepOutput."""
    return {
        "map": lambda p, i, ctx: map_tool(p, i, gazetteer, map_dir),
        "trip": lambda p, i, ctx: trip_tool(p, i),
        "sim": lambda p, i, ctx: sim_tool(p, i),
        "analyze": lambda p, i, ctx: analyze_tool(p, i),
        "optimize": lambda p, i, ctx: optimize_tool(p, i, ctx["plan"].steps),
        "report": lambda p, i, ctx: report_tool(p, i, ctx["outputs"]),
    }


# -- execution --------------------------------------------------------------

@dataclass
class AggregatedResult:
    reports: dict[str, MetricsReport] = field(default_factory=dict)
    medical: dict[str, dict] = field(default_factory=dict)
    leaderboard: Leaderboard | None = None
    mrr: dict[str, float] | None = None
    worst_branch: str | None = None
    optimization: dict | None = None
    validation: MetricsReport | None = None
    report_text: str = ""
    outputs: dict[int, StepOutput] = field(default_factory=dict)
    status: dict[int, str] = field(default_factory=dict)
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(s == "ok" for s in self.status.values())

    def to_dict(self) -> dict:
        return {
            "reports": {k: r.to_dict(series=False) for k, r in self.reports.items()},
            "medical": {b: {k: r.to_dict() for k, r in m.items()} for b, m in self.medical.items()},
            "leaderboard": self.leaderboard.to_dict() if self.leaderboard else None,
            "mrr": self.mrr,
            "worst_branch": self.worst_branch,
            "optimization": self.optimization,
            "validation": self.validation.to_dict(series=False) if self.validation else None,
            "report": self.report_text,
            "status": {str(k): v for k, v in sorted(self.status.items())},
            "errors": {str(k): v for k, v in sorted(self.errors.items())},
            "steps": {str(k): o.summary for k, o in sorted(self.outputs.items())},
        }


def _jsonable(params: dict) -> dict:
    import json

    return json.loads(json.dumps(params, default=str))


def _reflect(store: SessionStore, sid: str, tool: str, params: dict, exc: Exception) -> dict:
    """Retry parameters after a failure, checked against the session history.

    The failed attempt is already in the history; parameters an earlier
    successful call of the same tool used are reinstated for any key the
    failing call dropped or nulled.
    """
    fixed = copy.deepcopy(params)
    for rec in reversed(store.get_tool_call_history(sid, tool=tool, outcome="ok")):
        for k, v in rec.params.items():
            if fixed.get(k) is None:
                fixed[k] = v
        break
    store.add_note(sid, f"reflection: retrying {tool} after {type(exc).__name__}: {exc}", "reflection")
    return fixed


def execute_plan(plan: ExecutionPlan, session_id: str, registry: dict | None = None,
                 store: SessionStore | None = None, workers: int = 1) -> AggregatedResult:
    """Run the plan in dependency order and aggregate the branch results.

    Steps whose dependencies are complete run together, on up to
    ``workers`` threads.  Each attempt is recorded as one tool call in the
    session.  A failing step is retried once with reflected parameters;
    if it fails again its dependents are skipped and PlanFailure is raised
    at the end with the partial result attached.
    """
    result = AggregatedResult()
    if not plan.steps:
        return result
    plan.validate()
    registry = default_registry() if registry is None else registry
    missing = sorted({s.module for s in plan.steps} - set(registry))
    if missing:
        raise PlanFailure(f"no tool registered for {missing}", result)
    store = store if store is not None else SessionStore()
    store.get_session(session_id)
    ctx = {"plan": plan, "outputs": result.outputs, "session_id": session_id, "store": store}

    def attempt(i: int) -> tuple[int, StepOutput | None, str | None]:
        step = plan.steps[i]
        tool = TOOL_NAMES[step.module]
        inputs = {d: result.outputs[d] for d in _closure(plan, i) if d in result.outputs}
        params = step.params
        last_error = None
        for n in range(2):
            t0 = time.perf_counter()
            try:
                out = registry[step.module](copy.deepcopy(params), inputs, ctx)
            except Exception as exc:  # any tool failure is retried once, then reported
                last_error = f"{type(exc).__name__}: {exc}"
                store.record_tool_call(session_id, tool, _jsonable(params), "error", last_error,
                                       time.perf_counter() - t0)
                if n == 0:
                    params = _reflect(store, session_id, tool, params, exc)
                continue
            store.record_tool_call(session_id, tool, _jsonable(params), "ok", None,
                                   time.perf_counter() - t0)
            return i, out, None
        return i, None, last_error

    done: set[int] = set()
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while len(done) < len(plan.steps):
            ready = []
            for i, s in enumerate(plan.steps):
                if i in done:
                    continue
                if all(d in done for d in s.depends_on):
                    if any(result.status.get(d) != "ok" for d in s.depends_on):
                        result.status[i] = "skipped"
                        done.add(i)
                    else:
                        ready.append(i)
            if not ready:
                continue
            outcomes = list(pool.map(attempt, ready)) if pool else [attempt(i) for i in ready]
            for i, out, err in outcomes:
                done.add(i)
                if out is None:
                    result.status[i] = "failed"
                    result.errors[i] = err
                else:
                    result.status[i] = "ok"
                    result.outputs[i] = out
                    store.set_variable(session_id, f"step{i}:{plan.steps[i].module}",
                                       _jsonable(out.summary))
    finally:
        if pool:
            pool.shutdown()
    _aggregate(plan, result)
    if not result.ok:
        failed = sorted(i for i, s in result.status.items() if s == "failed")
        raise PlanFailure(f"steps {failed} failed after retry: "
                          + "; ".join(result.errors[i] for i in failed), result)
    return result


def _closure(plan: ExecutionPlan, i: int) -> set[int]:
    """All transitive dependencies of step ``i``."""
    seen, stack = set(), list(plan.steps[i].depends_on)
    while stack:
        d = stack.pop()
        if d not in seen:
            seen.add(d)
            stack.extend(plan.steps[d].depends_on)
    return seen


def _aggregate(plan: ExecutionPlan, result: AggregatedResult) -> None:
    baseline = []
    for i, s in enumerate(plan.steps):
        out = result.outputs.get(i)
        if out is None:
            continue
        if s.module == "sim":
            sim: SimOutcome = out.value
            if s.params.get("validation"):
                result.validation = sim.report
                continue
            baseline.append(sim)
            if sim.report is not None:
                result.reports[sim.branch] = sim.report
            if sim.medical is not None:
                result.medical[sim.branch] = sim.medical
        elif s.module == "analyze":
            result.worst_branch = out.value["worst_branch"]
        elif s.module == "optimize":
            result.optimization = dict(out.summary)
        elif s.module == "report":
            result.report_text = out.value["text"]
    if len(baseline) >= 2:
        result.leaderboard = _branch_board(baseline)
        result.mrr = mrr(result.leaderboard)
