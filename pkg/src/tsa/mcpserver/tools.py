"""Tool handlers: each maps validated arguments onto a module operation."""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field

from tsa.context import SessionStore
from tsa.demand import (
    TIME_WINDOWS,
    DepartureCurve,
    ProfileSpec,
    curve_for_window,
    generate_od_matrix,
    generate_profiles,
    synthesize_trips,
)
from tsa.engine import SimConfig, Simulation, compare_medical
from tsa.errors import TsaError
from tsa.metrics import compute_metrics
from tsa.netmodel import configure_traffic_signals, generate_basic_map, network_summary, preprocess_for_tsc
from tsa.netmodel.geojson import Projection
from tsa.orchestrator import TaskSpec, extract_key_parameters, plan, understand_instruction, validate_parameters
from tsa.policies import DecisionRecord, build_controller, select_algorithm


class ToolError(TsaError):
    """A tool could not complete; reported as a -32000 error."""


@dataclass
class Workspace:
    """Per-session module outputs that later tools build on."""

    net: object = None
    od: object = None
    profiles: list | None = None
    profile_spec: ProfileSpec | None = None
    curve: DepartureCurve | None = None
    trips: object = None
    task: TaskSpec | None = None
    last_run: str | None = None


class RunHandle:
    """A simulation running on its own worker thread with readable progress."""

    def __init__(self, handle: str, session_id: str, sim: Simulation | None, medical=None):
        self.handle = handle
        self.session_id = session_id
        self.sim = sim
        self.total = sim.config.duration_step if sim is not None else 0
        self._lock = threading.Lock()
        self._progress = {"step": 0, "total": self.total, "tv": 0, "tp": 0}
        self.status = "running"
        self.report = None
        self.medical = medical
        self.error: str | None = None
        self.done = threading.Event()
        if sim is None:
            self.status = "done"
            self.done.set()
            self.thread = None
        else:
            self.thread = threading.Thread(target=self._work, name=handle, daemon=True)
            self.thread.start()

    def _work(self) -> None:
        try:
            for k in range(self.total):
                rec = self.sim.step()
                with self._lock:
                    self._progress = {"step": k + 1, "total": self.total, "tv": rec.tv,
                                      "tp": self.sim.finished_count}
            self.report = compute_metrics(self.sim.trace)
            self.status = "done"
        except Exception as exc:  # surfaced through monitor/extract
            self.error = f"{type(exc).__name__}: {exc}"
            self.status = "failed"
        finally:
            self.done.set()

    def progress(self) -> dict:
        with self._lock:
            p = dict(self._progress)
        p.update(status=self.status, handle=self.handle)
        if self.error:
            p["error"] = self.error
        return p


@dataclass
class CallContext:
    store: SessionStore
    session_id: str
    workspace: Workspace
    runs: dict[str, RunHandle]
    new_handle: object
    run_lock: threading.Lock = field(default_factory=threading.Lock)


# -- helpers ----------------------------------------------------------------

def _need_net(ctx: CallContext):
    if ctx.workspace.net is None:
        raise ToolError("no network in this session; call generate-basic-map first")
    return ctx.workspace.net


def _target_session(ctx: CallContext, args: dict) -> str:
    return args.get("session_id") or ctx.session_id


def _profile_spec(args: dict, base: ProfileSpec | None = None) -> ProfileSpec:
    base = base or ProfileSpec()
    return ProfileSpec(
        age_ranges=tuple(tuple(r) for r in args.get("age_ranges", base.age_ranges)),
        gender_distribution=dict(args.get("gender_distribution", base.gender_distribution)),
        education_distribution=dict(args.get("education_distribution", base.education_distribution)),
        cons_ranges=tuple(tuple(r) for r in args.get("cons_ranges", base.cons_ranges)),
    ).validate()


def _window_curve(start: int, duration: int) -> DepartureCurve:
    for label, (s, d) in TIME_WINDOWS.items():
        if (s, d) == (start, duration):
            return curve_for_window(label)
    return DepartureCurve("uniform", start, duration)


def _aois_in(net, box: list[float] | None) -> list[str] | None:
    if not box:
        return None
    min_lon, min_lat, max_lon, max_lat = box
    if "origin_lon" in net.meta:
        proj = Projection(float(net.meta["origin_lon"]), float(net.meta["origin_lat"]))
        pos = {a.id: proj.inverse(*a.position) for a in net.aois}
    else:
        pos = {a.id: a.position for a in net.aois}
    ids = [i for i, (x, y) in pos.items() if min_lon <= x <= max_lon and min_lat <= y <= max_lat]
    if len(ids) < 2:
        raise ToolError("fewer than two AOIs inside boundary_coordinates")
    return sorted(ids)


def _spec_from_text(text: str) -> TaskSpec:
    text = text.strip()
    if text.startswith("{"):
        return TaskSpec.from_json(text)
    return understand_instruction(text)


# -- task understanding / orchestrator ---------------------------------------

def analyze_requirement(ctx, args):
    spec = understand_instruction(args["natural_language_input"])
    ctx.workspace.task = spec
    return spec.to_dict()


def extract_key_parameter(ctx, args):
    spec = understand_instruction(args["natural_language_input"])
    ctx.workspace.task = spec
    return extract_key_parameters(spec)


def validate_parameters_tool(ctx, args):
    text = args["natural_language_input"]
    try:
        spec = _spec_from_text(text)
    except TsaError as exc:
        return {"valid": False, "errors": [str(exc)]}
    return validate_parameters(spec)


def agent_router(ctx, args):
    if "task_spec" in args:
        spec = TaskSpec.from_dict(args["task_spec"]).validate()
    elif ctx.workspace.task is not None:
        spec = ctx.workspace.task
    else:
        raise ToolError("no TaskSpec; pass task_spec or call analyze-requirement")
    return plan(spec).to_dict()


# -- map generator -----------------------------------------------------------

def generate_basic_map_tool(ctx, args):
    net = generate_basic_map(args["region"], green_time=args.get("green_time", 30.0),
                             yellow_time=args.get("yellow_time", 3.0))
    ctx.workspace.net = net
    ctx.workspace.trips = ctx.workspace.od = None
    return network_summary(net)


def configure_signals_tool(ctx, args):
    net = configure_traffic_signals(_need_net(ctx), args.get("green_time", 30.0), args.get("yellow_time", 3.0))
    ctx.workspace.net = net
    return network_summary(net)


def preprocess_tool(ctx, args):
    net = preprocess_for_tsc(_need_net(ctx))
    ctx.workspace.net = net
    yellow = sum(1 for j in net.junctions if j.signal_plan
                 for p in j.signal_plan.phases if p.kind == "yellow")
    return dict(network_summary(net), yellow_phases=yellow)


# -- trip generator ----------------------------------------------------------

def select_od_tool(ctx, args):
    net = _need_net(ctx)
    od = generate_od_matrix(net, args["persons_num"], args.get("seed", 0),
                            aoi_ids=_aois_in(net, args.get("boundary_coordinates")))
    ctx.workspace.od = od
    return {"trips": od.total, "pairs": len(od.entries)}


def generate_profiles_tool(ctx, args):
    spec = _profile_spec(args)
    people = generate_profiles(args["persons_num"], spec, args.get("seed", 0))
    ctx.workspace.profiles, ctx.workspace.profile_spec = people, spec
    genders: dict[str, int] = {}
    for p in people:
        genders[p.gender] = genders.get(p.gender, 0) + 1
    ages = [p.age for p in people]
    return {"persons": len(people), "gender_counts": genders,
            "mean_age": sum(ages) / len(ages), "spec_digest": spec.digest()}


def departure_tool(ctx, args):
    curve = _window_curve(args["start_step"], args["duration_step"])
    ctx.workspace.curve = curve
    return curve.to_dict()


def _synthesize(ctx, args, driving_mode: str):
    ws = ctx.workspace
    net = _need_net(ctx)
    n = args.get("persons_num") or (len(ws.profiles) if ws.profiles else None)
    if n is None:
        raise ToolError("persons_num is required before profiles exist")
    seed = args.get("seed", 0)
    spec = _profile_spec(args, ws.profile_spec) if any(
        k in args for k in ("age_ranges", "cons_ranges", "gender_distribution",
                            "education_distribution")) else (ws.profile_spec or ProfileSpec())
    od = ws.od if ws.od is not None and ws.od.total == n and "boundary_coordinates" not in args else \
        generate_od_matrix(net, n, seed, aoi_ids=_aois_in(net, args.get("boundary_coordinates")))
    people = ws.profiles if ws.profiles is not None and len(ws.profiles) == n \
        and spec == ws.profile_spec else generate_profiles(n, spec, seed)
    if "start_step" in args or "duration_step" in args:
        base = ws.curve or DepartureCurve()
        curve = _window_curve(args.get("start_step", base.start_step),
                              args.get("duration_step", base.duration_step))
    else:
        curve = ws.curve or DepartureCurve()
    trips = synthesize_trips(net, od, people, curve, driving_mode, seed, args.get("vehicles_num"),
                             spec.digest())
    ws.od, ws.profiles, ws.profile_spec, ws.curve, ws.trips = od, people, spec, curve, trips
    return {"persons": len(trips.persons), "cars": len(trips.cars), "driving_mode": driving_mode,
            "start_step": curve.start_step, "duration_step": curve.duration_step,
            "digest": trips.digest()}


def persons_vehicles_tool(ctx, args):
    return _synthesize(ctx, args, "unified")


def personalized_driving_tool(ctx, args):
    if ctx.workspace.profiles is None and "persons_num" not in args:
        raise ToolError("no trips yet; call generate-persons-vehicles first")
    return _synthesize(ctx, args, "personalized")


# -- simulation executor -----------------------------------------------------

def demand_recognition_tool(ctx, args):
    task = ctx.workspace.task
    scenario = args.get("scenario_name") or (task.scenario_name if task else "tsc")
    stub = task or TaskSpec(scenario_name=scenario)
    return {"scenario_name": scenario, "online": scenario != "medical_service",
            "objective": stub.objective, "optimize": stub.optimize,
            "algorithm": args.get("algorithm") or select_algorithm(stub, llm_configured=False)}


def select_algorithm_tool(ctx, args):
    if args.get("algorithm"):
        return {"algorithm": args["algorithm"]}
    task = ctx.workspace.task or TaskSpec(scenario_name=args.get("scenario_name", "tsc"))
    return {"algorithm": select_algorithm(task)}


def execute_scenario_tool(ctx, args):
    ws = ctx.workspace
    net = _need_net(ctx)
    if ws.trips is None:
        raise ToolError("no trips in this session; call generate-persons-vehicles first")
    scenario = args["scenario_name"]
    algorithm = args.get("algorithm") or (select_algorithm(ws.task, llm_configured=False)
                                          if ws.task else "fixed_time")
    seed = args.get("seed", 0)
    start = args.get("start_step", ws.curve.start_step if ws.curve else 0)
    duration = args.get("duration_step", ws.curve.duration_step if ws.curve else 3600)
    handle = ctx.new_handle()
    if scenario == "medical_service":
        run = RunHandle(handle, ctx.session_id, None, compare_medical(net, ws.trips))
    else:
        cfg = SimConfig(start_step=start, duration_step=duration, scenario_name=scenario,
                        algorithm=algorithm, reward_type=args.get("reward_type", "composite"),
                        llm_control_interval=args.get("llm_control_interval", 5), seed=seed)
        controller = build_controller(algorithm, scenario, cfg.reward_type, seed)
        run = RunHandle(handle, ctx.session_id, Simulation(net, ws.trips, cfg, controller))
    with ctx.run_lock:
        ctx.runs[handle] = run
    ws.last_run = handle
    return {"handle": handle, "status": run.status, "total": run.total, "algorithm": algorithm}


def _run_for(ctx, args) -> RunHandle:
    handle = args.get("handle") or ctx.workspace.last_run
    with ctx.run_lock:
        run = ctx.runs.get(handle) if handle else None
    if run is None or run.session_id != ctx.session_id:
        raise ToolError(f"unknown run handle {handle!r}")
    return run


def monitor_tool(ctx, args):
    return _run_for(ctx, args).progress()


EXTRACT_TIMEOUT = 600.0


def extract_metrics_tool(ctx, args):
    run = _run_for(ctx, args)
    if not run.done.wait(EXTRACT_TIMEOUT):
        raise ToolError(f"run {run.handle} still running")
    if run.status == "failed":
        raise ToolError(f"run {run.handle} failed: {run.error}")
    if run.medical is not None:
        return {"handle": run.handle, "medical": {k: r.to_dict() for k, r in run.medical.items()}}
    return dict(run.report.to_dict(series=False), handle=run.handle,
                trace_hash=run.sim.trace.digest())


# -- context ---------------------------------------------------------------

def create_session_tool(ctx, args):
    return {"session_id": ctx.store.create_session()}


def get_session_tool(ctx, args):
    return ctx.store.get_session(_target_session(ctx, args)).to_dict()


def export_session_tool(ctx, args):
    return {"data": ctx.store.export_session(_target_session(ctx, args))}


def import_session_tool(ctx, args):
    return {"session_id": ctx.store.import_session(args["data"])}


def record_tool_call_tool(ctx, args):
    seq = ctx.store.record_tool_call(_target_session(ctx, args), args["tool"], args.get("params"),
                                     args.get("outcome", "ok"), args.get("error_message"),
                                     args.get("duration", 0.0))
    return {"seq": seq}


def history_tool(ctx, args):
    recs = ctx.store.get_tool_call_history(_target_session(ctx, args), args.get("tool"),
                                           args.get("outcome"))
    return {"records": [r.__dict__ for r in recs]}


def get_agent_state_tool(ctx, args):
    return {"agent": args["agent"], "state": ctx.store.get_agent_state(_target_session(ctx, args),
                                                                        args["agent"])}


def update_agent_state_tool(ctx, args):
    sid = _target_session(ctx, args)
    ctx.store.update_agent_state(sid, args["agent"], args["state"])
    return {"agent": args["agent"], "state": ctx.store.get_agent_state(sid, args["agent"])}


_LIMIT_KEYS = ("max_conversation_length", "max_session_memory", "memory_retention_days",
               "auto_summarize_interval", "background_info_length", "max_context_variables",
               "context_summary_length")


def _memory_session(ctx, args) -> str:
    sid = _target_session(ctx, args)
    limits = {k: args[k] for k in _LIMIT_KEYS if k in args}
    if limits:
        ctx.store.configure_memory(sid, **limits)
    return sid


def get_background_tool(ctx, args):
    return {"background": ctx.store.get_agent_background(_memory_session(ctx, args))}


def record_decision_tool(ctx, args):
    sid = _memory_session(ctx, args)
    rec = DecisionRecord.from_dict(args["record"])
    ctx.store.record_decision(sid, args["agent"], rec)
    best = ctx.store.best_decision(sid, args["agent"], rec.bucket)
    return {"recorded": True, "best_reward": best.reward_after if best else None}


def add_background_tool(ctx, args):
    sid = _memory_session(ctx, args)
    ctx.store.add_background_knowledge(sid, args["text"])
    return {"background_items": len(ctx.store.get_agent_background(sid))}


def search_tool(ctx, args):
    hits = ctx.store.search_conversation(_memory_session(ctx, args), args["query"])
    return {"hits": [e.__dict__ for e in hits]}


def summary_tool(ctx, args):
    return {"summary": ctx.store.get_conversation_summary(_memory_session(ctx, args))}


def clear_memory_tool(ctx, args):
    ctx.store.clear_memory(_memory_session(ctx, args))
    return {"cleared": True}


def health_check_tool(ctx, args):
    if any(k in args for k in _LIMIT_KEYS) or "session_id" in args:
        _memory_session(ctx, args)
    return ctx.store.health_check()


HANDLERS = {
    "analyze-requirement": analyze_requirement,
    "extract-key-parameter": extract_key_parameter,
    "validate-parameters": validate_parameters_tool,
    "agent_router": agent_router,
    "generate-basic-map": generate_basic_map_tool,
    "configure-traffic-signals": configure_signals_tool,
    "preprocess-map-for-tsc": preprocess_tool,
    "select-origins-destinations": select_od_tool,
    "generate-profiles": generate_profiles_tool,
    "configure-departure-times": departure_tool,
    "generate-persons-vehicles": persons_vehicles_tool,
    "configure-personalized-driving": personalized_driving_tool,
    "demand-recognition": demand_recognition_tool,
    "select-algorithm": select_algorithm_tool,
    "execute-scenario": execute_scenario_tool,
    "monitor-simulation-progress": monitor_tool,
    "extract-simulation-metrics": extract_metrics_tool,
    "create_session": create_session_tool,
    "get_session": get_session_tool,
    "export_session": export_session_tool,
    "import_session": import_session_tool,
    "record_tool_call": record_tool_call_tool,
    "get_tool_call_history": history_tool,
    "get_agent_state": get_agent_state_tool,
    "update_agent_state": update_agent_state_tool,
    "get_agent_background": get_background_tool,
    "record_decision": record_decision_tool,
    "add_background_knowledge": add_background_tool,
    "search_conversation": search_tool,
    "get_conversation_summary": summary_tool,
    "clear_memory": clear_memory_tool,
    "health_check": health_check_tool,
}


def jsonable(value):
    return json.loads(json.dumps(value, default=str))
