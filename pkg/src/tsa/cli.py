"""Command-line entry point: ``tsa <subcommand>``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

from tsa.errors import TsaError

log = logging.getLogger("tsa")


def _write(path: str, text: str) -> None:
    p = Path(path)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2, default=str))


# -- subcommands ------------------------------------------------------------

def cmd_map(a) -> int:
    from tsa.netmodel import dumps_network, generate_basic_map, network_summary, preprocess_for_tsc

    net = generate_basic_map(a.region, a.gazetteer, a.map_dir, a.green_time, a.yellow_time)
    if a.tsc:
        net = preprocess_for_tsc(net)
    _write(a.out, dumps_network(net))
    _emit(network_summary(net))
    return 0


def cmd_trips(a) -> int:
    from tsa.demand import ProfileSpec, build_trip_table, curve_for_window
    from tsa.netmodel import loads_network

    net = loads_network(_read(a.network))
    spec = ProfileSpec.from_dict(json.loads(_read(a.profile))) if a.profile else ProfileSpec()
    curve = curve_for_window(a.window, a.start_step, a.duration_step)
    trips = build_trip_table(net, a.persons, a.seed, spec, curve, a.driving_mode, a.vehicles)
    _write(a.out, trips.to_jsonl())
    _emit({"persons": len(trips.persons), "cars": len(trips.cars), "start_step": curve.start_step,
           "duration_step": curve.duration_step, "digest": trips.digest()})
    return 0


def cmd_simulate(a) -> int:
    from tsa.demand import TripTable
    from tsa.engine import SimConfig, Simulation, compare_medical
    from tsa.metrics import compute_metrics
    from tsa.netmodel import loads_network
    from tsa.policies import MockTranscript, build_controller

    net = loads_network(_read(a.network))
    trips = TripTable.from_jsonl(_read(a.trips))
    if a.scenario == "medical_service":
        reports = compare_medical(net, trips, a.patience)
        body = {k: r.to_dict() for k, r in reports.items()}
        _write(a.out_report, json.dumps(body, sort_keys=True, indent=2))
        _emit(body)
        return 0
    start = a.start_step
    duration = a.duration_step
    if start is None or duration is None:
        deps = [p.departure_step for p in trips.persons if p.departure_step is not None]
        start = start if start is not None else (min(deps) if deps else 0)
        duration = duration if duration is not None else max(1, (max(deps) - start + 600) if deps else 3600)
    cfg = SimConfig(start_step=start, duration_step=duration, scenario_name=a.scenario,
                    algorithm=a.algorithm, reward_type=a.reward_type,
                    llm_control_interval=a.interval, seed=a.seed)
    mock = MockTranscript.load(a.mock_transcript) if a.mock_transcript else None
    controller = build_controller(a.algorithm, a.scenario, a.reward_type, a.seed, mock=mock)
    sim = Simulation(net, trips, cfg, controller)
    trace = sim.run()
    report = compute_metrics(trace)
    if a.out_trace:
        _write(a.out_trace, trace.to_csv())
    _write(a.out_report, json.dumps(report.to_dict(), sort_keys=True, indent=2))
    summary = dict(report.to_dict(series=False), trace_hash=trace.digest())
    if sim.incidents:
        summary["incidents"] = len(sim.incidents)
    _emit(summary)
    return 0


def cmd_run(a) -> int:
    from tsa.context import SessionStore
    from tsa.orchestrator import TaskSpec, default_registry, execute_plan, plan, understand_instruction

    if a.task_spec:
        spec = TaskSpec.from_json(_read(a.task_spec)).validate()
    elif a.instruction:
        spec = understand_instruction(a.instruction, gazetteer=a.gazetteer)
    else:
        raise _Usage("give an instruction or --task-spec")
    spec.seed = a.seed
    if a.persons is not None:
        spec.persons_num = a.persons
    if a.duration_step is not None:
        spec.time_windows = [(label, start, a.duration_step) for label, start, _ in spec.time_windows]
    p = plan(spec)
    if a.plan_only:
        out = {"task_spec": spec.to_dict(), "plan": p.to_dict()}
        if a.out:
            _write(a.out, json.dumps(out, sort_keys=True, indent=2))
        _emit(out)
        return 0
    store = SessionStore()
    sid = store.create_session()
    result = execute_plan(p, sid, default_registry(a.gazetteer), store, a.workers)
    out = {"task_spec": spec.to_dict(), "plan": p.to_dict(), "result": result.to_dict()}
    if a.out:
        _write(a.out, json.dumps(out, sort_keys=True, indent=2, default=str))
    if a.session_out:
        _write(a.session_out, store.export_session(sid))
    if result.report_text:
        print(result.report_text)
    _emit({"reports": out["result"]["reports"], "mrr": result.mrr,
           "worst_branch": result.worst_branch})
    return 0


def cmd_compare(a) -> int:
    from tsa.metrics import Leaderboard, MetricsReport

    if len(a.reports) < 2:
        raise _Usage("compare needs at least two report files")
    names = a.names.split(",") if a.names else [Path(p).stem for p in a.reports]
    if len(names) != len(a.reports) or len(set(names)) != len(names):
        raise _Usage("--names must give one distinct name per report")
    reports = {n: MetricsReport.from_dict(json.loads(_read(p))) for n, p in zip(names, a.reports)}
    board = Leaderboard.from_reports(reports)
    if a.out:
        _write(a.out, board.to_json() if a.out.endswith(".json") else board.to_csv())
    print(board.to_csv(), end="")
    return 0


def cmd_report(a) -> int:
    from tsa.engine import SimTrace

    try:
        trace = SimTrace.from_csv(_read(a.trace), a.dt)
    except ValueError as exc:
        raise TsaError(f"{a.trace}: {exc}") from exc
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "tp", "tv", "queue_total", "carbon", "carbon_cum"])
    cum = 0.0
    for r in trace.steps:
        cum += r.carbon
        w.writerow([r.step, r.finished_cum, r.tv, r.queue_total, repr(r.carbon), repr(cum)])
    _write(a.out, buf.getvalue())
    print(f"{len(trace.steps)} steps written to {a.out}")
    return 0


def cmd_serve(a) -> int:
    from tsa.mcpserver import ToolServer, serve_stdio, serve_tcp

    server = ToolServer()
    if a.tcp is not None:
        serve_tcp(server, a.host, a.tcp)
    else:
        serve_stdio(server, sys.stdin, sys.stdout)
    return 0


# -- parser -----------------------------------------------------------------

class _Usage(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tsa", description="Traffic simulation agent platform.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = ap.add_subparsers(dest="command", required=True)

    def seeded(p):
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        return p

    p = seeded(sub.add_parser("map", help="region name to a network file"))
    p.add_argument("--region", required=True)
    p.add_argument("--out", required=True, help="network JSON path")
    p.add_argument("--green-time", type=float, default=30.0)
    p.add_argument("--yellow-time", type=float, default=3.0)
    p.add_argument("--tsc", action="store_true", help="remove yellow phases for signal control")
    p.add_argument("--gazetteer")
    p.add_argument("--map-dir")
    p.set_defaults(func=cmd_map)

    p = seeded(sub.add_parser("trips", help="network to a trip table"))
    p.add_argument("--network", required=True)
    p.add_argument("--out", required=True, help="trip table JSONL path")
    p.add_argument("--persons", type=int, required=True)
    p.add_argument("--vehicles", type=int)
    p.add_argument("--window", default="morning_peak", help="morning_peak, evening_peak, midnight, all_day")
    p.add_argument("--start-step", type=int)
    p.add_argument("--duration-step", type=int)
    p.add_argument("--profile", help="ProfileSpec JSON path")
    p.add_argument("--driving-mode", choices=["unified", "personalized"], default="unified")
    p.set_defaults(func=cmd_trips)

    p = seeded(sub.add_parser("simulate", help="run one simulation"))
    p.add_argument("--network", required=True)
    p.add_argument("--trips", required=True)
    p.add_argument("--out-report", required=True)
    p.add_argument("--out-trace")
    p.add_argument("--algorithm", default="fixed_time",
                   choices=["fixed_time", "max_pressure", "adaptive_agent", "llm"])
    p.add_argument("--scenario", default="tsc", choices=["tsc", "auto_drive", "fusion", "medical_service"])
    p.add_argument("--reward-type", default="composite", choices=["composite", "pressure_only", "queue_only"])
    p.add_argument("--interval", type=int, default=5, help="decision interval in steps")
    p.add_argument("--start-step", type=int)
    p.add_argument("--duration-step", type=int)
    p.add_argument("--mock-transcript", help="JSON transcript replayed instead of a model endpoint")
    p.add_argument("--patience", type=float, default=3600.0, help="medical scenario patience, s")
    p.set_defaults(func=cmd_simulate)

    p = seeded(sub.add_parser("run", help="full pipeline from an instruction"))
    p.add_argument("instruction", nargs="?")
    p.add_argument("--task-spec", help="TaskSpec JSON path instead of an instruction")
    p.add_argument("--out", help="aggregated result JSON path")
    p.add_argument("--session-out", help="write the session export here")
    p.add_argument("--persons", type=int)
    p.add_argument("--duration-step", type=int, help="override every window's duration")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--plan-only", action="store_true")
    p.add_argument("--gazetteer")
    p.set_defaults(func=cmd_run)

    p = seeded(sub.add_parser("compare", help="leaderboard and MRR over report files"))
    p.add_argument("reports", nargs="+")
    p.add_argument("--names", help="comma-separated method names")
    p.add_argument("--out", help="CSV, or JSON when the path ends in .json")
    p.set_defaults(func=cmd_compare)

    p = seeded(sub.add_parser("serve", help="start the JSON-RPC tool server"))
    g = p.add_mutually_exclusive_group()
    g.add_argument("--stdio", action="store_true", help="newline-delimited JSON on stdin/stdout (default)")
    g.add_argument("--tcp", type=int, metavar="PORT", help="length-prefixed frames on a TCP port")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    p = seeded(sub.add_parser("report", help="trace to per-step TP/carbon curves"))
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dt", type=float, default=1.0)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except _Usage as exc:
        parser.error(str(exc))
    except (TsaError, OSError, ValueError) as exc:
        print(f"tsa: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
