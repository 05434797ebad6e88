import io
import json
import socket
import threading

import pytest

from tsa.mcpserver import (
    GROUP_PARAMS,
    INVALID_PARAMS,
    METHOD_NOT_FOUND,
    PARSE_ERROR,
    TOOL_ERROR,
    TOOL_NAMES,
    Connection,
    ToolServer,
    recv_frame,
    send_frame,
    serve_stdio,
    start_tcp,
    stop_tcp,
)
from tsa.netmodel import generate_basic_map, network_summary

TABLE_TOOLS = [
    "analyze-requirement", "extract-key-parameter", "validate-parameters", "agent_router",
    "generate-basic-map", "configure-traffic-signals", "preprocess-map-for-tsc",
    "select-origins-destinations", "generate-profiles", "configure-departure-times",
    "generate-persons-vehicles", "configure-personalized-driving", "demand-recognition",
    "select-algorithm", "execute-scenario", "monitor-simulation-progress",
    "extract-simulation-metrics", "create_session", "get_session", "export_session",
    "import_session", "record_tool_call", "get_tool_call_history", "get_agent_state",
    "update_agent_state", "get_agent_background", "record_decision", "add_background_knowledge",
    "search_conversation", "get_conversation_summary", "clear_memory", "health_check",
]


class Client:
    def __init__(self, server=None):
        self.server = server or ToolServer()
        self.conn = Connection()
        self.next_id = 0

    def rpc(self, method, params=None):
        self.next_id += 1
        msg = {"jsonrpc": "2.0", "id": self.next_id, "method": method}
        if params is not None:
            msg["params"] = params
        return self.server.handle_text(json.dumps(msg), self.conn)

    def call(self, name, **args):
        return self.rpc("tools/call", {"name": name, "arguments": args})

    def ok(self, name, **args):
        resp = self.call(name, **args)
        assert "error" not in resp, resp
        return resp["result"]["result"]

    def history(self):
        sid = self.conn.session_id
        return self.server.store.get_tool_call_history(sid)


def test_tools_list_fresh_session():
    c = Client()
    tools = c.rpc("tools/list")["result"]["tools"]
    assert len(tools) == 32
    assert sorted(t["name"] for t in tools) == sorted(TABLE_TOOLS)
    assert set(TOOL_NAMES) == set(TABLE_TOOLS)
    assert {t["group"] for t in tools if t["active"]} == {"context_common"}
    assert [(t["group"], t["name"]) for t in tools] == sorted((t["group"], t["name"]) for t in tools)
    assert c.rpc("tools/list")["result"]["tools"] == tools


def test_schemas_carry_group_parameters():
    c = Client()
    for t in c.rpc("tools/list")["result"]["tools"]:
        props = t["inputSchema"]["properties"]
        assert set(GROUP_PARAMS[t["group"]]) <= set(props), t["name"]


def test_group_activates_on_first_success():
    c = Client()
    assert "error" in c.call("generate-basic-map", region="Atlantis")
    tools = {t["name"]: t for t in c.rpc("tools/list")["result"]["tools"]}
    assert not tools["generate-basic-map"]["active"]
    c.ok("generate-basic-map", region="yizhuang")
    tools = {t["name"]: t for t in c.rpc("tools/list")["result"]["tools"]}
    assert tools["generate-basic-map"]["active"] and tools["preprocess-map-for-tsc"]["active"]
    assert not tools["execute-scenario"]["active"]


def test_generate_basic_map_equals_direct_call():
    c = Client()
    assert c.ok("generate-basic-map", region="yizhuang") == \
        network_summary(generate_basic_map("yizhuang"))
    pre = c.ok("preprocess-map-for-tsc")
    assert pre["yellow_phases"] == 0


def test_protocol_errors_record_nothing():
    c = Client()
    assert c.rpc("does/not/exist")["error"]["code"] == METHOD_NOT_FOUND
    assert c.call("no-such-tool")["error"]["code"] == METHOD_NOT_FOUND
    err = c.call("execute-scenario")["error"]
    assert err["code"] == INVALID_PARAMS and err["data"]["field"] == "scenario_name"
    assert "scenario_name" in err["message"]
    err = c.call("generate-basic-map", region="x", green_time=-1)["error"]
    assert err["code"] == INVALID_PARAMS and err["data"]["path"] == "$.green_time"
    assert c.history() == []


def test_tool_error_records_one_error():
    c = Client()
    c.ok("health_check")
    resp = c.call("execute-scenario", scenario_name="tsc")
    assert resp["error"]["code"] == TOOL_ERROR
    hist = c.history()
    assert [r.outcome for r in hist] == ["ok", "error"]
    assert "generate-basic-map" in hist[1].error_message


def test_one_record_per_successful_call():
    c = Client()
    c.ok("generate-basic-map", region="shanghai")
    c.ok("generate-profiles", persons_num=20)
    c.ok("analyze-requirement", natural_language_input="TSC in Shanghai at midnight")
    assert [r.tool for r in c.history()] == ["generate-basic-map", "generate-profiles",
                                             "analyze-requirement"]
    rec = c.ok("record_tool_call", tool="external", outcome="error", error_message="x")
    assert rec["seq"] == 4 and len(c.history()) == 4


def test_full_pipeline_with_run_handle():
    c = Client()
    c.ok("analyze-requirement", natural_language_input="minimize travel time in Yizhuang at midnight")
    plan = c.ok("agent_router")
    assert [s["module"] for s in plan["steps"]] == ["map", "trip", "sim", "report"]
    c.ok("generate-basic-map", region="Yizhuang")
    c.ok("preprocess-map-for-tsc")
    c.ok("select-origins-destinations", persons_num=80, seed=3)
    c.ok("generate-profiles", persons_num=80, seed=3, gender_distribution={"female": 0.7, "male": 0.3})
    c.ok("configure-departure-times", start_step=0, duration_step=200)
    trips = c.ok("generate-persons-vehicles", persons_num=80, seed=3)
    assert trips["cars"] == 80
    assert c.ok("configure-personalized-driving")["driving_mode"] == "personalized"
    assert c.ok("select-algorithm")["algorithm"] == "max_pressure"
    assert c.ok("demand-recognition")["scenario_name"] == "tsc"
    h = c.ok("execute-scenario", scenario_name="tsc", algorithm="max_pressure", seed=3)
    prog = c.ok("monitor-simulation-progress", handle=h["handle"])
    assert set(prog) >= {"step", "total", "tv", "tp"} and prog["total"] == 200
    rep = c.ok("extract-simulation-metrics", handle=h["handle"])
    assert rep["departed"] > 0 and len(rep["trace_hash"]) == 64
    assert c.ok("monitor-simulation-progress")["step"] == 200


def test_run_handles_are_session_private():
    server = ToolServer()
    a, b = Client(server), Client(server)
    a.ok("generate-basic-map", region="Yizhuang")
    a.ok("generate-persons-vehicles", persons_num=20, duration_step=50)
    h = a.ok("execute-scenario", scenario_name="tsc", duration_step=50)["handle"]
    assert b.call("monitor-simulation-progress", handle=h)["error"]["code"] == TOOL_ERROR


def test_medical_run():
    c = Client()
    c.ok("generate-basic-map", region="Wangjing")
    c.ok("generate-persons-vehicles", persons_num=30)
    h = c.ok("execute-scenario", scenario_name="medical_service")["handle"]
    med = c.ok("extract-simulation-metrics", handle=h)["medical"]
    assert set(med) == {"nearest", "mass_benefit"}


def test_context_tools_round_trip():
    c = Client()
    sid = c.ok("create_session")["session_id"]
    c.ok("update_agent_state", session_id=sid, agent="J0", state={"phase": 1})
    assert c.ok("get_agent_state", session_id=sid, agent="J0")["state"] == {"phase": 1}
    rec = {"step": 5, "junction_id": "J0", "action": {"kind": "set_phase", "phase": 1},
           "reward_after": -3.0, "note": "strategy: exploit-best-action", "phase": 1,
           "bucket": [0, 0, 1]}
    out = c.ok("record_decision", session_id=sid, agent="J0", record=rec, max_session_memory=10)
    assert out["best_reward"] == -3.0
    c.ok("add_background_knowledge", session_id=sid, text="Rush hour starts at 7:30.")
    assert c.ok("get_agent_background", session_id=sid)["background"] == ["Rush hour starts at 7:30."]
    assert len(c.ok("search_conversation", session_id=sid, query="RUSH")["hits"]) == 1
    assert "exploit-best-action" in c.ok("get_conversation_summary", session_id=sid)["summary"]
    data = c.ok("export_session", session_id=sid)["data"]
    other = Client()
    assert other.ok("import_session", data=data)["session_id"] == sid
    assert other.ok("export_session", session_id=sid)["data"] == data
    c.ok("clear_memory", session_id=sid)
    assert c.ok("get_conversation_summary", session_id=sid)["summary"] == ""
    assert c.ok("health_check")["reachable"] is True
    assert c.call("get_session", session_id="missing")["error"]["code"] == TOOL_ERROR
    assert c.call("import_session", data="{")["error"]["code"] == TOOL_ERROR


def test_validate_parameters_tool():
    c = Client()
    assert c.ok("validate-parameters", natural_language_input="TSC in Yizhuang")["valid"]
    assert not c.ok("validate-parameters", natural_language_input='{"persons_num": -1, "regions": ["a"]}')["valid"]
    assert not c.ok("validate-parameters", natural_language_input="hello")["valid"]


def test_envelope_edge_cases():
    c = Client()
    assert c.server.handle_text("{bad json", c.conn) is None
    assert c.server.handle_text('{"id": 9, "method": ', c.conn)["error"]["code"] == PARSE_ERROR
    assert c.server.handle_text('{"id": 9, "method": ', c.conn)["id"] == 9
    assert c.server.handle_text('{"id": 3, "method": "ping"}', c.conn)["error"]["code"] == -32600
    notify = json.dumps({"jsonrpc": "2.0", "method": "ping"})
    assert c.server.handle_text(notify, c.conn) is None
    batch = json.dumps([{"jsonrpc": "2.0", "id": 1, "method": "ping"},
                        {"jsonrpc": "2.0", "id": 2, "method": "nope"}])
    out = c.server.handle_text(batch, c.conn)
    assert [r["id"] for r in out] == [1, 2] and out[1]["error"]["code"] == METHOD_NOT_FOUND
    init = c.rpc("initialize")["result"]
    assert init["session_id"] == c.conn.session_id


def test_explicit_session_binding():
    server = ToolServer()
    a, b = Client(server), Client(server)
    a.rpc("tools/call", {"name": "health_check", "session_id": "shared"})
    b.rpc("tools/call", {"name": "health_check", "session_id": "shared"})
    assert len(server.store.get_tool_call_history("shared")) == 2


def test_stdio_round_trip():
    server = ToolServer()
    lines = [json.dumps({"jsonrpc": "2.0", "id": "a", "method": "initialize"}),
             "",
             "not json at all",
             '{"jsonrpc": "2.0", "id": 5, "method": "tools/list"',
             json.dumps({"jsonrpc": "2.0", "id": 6, "method": "tools/call",
                         "params": {"name": "health_check", "arguments": {}}}),
             json.dumps({"jsonrpc": "2.0", "id": 7, "method": "shutdown"}),
             json.dumps({"jsonrpc": "2.0", "id": 8, "method": "ping"})]
    out = io.StringIO()
    serve_stdio(server, io.StringIO("\n".join(lines) + "\n"), out)
    resps = [json.loads(l) for l in out.getvalue().splitlines()]
    assert [r["id"] for r in resps] == ["a", 5, 6, 7]
    assert resps[1]["error"]["code"] == PARSE_ERROR
    assert resps[2]["result"]["result"]["status"] == "ok"


def _tcp_session(port, tag, n, results):
    with socket.create_connection(("127.0.0.1", port)) as s:
        for i in range(n):
            send_frame(s, {"jsonrpc": "2.0", "id": i, "method": "tools/call",
                           "params": {"name": "record_tool_call",
                                      "arguments": {"tool": f"{tag}-{i}"}}})
            recv_frame(s)
        send_frame(s, {"jsonrpc": "2.0", "id": "h", "method": "tools/call",
                       "params": {"name": "get_tool_call_history", "arguments": {}}})
        results[tag] = recv_frame(s)["result"]


def test_tcp_sessions_are_isolated():
    server = ToolServer()
    tcp, _, port = start_tcp(server)
    try:
        results = {}
        threads = [threading.Thread(target=_tcp_session, args=(port, tag, 25, results))
                   for tag in ("left", "right")]
        for t in threads:
            t.start()
        for t in threads:
            t.join(30)
        for tag in ("left", "right"):
            tools = [r["tool"] for r in results[tag]["result"]["records"]]
            assert tools == [f"{tag}-{i}" for i in range(25)]
        assert results["left"]["session_id"] != results["right"]["session_id"]
        with socket.create_connection(("127.0.0.1", port)) as s:
            s.sendall(len(b"{oops").to_bytes(4, "big") + b"{oops")
            send_frame(s, {"jsonrpc": "2.0", "id": 1, "method": "ping"})
            assert recv_frame(s) == {"jsonrpc": "2.0", "id": 1, "result": {}}
    finally:
        stop_tcp(server, tcp)
