"""JSON-RPC 2.0 dispatch with lazy tool groups, plus stdio and TCP transports."""

from __future__ import annotations

import json
import logging
import re
import socket
import socketserver
import struct
import threading
import time

from jsonschema import Draft202012Validator

from tsa.context import SessionStore
from tsa.errors import TsaError, UnknownSession
from tsa.mcpserver.registry import DEFAULT_ACTIVE, build_descriptors
from tsa.mcpserver.tools import HANDLERS, CallContext, Workspace, jsonable

log = logging.getLogger(__name__)

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
TOOL_ERROR = -32000
PROTOCOL_VERSION = "2024-11-05"

_ID_RE = re.compile(r'"id"\s*:\s*("(?:[^"\\]|\\.)*"|-?\d+)')
_REQUIRED_RE = re.compile(r"'(.+)' is a required property")


class RpcError(Exception):
    def __init__(self, code: int, message: str, data=None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.data = data


class Connection:
    """Per-connection state: the bound session and in-order processing."""

    def __init__(self):
        self.session_id: str | None = None
        self.lock = threading.Lock()


class ToolServer:
    def __init__(self, store: SessionStore | None = None):
        self.store = store or SessionStore()
        self.descriptors = build_descriptors()
        self._validators = {n: Draft202012Validator(d.params_schema) for n, d in self.descriptors.items()}
        self._active: dict[str, set[str]] = {}
        self._workspaces: dict[str, Workspace] = {}
        self.runs: dict = {}
        self._run_lock = threading.Lock()
        self._guard = threading.Lock()
        self._handles = 0
        self.closing = threading.Event()

    # -- sessions -----------------------------------------------------------

    def _bind(self, conn: Connection, requested: str | None) -> str:
        if requested:
            try:
                self.store.get_session(requested)
            except UnknownSession:
                self.store.create_session(session_id=requested)
            conn.session_id = conn.session_id or requested
            return requested
        if conn.session_id is None:
            conn.session_id = self.store.create_session()
        return conn.session_id

    def _state(self, sid: str) -> tuple[set[str], Workspace]:
        with self._guard:
            active = self._active.setdefault(sid, set(DEFAULT_ACTIVE))
            ws = self._workspaces.setdefault(sid, Workspace())
            return active, ws

    def _new_handle(self) -> str:
        with self._guard:
            self._handles += 1
            return f"run-{self._handles:04d}"

    # -- methods ------------------------------------------------------------

    def list_tools(self, sid: str) -> list[dict]:
        active, _ = self._state(sid)
        ds = sorted(self.descriptors.values(), key=lambda d: (d.group, d.name))
        return [d.to_dict(d.group in active) for d in ds]

    def call_tool(self, sid: str, name: str, arguments: dict | None):
        if name not in self.descriptors:
            raise RpcError(METHOD_NOT_FOUND, f"unknown tool {name!r}")
        args = {} if arguments is None else arguments
        if not isinstance(args, dict):
            raise RpcError(INVALID_PARAMS, "arguments must be an object", {"path": "$"})
        errors = sorted(self._validators[name].iter_errors(args), key=lambda e: list(e.absolute_path))
        if errors:
            err = errors[0]
            path = [str(p) for p in err.absolute_path]
            m = _REQUIRED_RE.match(err.message) if err.validator == "required" else None
            if m:
                path.append(m.group(1))
            pointer = "$" + "".join(f".{p}" for p in path)
            raise RpcError(INVALID_PARAMS, f"invalid params for {name}: {err.message} at {pointer}",
                           {"path": pointer, "field": path[-1] if path else None})
        desc = self.descriptors[name]
        active, ws = self._state(sid)
        ctx = CallContext(self.store, sid, ws, self.runs, self._new_handle, self._run_lock)
        t0 = time.perf_counter()
        try:
            result = jsonable(HANDLERS[name](ctx, dict(args)))
        except Exception as exc:  # every tool failure is a -32000 with one error record
            msg = f"{type(exc).__name__}: {exc}"
            if not isinstance(exc, (TsaError, ValueError, KeyError)):
                log.exception("tool %s crashed", name)
            if name != "record_tool_call":
                self.store.record_tool_call(sid, name, jsonable(args), "error", msg,
                                            time.perf_counter() - t0)
            raise RpcError(TOOL_ERROR, msg, {"tool": name}) from exc
        if name != "record_tool_call":
            # the supplied record is that call's own history entry
            self.store.record_tool_call(sid, name, jsonable(args), "ok", None, time.perf_counter() - t0)
        with self._guard:
            active.add(desc.group)
        return result

    def dispatch(self, req: dict, conn: Connection):
        method = req.get("method")
        params = req.get("params") or {}
        if not isinstance(params, dict):
            raise RpcError(INVALID_PARAMS, "params must be an object", {"path": "$"})
        if method == "initialize":
            sid = self._bind(conn, params.get("session_id"))
            return {"protocolVersion": PROTOCOL_VERSION, "serverInfo": {"name": "tsa", "version": "0.1.0"},
                    "capabilities": {"tools": {"listChanged": False}}, "session_id": sid}
        if method == "tools/list":
            sid = self._bind(conn, params.get("session_id"))
            return {"tools": self.list_tools(sid), "session_id": sid}
        if method == "tools/call":
            if not isinstance(params.get("name"), str):
                raise RpcError(INVALID_PARAMS, "tools/call needs a tool name", {"path": "$.name"})
            sid = self._bind(conn, params.get("session_id"))
            return {"result": self.call_tool(sid, params["name"], params.get("arguments")),
                    "session_id": sid}
        if method == "ping":
            return {}
        if method == "shutdown":
            self.closing.set()
            return {}
        raise RpcError(METHOD_NOT_FOUND, f"method not found: {method!r}")

    # -- envelopes ----------------------------------------------------------

    def handle_request(self, req, conn: Connection) -> dict | None:
        if not isinstance(req, dict) or req.get("jsonrpc") != "2.0" or not isinstance(req.get("method"), str):
            rid = req.get("id") if isinstance(req, dict) else None
            return _error(rid, INVALID_REQUEST, "invalid JSON-RPC 2.0 request")
        notify = "id" not in req
        rid = req.get("id")
        try:
            with conn.lock:
                result = self.dispatch(req, conn)
        except RpcError as exc:
            return None if notify else _error(rid, exc.code, exc.message, exc.data)
        return None if notify else {"jsonrpc": "2.0", "id": rid, "result": result}

    def handle_text(self, text: str, conn: Connection):
        """One framed message in, the response object (or None) out."""
        try:
            msg = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            m = _ID_RE.search(text if isinstance(text, str) else "")
            if m is None:
                log.warning("dropping unparseable message without id: %s", exc)
                return None
            return _error(json.loads(m.group(1)), PARSE_ERROR, f"parse error: {exc}")
        if isinstance(msg, list):
            if not msg:
                return _error(None, INVALID_REQUEST, "empty batch")
            out = [r for r in (self.handle_request(m, conn) for m in msg) if r is not None]
            return out or None
        return self.handle_request(msg, conn)


def _error(rid, code: int, message: str, data=None) -> dict:
    err = {"code": code, "message": message}
    if data is not None:
        err["data"] = data
    return {"jsonrpc": "2.0", "id": rid, "error": err}


# -- stdio ------------------------------------------------------------------

def serve_stdio(server: ToolServer, infile, outfile) -> None:
    """Newline-delimited JSON-RPC until EOF or a shutdown request."""
    conn = Connection()
    for line in infile:
        line = line.strip()
        if not line:
            continue
        resp = server.handle_text(line, conn)
        if resp is not None:
            outfile.write(json.dumps(resp, separators=(",", ":")) + "\n")
            outfile.flush()
        if server.closing.is_set():
            break


# -- tcp --------------------------------------------------------------------

MAX_FRAME = 64 * 1024 * 1024


def send_frame(sock: socket.socket, obj) -> None:
    data = json.dumps(obj, separators=(",", ":")).encode()
    sock.sendall(struct.pack(">I", len(data)) + data)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def recv_frame(sock: socket.socket):
    head = _recv_exact(sock, 4)
    if head is None:
        return None
    (n,) = struct.unpack(">I", head)
    body = _recv_exact(sock, n)
    return None if body is None else json.loads(body.decode())


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        server: ToolServer = self.server.tool_server
        conn = Connection()
        sock = self.request
        sock.settimeout(0.25)
        while not server.closing.is_set():
            try:
                head = sock.recv(4, socket.MSG_PEEK)
            except socket.timeout:
                continue
            except OSError:
                return
            if not head:
                return
            sock.settimeout(None)
            try:
                head = _recv_exact(sock, 4)
                if head is None:
                    return
                (n,) = struct.unpack(">I", head)
                if n > MAX_FRAME:
                    log.warning("frame of %d bytes exceeds limit; closing", n)
                    return
                body = _recv_exact(sock, n)
                if body is None:
                    return
                resp = server.handle_text(body.decode("utf-8", "replace"), conn)
                if resp is not None:
                    send_frame(sock, resp)
            except OSError:
                return
            finally:
                sock.settimeout(0.25)


class _TcpServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = False
    block_on_close = True


def start_tcp(server: ToolServer, host: str = "127.0.0.1", port: int = 0):
    """Start serving length-prefixed frames; returns (tcp_server, thread, port)."""
    tcp = _TcpServer((host, port), _Handler)
    tcp.tool_server = server
    thread = threading.Thread(target=tcp.serve_forever, kwargs={"poll_interval": 0.1}, daemon=True)
    thread.start()
    return tcp, thread, tcp.server_address[1]


def stop_tcp(server: ToolServer, tcp) -> None:
    """Stop accepting, let handlers finish their current request, then close."""
    server.closing.set()
    tcp.shutdown()
    tcp.server_close()


def serve_tcp(server: ToolServer, host: str = "127.0.0.1", port: int = 8765) -> None:  # pragma: no cover
    tcp, thread, bound = start_tcp(server, host, port)
    log.info("listening on %s:%d", host, bound)
    try:
        while not server.closing.wait(0.5):
            pass
    except KeyboardInterrupt:
        pass
    finally:
        stop_tcp(server, tcp)
