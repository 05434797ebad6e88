"""In-memory session store: tool-call history, shared variables and the memory pool."""

from __future__ import annotations

import copy
import json
import threading
import time
from dataclasses import asdict, dataclass, field, fields

from tsa.errors import ContextLimitExceeded, SchemaMismatch, UnknownSession
from tsa.policies.signal import DecisionRecord

SCHEMA_VERSION = 1
DAY = 86400.0
OUTCOMES = ("ok", "error")


@dataclass(frozen=True)
class MemoryLimits:
    max_conversation_length: int = 500
    max_session_memory: int = 2000
    memory_retention_days: float = 30.0
    auto_summarize_interval: int = 10
    background_info_length: int = 8000
    max_context_variables: int = 256
    context_summary_length: int = 2000

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")

    @classmethod
    def from_dict(cls, d: dict | None) -> "MemoryLimits":
        d = d or {}
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown limits: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ToolCallRecord:
    seq: int
    tool: str
    params: dict = field(default_factory=dict)
    outcome: str = "ok"
    error_message: str | None = None
    duration: float = 0.0

    def __post_init__(self):
        if self.outcome not in OUTCOMES:
            raise ValueError(f"outcome must be one of {OUTCOMES}")
        if (self.outcome == "error") != (self.error_message is not None):
            raise ValueError("error_message is required for errors and forbidden otherwise")

    def text(self) -> str:
        if self.outcome == "error":
            return f"tool {self.tool} #{self.seq} error: {self.error_message}"
        return f"tool {self.tool} #{self.seq} ok"


@dataclass
class Entry:
    """One line of the conversation log; ``search`` and summaries read these."""

    time: float
    kind: str
    text: str


@dataclass
class Session:
    session_id: str
    created_at: float
    limits: MemoryLimits = field(default_factory=MemoryLimits)
    variables: dict = field(default_factory=dict)
    tool_calls: list[ToolCallRecord] = field(default_factory=list)
    agent_states: dict = field(default_factory=dict)
    # memory pool
    decisions: list[tuple[float, str, DecisionRecord]] = field(default_factory=list)
    background: list[str] = field(default_factory=list)
    conversation: list[Entry] = field(default_factory=list)
    next_seq: int = 1

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "limits": asdict(self.limits),
            "variables": self.variables,
            "tool_calls": [asdict(r) for r in self.tool_calls],
            "agent_states": self.agent_states,
            "decisions": [{"time": t, "agent": a, "record": r.to_dict()} for t, a, r in self.decisions],
            "background": self.background,
            "conversation": [asdict(e) for e in self.conversation],
            "next_seq": self.next_seq,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Session":
        return cls(
            session_id=str(d["session_id"]),
            created_at=float(d["created_at"]),
            limits=MemoryLimits.from_dict(d["limits"]),
            variables=dict(d["variables"]),
            tool_calls=[ToolCallRecord(**r) for r in d["tool_calls"]],
            agent_states=dict(d["agent_states"]),
            decisions=[(float(x["time"]), str(x["agent"]), DecisionRecord.from_dict(x["record"]))
                       for x in d["decisions"]],
            background=[str(b) for b in d["background"]],
            conversation=[Entry(**e) for e in d["conversation"]],
            next_seq=int(d["next_seq"]),
        )


def canonical_json(value) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class SessionStore:
    """Thread-safe store; mutations on one session are serialized by its lock.

    ``clock`` returns seconds and is injectable so retention can be tested.
    Entries older than ``memory_retention_days`` are pruned lazily whenever
    the session is read.
    """

    def __init__(self, clock=time.time):
        self.clock = clock
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._guard = threading.Lock()
        self._counter = 0

    # -- sessions -----------------------------------------------------------

    def create_session(self, limits: MemoryLimits | dict | None = None,
                       session_id: str | None = None) -> str:
        if not isinstance(limits, MemoryLimits):
            limits = MemoryLimits.from_dict(limits)
        with self._guard:
            if session_id is None:
                while True:
                    self._counter += 1
                    session_id = f"session-{self._counter:04d}"
                    if session_id not in self._sessions:
                        break
            elif session_id in self._sessions:
                raise ValueError(f"session {session_id!r} already exists")
            self._sessions[session_id] = Session(session_id, self.clock(), limits)
            self._locks[session_id] = threading.RLock()
        return session_id

    def _open(self, sid: str) -> tuple[Session, threading.RLock]:
        with self._guard:
            try:
                return self._sessions[sid], self._locks[sid]
            except KeyError:
                raise UnknownSession(f"unknown session {sid!r}") from None

    def _prune(self, s: Session) -> None:
        horizon = self.clock() - s.limits.memory_retention_days * DAY
        if s.decisions and s.decisions[0][0] < horizon:
            s.decisions = [d for d in s.decisions if d[0] >= horizon]
        if s.conversation and s.conversation[0].time < horizon:
            s.conversation = [e for e in s.conversation if e.time >= horizon]

    def _log(self, s: Session, kind: str, text: str) -> None:
        s.conversation.append(Entry(self.clock(), kind, text))
        excess = len(s.conversation) - s.limits.max_conversation_length
        if excess > 0:
            del s.conversation[:excess]

    def configure_memory(self, sid: str, **limits) -> MemoryLimits:
        """Replace some memory limits; a smaller cap evicts oldest entries at once."""
        s, lock = self._open(sid)
        with lock:
            merged = asdict(s.limits)
            merged.update({k: v for k, v in limits.items() if v is not None})
            s.limits = MemoryLimits.from_dict(merged)
            if len(s.decisions) > s.limits.max_session_memory:
                del s.decisions[:len(s.decisions) - s.limits.max_session_memory]
            if len(s.conversation) > s.limits.max_conversation_length:
                del s.conversation[:len(s.conversation) - s.limits.max_conversation_length]
            return s.limits

    def get_session(self, sid: str) -> Session:
        """A deep-copied snapshot of the session."""
        s, lock = self._open(sid)
        with lock:
            self._prune(s)
            return copy.deepcopy(s)

    def session_ids(self) -> list[str]:
        with self._guard:
            return sorted(self._sessions)

    def export_session(self, sid: str) -> str:
        s, lock = self._open(sid)
        with lock:
            self._prune(s)
            return canonical_json({"schema": SCHEMA_VERSION, "session": s.to_dict()})

    def import_session(self, text: str) -> str:
        """Restore an exported session, replacing any session with the same id."""
        try:
            doc = json.loads(text)
            if not isinstance(doc, dict) or doc.get("schema") != SCHEMA_VERSION:
                raise SchemaMismatch(f"expected schema {SCHEMA_VERSION}")
            session = Session.from_dict(doc["session"])
        except SchemaMismatch:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise SchemaMismatch(f"not a session export: {exc}") from exc
        with self._guard:
            self._sessions[session.session_id] = session
            self._locks.setdefault(session.session_id, threading.RLock())
        return session.session_id

    # -- common variables ---------------------------------------------------

    def set_variable(self, sid: str, key: str, value) -> None:
        s, lock = self._open(sid)
        with lock:
            if key not in s.variables and len(s.variables) >= s.limits.max_context_variables:
                raise ContextLimitExceeded(f"max_context_variables={s.limits.max_context_variables}")
            s.variables[key] = copy.deepcopy(value)

    def get_variable(self, sid: str, key: str, default=None):
        s, lock = self._open(sid)
        with lock:
            return copy.deepcopy(s.variables.get(key, default))

    def record_tool_call(self, sid: str, tool: str, params: dict | None = None, outcome: str = "ok",
                         error_message: str | None = None, duration: float = 0.0) -> int:
        s, lock = self._open(sid)
        with lock:
            rec = ToolCallRecord(s.next_seq, tool, copy.deepcopy(params or {}), outcome,
                                 error_message, float(duration))
            s.next_seq += 1
            s.tool_calls.append(rec)
            self._log(s, "tool", rec.text())
            return rec.seq

    def get_tool_call_history(self, sid: str, tool: str | None = None,
                              outcome: str | None = None) -> list[ToolCallRecord]:
        s, lock = self._open(sid)
        with lock:
            return [copy.deepcopy(r) for r in s.tool_calls
                    if (tool is None or r.tool == tool) and (outcome is None or r.outcome == outcome)]

    def get_agent_state(self, sid: str, agent: str):
        s, lock = self._open(sid)
        with lock:
            return copy.deepcopy(s.agent_states.get(agent))

    def update_agent_state(self, sid: str, agent: str, state) -> None:
        """Merge a dict into the agent's dict state; any other value replaces it."""
        s, lock = self._open(sid)
        with lock:
            cur = s.agent_states.get(agent)
            if isinstance(cur, dict) and isinstance(state, dict):
                cur.update(copy.deepcopy(state))
            else:
                s.agent_states[agent] = copy.deepcopy(state)

    # -- memory pool --------------------------------------------------------

    def record_decision(self, sid: str, agent: str, record: DecisionRecord) -> None:
        s, lock = self._open(sid)
        with lock:
            self._prune(s)
            s.decisions.append((self.clock(), agent, copy.deepcopy(record)))
            excess = len(s.decisions) - s.limits.max_session_memory
            if excess > 0:
                del s.decisions[:excess]
            self._log(s, "decision", f"{agent} step {record.step}: {record.note} "
                                     f"(reward {record.reward_after:.3f})")

    def decisions(self, sid: str, agent: str | None = None) -> list[DecisionRecord]:
        s, lock = self._open(sid)
        with lock:
            self._prune(s)
            return [copy.deepcopy(r) for _, a, r in s.decisions if agent is None or a == agent]

    def best_decision(self, sid: str, agent: str, bucket: tuple | None = None) -> DecisionRecord | None:
        """Highest ``reward_after`` for the agent (in ``bucket`` if given); ties go to the newest."""
        best = None
        for rec in self.decisions(sid, agent):
            if bucket is not None and rec.bucket != tuple(bucket):
                continue
            if best is None or rec.reward_after >= best.reward_after:
                best = rec
        return best

    def add_background_knowledge(self, sid: str, text: str) -> None:
        s, lock = self._open(sid)
        with lock:
            used = sum(len(b) for b in s.background)
            if used + len(text) > s.limits.background_info_length:
                raise ContextLimitExceeded(
                    f"background_info_length={s.limits.background_info_length} would be exceeded")
            s.background.append(text)
            self._log(s, "background", text)

    def get_agent_background(self, sid: str) -> list[str]:
        s, lock = self._open(sid)
        with lock:
            return list(s.background)

    def add_note(self, sid: str, text: str, kind: str = "note") -> None:
        s, lock = self._open(sid)
        with lock:
            self._log(s, kind, text)

    def search_conversation(self, sid: str, query: str) -> list[Entry]:
        q = query.lower()
        s, lock = self._open(sid)
        with lock:
            self._prune(s)
            return [copy.copy(e) for e in s.conversation if q in e.text.lower()]

    def get_conversation_summary(self, sid: str) -> str:
        """The last ``auto_summarize_interval`` entries, cut to ``context_summary_length``."""
        s, lock = self._open(sid)
        with lock:
            self._prune(s)
            tail = s.conversation[-s.limits.auto_summarize_interval:]
            return "\n".join(f"[{e.kind}] {e.text}" for e in tail)[:s.limits.context_summary_length]

    def clear_memory(self, sid: str) -> None:
        """Drop decisions and conversation; variables, tool history and background stay."""
        s, lock = self._open(sid)
        with lock:
            s.decisions.clear()
            s.conversation.clear()

    def health_check(self) -> dict:
        with self._guard:
            return {"status": "ok", "reachable": True, "sessions": len(self._sessions)}
