"""Session store and memory pool shared by the orchestrator, server and agents."""

from tsa.context.store import (
    SCHEMA_VERSION,
    Entry,
    MemoryLimits,
    Session,
    SessionStore,
    ToolCallRecord,
    canonical_json,
)

__all__ = ["SCHEMA_VERSION", "Entry", "MemoryLimits", "Session", "SessionStore",
           "ToolCallRecord", "canonical_json"]
