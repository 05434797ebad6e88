"""JSON-RPC tool server over the module operations."""

from tsa.mcpserver.registry import DEFAULT_ACTIVE, GROUP_PARAMS, GROUPS, TOOL_NAMES, ToolDescriptor
from tsa.mcpserver.server import (
    INVALID_PARAMS,
    INVALID_REQUEST,
    METHOD_NOT_FOUND,
    PARSE_ERROR,
    TOOL_ERROR,
    Connection,
    RpcError,
    ToolServer,
    recv_frame,
    send_frame,
    serve_stdio,
    serve_tcp,
    start_tcp,
    stop_tcp,
)
from tsa.mcpserver.tools import ToolError

__all__ = [
    "DEFAULT_ACTIVE",
    "GROUPS",
    "GROUP_PARAMS",
    "INVALID_PARAMS",
    "INVALID_REQUEST",
    "METHOD_NOT_FOUND",
    "PARSE_ERROR",
    "TOOL_ERROR",
    "TOOL_NAMES",
    "Connection",
    "RpcError",
    "ToolDescriptor",
    "ToolError",
    "ToolServer",
    "recv_frame",
    "send_frame",
    "serve_stdio",
    "serve_tcp",
    "start_tcp",
    "stop_tcp",
]
