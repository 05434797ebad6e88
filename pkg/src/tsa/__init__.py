"""Agent-driven microscopic traffic simulation with a JSON-RPC tool server."""

__version__ = "0.1.0"
