"""Session-authenticated REST + WebSocket layer."""

from .app import ApiError, Gateway, GatewayServer, WS_PROTOCOL, build_app

__all__ = ["ApiError", "Gateway", "GatewayServer", "WS_PROTOCOL", "build_app"]
