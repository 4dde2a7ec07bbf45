from .base import (
    ALPN,
    DEFAULT_KEEPALIVE_MS,
    KEEPALIVE_MISS_LIMIT,
    ConnectError,
    Host,
    Session,
    SessionClosedError,
    TransportError,
)
from .sim import SimHost, SimNetwork, SimSession

__all__ = [
    "ALPN",
    "DEFAULT_KEEPALIVE_MS",
    "KEEPALIVE_MISS_LIMIT",
    "ConnectError",
    "Host",
    "Session",
    "SessionClosedError",
    "TransportError",
    "SimHost",
    "SimNetwork",
    "SimSession",
]
