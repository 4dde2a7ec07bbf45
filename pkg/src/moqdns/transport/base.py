"""Session and host abstractions shared by the simulator and live bindings.

A daemon interacts with the world only through a Host: timers, session
dialing/listening, and datagram send/receive. The same daemon code then runs
unmodified on the deterministic simulator and on the live network binding.
"""

from __future__ import annotations

import random
from typing import Callable, Optional, Protocol

from ..wire import ControlMessage, ObjectMessage

# Application protocol token. Deliberately not the IETF MoQT token: this
# profile is not draft-interoperable and must not cross-talk with real stacks.
ALPN = "dnsmoqt-lite/1"

DEFAULT_KEEPALIVE_MS = 30_000
KEEPALIVE_MISS_LIMIT = 3


class TransportError(Exception):
    """Base class for transport failures."""


class ConnectError(TransportError):
    """Session establishment failed: unreachable endpoint, ALPN mismatch, timeout."""


class SessionClosedError(TransportError):
    """The session is no longer live; nothing was sent."""


class Session:
    """One established session: an ordered control channel plus a factory
    for whole-object deliveries, each on its own unidirectional stream.

    Owners assign the callbacks right after receiving the session and before
    returning control to the event loop.
    """

    peer_address: str
    alpn: str

    def __init__(self) -> None:
        self.on_control: Optional[Callable[[ControlMessage], None]] = None
        self.on_object: Optional[Callable[[ObjectMessage], None]] = None
        self.on_closed: Optional[Callable[[str], None]] = None

    @property
    def live(self) -> bool:
        raise NotImplementedError

    def send_control(self, msg: ControlMessage) -> None:
        raise NotImplementedError

    def send_object(self, obj: ObjectMessage) -> None:
        raise NotImplementedError

    def close(self, reason: str = "local close") -> None:
        raise NotImplementedError

    def start_keepalive(self, interval_ms: int = DEFAULT_KEEPALIVE_MS) -> None:
        """Probe liveness every interval; after KEEPALIVE_MISS_LIMIT missed
        probes the session is marked dead and on_closed fires."""
        raise NotImplementedError


class Timer(Protocol):
    def cancel(self) -> None: ...


class Host(Protocol):
    """Execution environment handed to every daemon."""

    name: str
    address: str
    rng: random.Random

    def now_ms(self) -> int: ...

    def call_later(self, delay_ms: int, fn: Callable[[], None]) -> Timer: ...

    def open_session(
        self,
        address: str,
        *,
        alpn: str = ALPN,
        on_open: Callable[[Session], None],
        on_error: Callable[[Exception], None],
    ) -> None: ...

    def listen_moqt(self, on_session: Callable[[Session], None], *, alpn: str = ALPN) -> None: ...

    def send_udp(self, address: str, payload: bytes) -> None: ...

    def listen_udp(self, handler: Callable[[str, bytes], None]) -> None: ...

    def metric(self, kind: str, **fields) -> None: ...
