"""Deterministic in-process network simulator.

Events run on a logical millisecond clock ordered by (time, sequence
number), so two runs with the same seed and topology produce identical
traces. Message delivery costs exactly the link's one-way delay; a session
handshake costs (handshake_rtts + session_setup_rtts) round trips before
the dialer sees the session.

All control and object messages are serialized through the wire codec at
the sending edge and decoded at the receiving edge, so byte counts are
exact and every simulated exchange exercises the codecs.
"""

from __future__ import annotations

import heapq
import random
from typing import Callable, Optional

from .. import wire
from .base import (
    ALPN,
    ConnectError,
    KEEPALIVE_MISS_LIMIT,
    Session,
    SessionClosedError,
)

# Modeled size of one transport-level handshake or keepalive flight.
HANDSHAKE_FLIGHT_BYTES = 48
PROBE_BYTES = 16


class SimTimer:
    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class SimNetwork:
    """Topology, logical clock, event heap, and measurement sinks."""

    def __init__(
        self,
        *,
        seed: int = 0,
        default_delay_ms: Optional[int] = None,
        handshake_rtts: int = 1,
        session_setup_rtts: int = 1,
    ):
        self.now_ms = 0
        self.rng = random.Random(seed)
        self.handshake_rtts = handshake_rtts
        self.session_setup_rtts = session_setup_rtts
        self._default_delay = default_delay_ms
        self._heap: list[tuple[int, int, SimTimer, Callable[[], None]]] = []
        self._seq = 0
        self.hosts: dict[str, "SimHost"] = {}
        self._by_address: dict[str, "SimHost"] = {}
        self._links: dict[frozenset, int] = {}
        self._cut_links: set[frozenset] = set()
        self.events: list[dict] = []
        self.link_stats: dict[tuple[str, str], dict[str, list[int]]] = {}

    # -- topology ---------------------------------------------------------

    def host(self, name: str, address: Optional[str] = None) -> "SimHost":
        if name in self.hosts:
            return self.hosts[name]
        if address is None:
            address = f"10.0.0.{len(self.hosts) + 1}"
        node = SimHost(self, name, address)
        self.hosts[name] = node
        self._by_address[address] = node
        return node

    def link(self, a: str, b: str, delay_ms: int) -> None:
        self._links[frozenset((a, b))] = delay_ms

    def cut(self, a: str, b: str) -> None:
        self._cut_links.add(frozenset((a, b)))

    def restore(self, a: str, b: str) -> None:
        self._cut_links.discard(frozenset((a, b)))

    def delay_between(self, a: str, b: str) -> Optional[int]:
        key = frozenset((a, b))
        if key in self._links:
            return self._links[key]
        return self._default_delay

    def is_cut(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self._cut_links

    def resolve(self, address: str) -> Optional["SimHost"]:
        return self._by_address.get(address)

    # -- event loop -------------------------------------------------------

    def schedule(self, delay_ms: int, fn: Callable[[], None]) -> SimTimer:
        timer = SimTimer()
        heapq.heappush(self._heap, (self.now_ms + max(0, int(delay_ms)), self._seq, timer, fn))
        self._seq += 1
        return timer

    def run(self, until_ms: Optional[int] = None, max_events: int = 5_000_000) -> None:
        processed = 0
        while self._heap:
            t, _, timer, fn = self._heap[0]
            if until_ms is not None and t > until_ms:
                break
            heapq.heappop(self._heap)
            if timer.cancelled:
                continue
            self.now_ms = t
            fn()
            processed += 1
            if processed > max_events:
                raise RuntimeError(f"event budget exceeded at t={self.now_ms}ms")
        if until_ms is not None and until_ms > self.now_ms:
            self.now_ms = until_ms

    # -- measurement ------------------------------------------------------

    def record(self, kind: str, node: str, **fields) -> None:
        self.events.append({"t_ms": self.now_ms, "node": node, "kind": kind, **fields})

    def count_link(self, src: str, dst: str, category: str, nbytes: int) -> None:
        per_link = self.link_stats.setdefault((src, dst), {})
        entry = per_link.setdefault(category, [0, 0])
        entry[0] += 1
        entry[1] += nbytes

    def link_counts(self) -> dict:
        """Stable nested dict {src: {dst: {category: {msgs, bytes}}}}."""
        out: dict = {}
        for (src, dst), cats in sorted(self.link_stats.items()):
            for category, (msgs, nbytes) in sorted(cats.items()):
                out.setdefault(src, {}).setdefault(dst, {})[category] = {
                    "msgs": msgs,
                    "bytes": nbytes,
                }
        return out


class SimHost:
    """One endpoint: binds listeners, dials sessions, sends datagrams."""

    def __init__(self, network: SimNetwork, name: str, address: str):
        self.network = network
        self.name = name
        self.address = address
        self._moqt_listeners: dict[str, Callable[[Session], None]] = {}
        self._udp_handler: Optional[Callable[[str, bytes], None]] = None

    @property
    def rng(self) -> random.Random:
        return self.network.rng

    def now_ms(self) -> int:
        return self.network.now_ms

    def call_later(self, delay_ms: int, fn: Callable[[], None]) -> SimTimer:
        return self.network.schedule(delay_ms, fn)

    def metric(self, kind: str, **fields) -> None:
        self.network.record(kind, self.name, **fields)

    # -- MoQT sessions ----------------------------------------------------

    def listen_moqt(self, on_session: Callable[[Session], None], *, alpn: str = ALPN) -> None:
        self._moqt_listeners[alpn] = on_session

    def open_session(
        self,
        address: str,
        *,
        alpn: str = ALPN,
        on_open: Callable[[Session], None],
        on_error: Callable[[Exception], None],
    ) -> None:
        net = self.network
        peer = net.resolve(address)
        if peer is None or net.delay_between(self.name, peer.name) is None:
            net.schedule(0, lambda: on_error(ConnectError(f"no route to {address}")))
            return
        d = net.delay_between(self.name, peer.name)
        assert d is not None
        # Flight k flows dialer->peer when k is odd, peer->dialer when even.
        # The peer is established when it sends the final flight; the dialer
        # when it receives it: (handshake_rtts + session_setup_rtts) RTTs.
        flights = 2 * (net.handshake_rtts + net.session_setup_rtts)
        state: dict = {}

        def make_pair() -> tuple["SimSession", "SimSession"]:
            client_side = SimSession(self, peer, alpn)
            server_side = SimSession(peer, self, alpn)
            client_side._peer = server_side
            server_side._peer = client_side
            return client_side, server_side

        if flights == 0:
            # Degenerate cost model (both RTT knobs zero): establish instantly.
            if peer._moqt_listeners.get(alpn) is None:
                net.schedule(0, lambda: on_error(ConnectError(f"connection refused by {address}")))
                return
            client_side, server_side = make_pair()
            net.schedule(0, lambda: peer._moqt_listeners[alpn](server_side))
            net.schedule(0, lambda: on_open(client_side))
            return

        def send_flight(k: int) -> None:
            src, dst = (self.name, peer.name) if k % 2 == 1 else (peer.name, self.name)
            if net.is_cut(src, dst):
                return  # handshake stalls; the dialer's own timeout applies
            net.count_link(src, dst, "transport", HANDSHAKE_FLIGHT_BYTES)
            net.schedule(d, lambda: arrive_flight(k))

        def arrive_flight(k: int) -> None:
            if net.is_cut(self.name, peer.name):
                return
            if k == 1:
                acceptor = peer._moqt_listeners.get(alpn)
                if acceptor is None:
                    reason = (
                        f"alpn mismatch at {address}"
                        if peer._moqt_listeners
                        else f"connection refused by {address}"
                    )
                    net.count_link(peer.name, self.name, "transport", HANDSHAKE_FLIGHT_BYTES)
                    net.schedule(d, lambda: on_error(ConnectError(reason)))
                    return
                state["acceptor"] = acceptor
            if k == flights:
                on_open(state["client_side"])
                return
            if k == flights - 1:
                # The peer sends the last flight now and is live from here on.
                client_side, server_side = make_pair()
                state["client_side"] = client_side
                state["acceptor"](server_side)
            send_flight(k + 1)

        send_flight(1)

    # -- UDP ---------------------------------------------------------------

    def listen_udp(self, handler: Callable[[str, bytes], None]) -> None:
        self._udp_handler = handler

    def send_udp(self, address: str, payload: bytes) -> None:
        net = self.network
        peer = net.resolve(address)
        if peer is None:
            return
        d = net.delay_between(self.name, peer.name)
        if d is None:
            return
        net.count_link(self.name, peer.name, "udp", len(payload))

        def deliver() -> None:
            if net.is_cut(self.name, peer.name) or peer._udp_handler is None:
                return
            peer._udp_handler(self.address, payload)

        net.schedule(d, deliver)


class SimSession(Session):
    """One side of an established session."""

    def __init__(self, host: SimHost, peer_host: SimHost, alpn: str):
        super().__init__()
        self._host = host
        self._peer_host = peer_host
        self._peer: "SimSession" = None  # type: ignore[assignment]
        self._live = True
        self.alpn = alpn
        self.peer_address = peer_host.address
        self._ka_timer: Optional[SimTimer] = None
        self._ka_misses = 0
        self._probe_seq = 0
        self._acked_probes: set[int] = set()

    @property
    def live(self) -> bool:
        return self._live

    def _net(self) -> SimNetwork:
        return self._host.network

    def _require_live(self) -> None:
        if not self._live:
            raise SessionClosedError(f"session to {self.peer_address} is closed")

    def _link_delay(self) -> int:
        d = self._net().delay_between(self._host.name, self._peer_host.name)
        assert d is not None
        return d

    def _deliver(self, category: str, nbytes: int, fn: Callable[[], None]) -> None:
        net = self._net()
        net.count_link(self._host.name, self._peer_host.name, category, nbytes)

        def arrive() -> None:
            if net.is_cut(self._host.name, self._peer_host.name):
                return
            if not self._peer._live:
                return
            fn()

        net.schedule(self._link_delay(), arrive)

    def send_control(self, msg: wire.ControlMessage) -> None:
        self._require_live()
        data = wire.encode_control(msg)

        def fn() -> None:
            decoded, _ = wire.decode_control(data)
            if self._peer.on_control is not None:
                self._peer.on_control(decoded)

        self._deliver("control", len(data), fn)

    def send_object(self, obj: wire.ObjectMessage) -> None:
        self._require_live()
        data = wire.encode_object(obj)

        def fn() -> None:
            decoded, _ = wire.decode_object(data)
            if self._peer.on_object is not None:
                self._peer.on_object(decoded)

        self._deliver("object", len(data), fn)

    def close(self, reason: str = "local close") -> None:
        if not self._live:
            return
        self._live = False
        self._stop_keepalive()
        peer = self._peer
        net = self._net()

        def notify() -> None:
            if not net.is_cut(self._host.name, self._peer_host.name):
                peer._die("peer closed")

        net.schedule(self._link_delay(), notify)

    def _die(self, reason: str) -> None:
        if not self._live:
            return
        self._live = False
        self._stop_keepalive()
        if self.on_closed is not None:
            self.on_closed(reason)

    # -- keepalive ---------------------------------------------------------

    def start_keepalive(self, interval_ms: int = 30_000) -> None:
        self._stop_keepalive()
        self._ka_misses = 0
        self._schedule_probe(interval_ms)

    def _stop_keepalive(self) -> None:
        if self._ka_timer is not None:
            self._ka_timer.cancel()
            self._ka_timer = None

    def _schedule_probe(self, interval_ms: int) -> None:
        self._ka_timer = self._net().schedule(interval_ms, lambda: self._probe(interval_ms))

    def _probe(self, interval_ms: int) -> None:
        if not self._live:
            return
        net = self._net()
        probe_id = self._probe_seq
        self._probe_seq += 1
        net.count_link(self._host.name, self._peer_host.name, "transport", PROBE_BYTES)
        d = self._link_delay()

        def arrive() -> None:
            if net.is_cut(self._host.name, self._peer_host.name) or not self._peer._live:
                return
            net.count_link(self._peer_host.name, self._host.name, "transport", PROBE_BYTES)

            def ack() -> None:
                if net.is_cut(self._host.name, self._peer_host.name) or not self._live:
                    return
                self._acked_probes.add(probe_id)
                self._ka_misses = 0

            net.schedule(d, ack)

        net.schedule(d, arrive)

        def check() -> None:
            if not self._live:
                return
            if probe_id in self._acked_probes:
                self._acked_probes.discard(probe_id)
                return
            self._ka_misses += 1
            if self._ka_misses >= KEEPALIVE_MISS_LIMIT:
                self._die("keepalive timeout")

        # A probe is judged after one round trip; three straight misses kill
        # the session, bounding detection by 3*interval + RTT after silence.
        net.schedule(2 * d, check)
        self._schedule_probe(interval_ms)
