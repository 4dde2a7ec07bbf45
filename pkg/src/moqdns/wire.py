"""Binary codec for the MoQT-lite control and object messages.

Every message is framed as [type varint][length varint][body] so a stream
of concatenated frames can be split without knowing the message types in
advance. Varints use the 2-bit length prefix scheme (1/2/4/8 byte forms).
All functions here are pure and operate on immutable byte strings.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Union

VARINT_MAX = 2**62 - 1

# One protocol version for the whole profile; negotiated in ClientSetup/ServerSetup.
PROTOCOL_VERSION = 1

# Track identity budget: three namespace elements (1 + 2 + 2 bytes) plus the
# track name must fit in 4096 bytes, leaving 4091 for the name.
MAX_TRACK_IDENTITY_BYTES = 4096
NAMESPACE_ELEMENT_SIZES = (1, 2, 2)
MAX_TRACKNAME_BYTES = MAX_TRACK_IDENTITY_BYTES - sum(NAMESPACE_ELEMENT_SIZES)

# Error codes carried in SubscribeError/FetchError.
ERR_INTERNAL = 0x0
ERR_TRACK_NOT_SERVED = 0x1
ERR_SUBSCRIPTIONS_UNAVAILABLE = 0x2
ERR_LIMIT_EXCEEDED = 0x3


class WireError(Exception):
    """Base class for decode failures."""


class NeedMoreData(WireError):
    """The input ends before the current frame or field is complete."""


class ProtocolError(WireError):
    """The input is complete but malformed."""


def encode_varint(value: int) -> bytes:
    """Encode an integer in [0, 2^62-1] as a minimal-length prefixed varint."""
    if value < 0 or value > VARINT_MAX:
        raise ValueError(f"varint out of range: {value}")
    if value <= 0x3F:
        return struct.pack(">B", value)
    if value <= 0x3FFF:
        return struct.pack(">H", value | 0x4000)
    if value <= 0x3FFFFFFF:
        return struct.pack(">I", value | 0x80000000)
    return struct.pack(">Q", value | 0xC000000000000000)


def varint_length(first_byte: int) -> int:
    """Encoded length implied by the 2-bit prefix of the first byte."""
    return 1 << (first_byte >> 6)


def decode_varint(data: bytes, offset: int = 0) -> tuple[int, int]:
    """Decode a prefixed varint.

    Returns (value, bytes_consumed). Raises NeedMoreData if the buffer ends
    before the encoded length is available. Non-minimal encodings decode to
    their value; re-encoding yields the canonical form.
    """
    if offset >= len(data):
        raise NeedMoreData("empty varint")
    length = varint_length(data[offset])
    if offset + length > len(data):
        raise NeedMoreData(f"varint needs {length} bytes")
    chunk = data[offset : offset + length]
    if length == 1:
        return chunk[0] & 0x3F, 1
    if length == 2:
        return struct.unpack(">H", chunk)[0] & 0x3FFF, 2
    if length == 4:
        return struct.unpack(">I", chunk)[0] & 0x3FFFFFFF, 4
    return struct.unpack(">Q", chunk)[0] & 0x3FFFFFFFFFFFFFFF, 8


@dataclass(frozen=True)
class TrackKey:
    """Identity of a track: a 3-element namespace tuple plus a track name.

    Element sizes are fixed (1, 2, 2 bytes); the combined identity must fit
    in MAX_TRACK_IDENTITY_BYTES. Equality is bytewise.
    """

    namespace: tuple[bytes, bytes, bytes]
    trackname: bytes

    def __post_init__(self) -> None:
        if len(self.namespace) != len(NAMESPACE_ELEMENT_SIZES):
            raise ValueError(f"namespace must have {len(NAMESPACE_ELEMENT_SIZES)} elements")
        for element, want in zip(self.namespace, NAMESPACE_ELEMENT_SIZES):
            if len(element) != want:
                raise ValueError(f"namespace element size {len(element)}, expected {want}")
        if len(self.trackname) > MAX_TRACKNAME_BYTES:
            raise ValueError(
                f"track name is {len(self.trackname)} bytes, limit {MAX_TRACKNAME_BYTES}"
            )

    @property
    def identity_length(self) -> int:
        return sum(len(e) for e in self.namespace) + len(self.trackname)


@dataclass(frozen=True)
class ClientSetup:
    supported_version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class ServerSetup:
    selected_version: int = PROTOCOL_VERSION


@dataclass(frozen=True)
class Subscribe:
    request_id: int
    track: TrackKey


@dataclass(frozen=True)
class SubscribeOk:
    request_id: int
    largest_group: int
    exists: bool


@dataclass(frozen=True)
class SubscribeError:
    request_id: int
    code: int
    reason: bytes = b""


@dataclass(frozen=True)
class StandaloneRange:
    start_group: int
    end_group: int


@dataclass(frozen=True)
class JoiningFetch:
    joining_request_id: int
    offset: int


@dataclass(frozen=True)
class Fetch:
    request_id: int
    track: TrackKey
    mode: Union[StandaloneRange, JoiningFetch]


@dataclass(frozen=True)
class FetchOk:
    request_id: int
    largest_group: int


@dataclass(frozen=True)
class FetchError:
    request_id: int
    code: int
    reason: bytes = b""


@dataclass(frozen=True)
class Unsubscribe:
    request_id: int


ControlMessage = Union[
    ClientSetup,
    ServerSetup,
    Subscribe,
    SubscribeOk,
    SubscribeError,
    Fetch,
    FetchOk,
    FetchError,
    Unsubscribe,
]


@dataclass(frozen=True)
class ObjectMessage:
    """One delivery unit: answers the subscription/fetch named by request_id.

    object_id is always 0 in this protocol; a group holds exactly one object.
    The payload is carried opaquely (a fully encoded DNS response).
    """

    request_id: int
    group_id: int
    object_id: int
    payload: bytes


_TYPE_CLIENT_SETUP = 0x01
_TYPE_SERVER_SETUP = 0x02
_TYPE_SUBSCRIBE = 0x03
_TYPE_SUBSCRIBE_OK = 0x04
_TYPE_SUBSCRIBE_ERROR = 0x05
_TYPE_FETCH = 0x06
_TYPE_FETCH_OK = 0x07
_TYPE_FETCH_ERROR = 0x08
_TYPE_UNSUBSCRIBE = 0x09
_TYPE_OBJECT = 0x10

_FETCH_MODE_STANDALONE = 0
_FETCH_MODE_JOINING = 1


def _encode_bytes(value: bytes) -> bytes:
    return encode_varint(len(value)) + value


def _encode_track(track: TrackKey) -> bytes:
    parts = [encode_varint(len(track.namespace))]
    for element in track.namespace:
        parts.append(_encode_bytes(element))
    parts.append(_encode_bytes(track.trackname))
    return b"".join(parts)


def _encode_body(msg: ControlMessage) -> tuple[int, bytes]:
    if isinstance(msg, ClientSetup):
        return _TYPE_CLIENT_SETUP, encode_varint(msg.supported_version)
    if isinstance(msg, ServerSetup):
        return _TYPE_SERVER_SETUP, encode_varint(msg.selected_version)
    if isinstance(msg, Subscribe):
        return _TYPE_SUBSCRIBE, encode_varint(msg.request_id) + _encode_track(msg.track)
    if isinstance(msg, SubscribeOk):
        body = (
            encode_varint(msg.request_id)
            + encode_varint(msg.largest_group)
            + (b"\x01" if msg.exists else b"\x00")
        )
        return _TYPE_SUBSCRIBE_OK, body
    if isinstance(msg, SubscribeError):
        body = encode_varint(msg.request_id) + encode_varint(msg.code) + _encode_bytes(msg.reason)
        return _TYPE_SUBSCRIBE_ERROR, body
    if isinstance(msg, Fetch):
        body = encode_varint(msg.request_id) + _encode_track(msg.track)
        if isinstance(msg.mode, StandaloneRange):
            body += (
                encode_varint(_FETCH_MODE_STANDALONE)
                + encode_varint(msg.mode.start_group)
                + encode_varint(msg.mode.end_group)
            )
        else:
            body += (
                encode_varint(_FETCH_MODE_JOINING)
                + encode_varint(msg.mode.joining_request_id)
                + encode_varint(msg.mode.offset)
            )
        return _TYPE_FETCH, body
    if isinstance(msg, FetchOk):
        return _TYPE_FETCH_OK, encode_varint(msg.request_id) + encode_varint(msg.largest_group)
    if isinstance(msg, FetchError):
        body = encode_varint(msg.request_id) + encode_varint(msg.code) + _encode_bytes(msg.reason)
        return _TYPE_FETCH_ERROR, body
    if isinstance(msg, Unsubscribe):
        return _TYPE_UNSUBSCRIBE, encode_varint(msg.request_id)
    raise ValueError(f"not a control message: {msg!r}")


def encode_control(msg: ControlMessage) -> bytes:
    """Encode a control message as a self-delimiting frame."""
    msg_type, body = _encode_body(msg)
    return encode_varint(msg_type) + encode_varint(len(body)) + body


class _Reader:
    """Cursor over a complete frame body; overruns are protocol errors."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def varint(self) -> int:
        try:
            value, used = decode_varint(self.data, self.pos)
        except NeedMoreData as exc:
            raise ProtocolError("field overruns frame body") from exc
        self.pos += used
        return value

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ProtocolError("field overruns frame body")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def length_prefixed(self) -> bytes:
        return self.take(self.varint())

    def done(self) -> bool:
        return self.pos == len(self.data)


def _decode_track(reader: _Reader) -> TrackKey:
    count = reader.varint()
    if count != len(NAMESPACE_ELEMENT_SIZES):
        raise ProtocolError(f"namespace element count {count}")
    elements = tuple(reader.length_prefixed() for _ in range(count))
    trackname = reader.length_prefixed()
    try:
        return TrackKey(namespace=elements, trackname=trackname)
    except ValueError as exc:
        raise ProtocolError(str(exc)) from exc


def _decode_body(msg_type: int, body: bytes) -> ControlMessage:
    r = _Reader(body)
    if msg_type == _TYPE_CLIENT_SETUP:
        msg: ControlMessage = ClientSetup(supported_version=r.varint())
    elif msg_type == _TYPE_SERVER_SETUP:
        msg = ServerSetup(selected_version=r.varint())
    elif msg_type == _TYPE_SUBSCRIBE:
        msg = Subscribe(request_id=r.varint(), track=_decode_track(r))
    elif msg_type == _TYPE_SUBSCRIBE_OK:
        request_id = r.varint()
        largest_group = r.varint()
        flag = r.take(1)[0]
        if flag not in (0, 1):
            raise ProtocolError(f"bad exists flag {flag}")
        msg = SubscribeOk(request_id=request_id, largest_group=largest_group, exists=bool(flag))
    elif msg_type == _TYPE_SUBSCRIBE_ERROR:
        msg = SubscribeError(request_id=r.varint(), code=r.varint(), reason=r.length_prefixed())
    elif msg_type == _TYPE_FETCH:
        request_id = r.varint()
        track = _decode_track(r)
        mode_tag = r.varint()
        if mode_tag == _FETCH_MODE_STANDALONE:
            mode: Union[StandaloneRange, JoiningFetch] = StandaloneRange(
                start_group=r.varint(), end_group=r.varint()
            )
        elif mode_tag == _FETCH_MODE_JOINING:
            mode = JoiningFetch(joining_request_id=r.varint(), offset=r.varint())
        else:
            raise ProtocolError(f"unknown fetch mode {mode_tag}")
        msg = Fetch(request_id=request_id, track=track, mode=mode)
    elif msg_type == _TYPE_FETCH_OK:
        msg = FetchOk(request_id=r.varint(), largest_group=r.varint())
    elif msg_type == _TYPE_FETCH_ERROR:
        msg = FetchError(request_id=r.varint(), code=r.varint(), reason=r.length_prefixed())
    elif msg_type == _TYPE_UNSUBSCRIBE:
        msg = Unsubscribe(request_id=r.varint())
    else:
        raise ProtocolError(f"unknown control message type {msg_type:#x}")
    if not r.done():
        raise ProtocolError("trailing bytes in frame body")
    return msg


def _decode_frame(data: bytes, offset: int) -> tuple[int, bytes, int]:
    msg_type, used_type = decode_varint(data, offset)
    length, used_len = decode_varint(data, offset + used_type)
    body_start = offset + used_type + used_len
    if body_start + length > len(data):
        raise NeedMoreData(f"frame body needs {length} bytes")
    return msg_type, data[body_start : body_start + length], body_start + length - offset


def decode_control(data: bytes, offset: int = 0) -> tuple[ControlMessage, int]:
    """Decode one control frame; returns (message, bytes_consumed)."""
    msg_type, body, consumed = _decode_frame(data, offset)
    if msg_type == _TYPE_OBJECT:
        raise ProtocolError("object frame on the control channel")
    return _decode_body(msg_type, body), consumed


def encode_object(obj: ObjectMessage) -> bytes:
    """Encode an object frame. object_id must be 0 (one object per group)."""
    if obj.object_id != 0:
        raise ValueError(f"object_id must be 0, got {obj.object_id}")
    body = (
        encode_varint(obj.request_id)
        + encode_varint(obj.group_id)
        + encode_varint(obj.object_id)
        + _encode_bytes(obj.payload)
    )
    return encode_varint(_TYPE_OBJECT) + encode_varint(len(body)) + body


def decode_object(data: bytes, offset: int = 0) -> tuple[ObjectMessage, int]:
    """Decode one object frame; returns (message, bytes_consumed)."""
    msg_type, body, consumed = _decode_frame(data, offset)
    if msg_type != _TYPE_OBJECT:
        raise ProtocolError(f"expected object frame, got type {msg_type:#x}")
    r = _Reader(body)
    obj = ObjectMessage(
        request_id=r.varint(),
        group_id=r.varint(),
        object_id=r.varint(),
        payload=r.length_prefixed(),
    )
    if not r.done():
        raise ProtocolError("trailing bytes in object body")
    return obj, consumed
