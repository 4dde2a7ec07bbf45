"""Tests for the MoQT-lite wire codec."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moqdns import wire
from moqdns.wire import (
    ClientSetup,
    Fetch,
    FetchError,
    FetchOk,
    JoiningFetch,
    NeedMoreData,
    ObjectMessage,
    ProtocolError,
    ServerSetup,
    StandaloneRange,
    Subscribe,
    SubscribeError,
    SubscribeOk,
    TrackKey,
    Unsubscribe,
)


def oracle_varint(value: int) -> bytes:
    """Independent varint reference: big-endian value with the length prefix
    ORed into the top two bits of the first byte."""
    for prefix, size in ((0, 1), (1, 2), (2, 4), (3, 8)):
        if value < (1 << (8 * size - 2)):
            raw = value.to_bytes(size, "big")
            return bytes([raw[0] | (prefix << 6)]) + raw[1:]
    raise AssertionError("out of varint range")


VARINT_VECTORS = [
    (0, b"\x00"),
    (1, b"\x01"),
    (63, b"\x3f"),
    (64, b"\x40\x40"),
    (300, b"\x41\x2c"),  # 300 = 0x12C, 2-byte form ORs 0x40 into the first byte
    (16383, b"\x7f\xff"),
    (16384, b"\x80\x00\x40\x00"),
    (2**30 - 1, b"\xbf\xff\xff\xff"),
    (2**30, b"\xc0\x00\x00\x00\x40\x00\x00\x00"),
    (2**62 - 1, b"\xff\xff\xff\xff\xff\xff\xff\xff"),
]


class TestVarint:
    @pytest.mark.parametrize(("value", "expected"), VARINT_VECTORS)
    def test_encode_matches_oracle(self, value, expected):
        assert oracle_varint(value) == expected
        assert wire.encode_varint(value) == expected

    @pytest.mark.parametrize(("value", "expected"), VARINT_VECTORS)
    def test_decode(self, value, expected):
        assert wire.decode_varint(expected) == (value, len(expected))

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            wire.encode_varint(2**62)
        with pytest.raises(ValueError):
            wire.encode_varint(-1)

    def test_truncated_is_need_more_data(self):
        with pytest.raises(NeedMoreData):
            wire.decode_varint(b"")
        with pytest.raises(NeedMoreData):
            wire.decode_varint(b"\x41")  # 2-byte form cut after 1 byte

    def test_decode_at_offset(self):
        assert wire.decode_varint(b"\xff\x41\x2c", 1) == (300, 2)

    def test_non_minimal_accepted_reencodes_canonical(self):
        # 5 in the 2-byte form: prefix 01, value 5.
        assert wire.decode_varint(b"\x40\x05") == (5, 2)
        assert wire.encode_varint(5) == b"\x05"

    @given(st.integers(min_value=0, max_value=2**62 - 1))
    def test_round_trip(self, value):
        encoded = wire.encode_varint(value)
        assert encoded == oracle_varint(value)
        assert wire.decode_varint(encoded) == (value, len(encoded))


def make_track(qname_wire: bytes = b"\x07example\x03com\x00") -> TrackKey:
    return TrackKey(namespace=(b"\x08", b"\x00\x01", b"\x00\x01"), trackname=qname_wire)


class TestTrackKey:
    def test_element_sizes_enforced(self):
        with pytest.raises(ValueError):
            TrackKey(namespace=(b"\x08", b"\x01", b"\x00\x01"), trackname=b"\x00")
        with pytest.raises(ValueError):
            TrackKey(namespace=(b"\x08", b"\x00\x01"), trackname=b"\x00")  # type: ignore[arg-type]

    def test_budget(self):
        assert make_track(b"x" * 4091).identity_length == 4096
        with pytest.raises(ValueError):
            make_track(b"x" * 4092)


def sample_messages():
    track = make_track()
    return [
        ClientSetup(supported_version=1),
        ServerSetup(selected_version=1),
        Subscribe(request_id=0, track=track),
        SubscribeOk(request_id=0, largest_group=9, exists=True),
        SubscribeError(request_id=2, code=wire.ERR_SUBSCRIPTIONS_UNAVAILABLE, reason=b"no"),
        Fetch(request_id=3, track=track, mode=StandaloneRange(start_group=10, end_group=12)),
        Fetch(request_id=5, track=track, mode=JoiningFetch(joining_request_id=4, offset=1)),
        FetchOk(request_id=3, largest_group=12),
        FetchError(request_id=3, code=wire.ERR_TRACK_NOT_SERVED, reason=b""),
        Unsubscribe(request_id=7),
    ]


class TestControlCodec:
    @pytest.mark.parametrize("msg", sample_messages(), ids=lambda m: type(m).__name__)
    def test_round_trip(self, msg):
        encoded = wire.encode_control(msg)
        decoded, consumed = wire.decode_control(encoded)
        assert decoded == msg
        assert consumed == len(encoded)

    def test_unsubscribe_frame_body_is_single_varint(self):
        frame = wire.encode_control(Unsubscribe(request_id=7))
        # type varint, length varint, then the 1-byte varint 7
        assert frame == bytes([0x09, 0x01, 0x07])

    def test_subscribe_namespace_element_sizes(self):
        msg = Subscribe(request_id=1, track=make_track())
        decoded, _ = wire.decode_control(wire.encode_control(msg))
        assert [len(e) for e in decoded.track.namespace] == [1, 2, 2]

    def test_joining_fetch_offset_one(self):
        msg = Fetch(
            request_id=5,
            track=make_track(),
            mode=JoiningFetch(joining_request_id=4, offset=1),
        )
        decoded, _ = wire.decode_control(wire.encode_control(msg))
        assert decoded.mode == JoiningFetch(joining_request_id=4, offset=1)

    def test_unknown_type_is_protocol_error(self):
        with pytest.raises(ProtocolError):
            wire.decode_control(bytes([0x3F, 0x01, 0x00]))

    def test_truncated_frame_is_need_more_data(self):
        frame = wire.encode_control(Subscribe(request_id=1, track=make_track()))
        with pytest.raises(NeedMoreData):
            wire.decode_control(frame[:-1])

    def test_trailing_bytes_in_body_is_protocol_error(self):
        body = wire.encode_varint(7) + b"\x00"
        frame = wire.encode_varint(0x09) + wire.encode_varint(len(body)) + body
        with pytest.raises(ProtocolError):
            wire.decode_control(frame)

    def test_concatenated_frames_reassemble(self):
        msgs = sample_messages()
        blob = b"".join(wire.encode_control(m) for m in msgs)
        out = []
        offset = 0
        while offset < len(blob):
            msg, used = wire.decode_control(blob, offset)
            out.append(msg)
            offset += used
        assert out == msgs


class TestObjectCodec:
    def test_round_trip(self):
        obj = ObjectMessage(request_id=1, group_id=6, object_id=0, payload=b"\x00" * 12)
        decoded, consumed = wire.decode_object(wire.encode_object(obj))
        assert decoded == obj

    def test_group_300_uses_two_byte_varint(self):
        obj = ObjectMessage(request_id=0, group_id=300, object_id=0, payload=b"")
        assert oracle_varint(300) in wire.encode_object(obj)

    def test_nonzero_object_id_rejected_on_encode(self):
        obj = ObjectMessage(request_id=1, group_id=6, object_id=1, payload=b"")
        with pytest.raises(ValueError):
            wire.encode_object(obj)

    def test_truncation_is_need_more_data(self):
        encoded = wire.encode_object(
            ObjectMessage(request_id=1, group_id=6, object_id=0, payload=b"abcdef")
        )
        with pytest.raises(NeedMoreData):
            wire.decode_object(encoded[:-3])

    def test_payload_opaque(self):
        payload = bytes(range(256))
        obj = ObjectMessage(request_id=9, group_id=2**40, object_id=0, payload=payload)
        decoded, _ = wire.decode_object(wire.encode_object(obj))
        assert decoded.payload == payload


def random_track(rng: random.Random) -> TrackKey:
    name = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 64)))
    return TrackKey(
        namespace=(
            bytes([rng.randrange(256)]),
            rng.randrange(65536).to_bytes(2, "big"),
            rng.randrange(65536).to_bytes(2, "big"),
        ),
        trackname=name,
    )


def random_control(rng: random.Random) -> wire.ControlMessage:
    v = lambda: rng.choice([rng.randrange(64), rng.randrange(2**62)])
    blob = lambda: bytes(rng.randrange(256) for _ in range(rng.randrange(0, 20)))
    choice = rng.randrange(9)
    if choice == 0:
        return ClientSetup(supported_version=v())
    if choice == 1:
        return ServerSetup(selected_version=v())
    if choice == 2:
        return Subscribe(request_id=v(), track=random_track(rng))
    if choice == 3:
        return SubscribeOk(request_id=v(), largest_group=v(), exists=rng.random() < 0.5)
    if choice == 4:
        return SubscribeError(request_id=v(), code=v(), reason=blob())
    if choice == 5:
        mode = (
            StandaloneRange(start_group=v(), end_group=v())
            if rng.random() < 0.5
            else JoiningFetch(joining_request_id=v(), offset=v())
        )
        return Fetch(request_id=v(), track=random_track(rng), mode=mode)
    if choice == 6:
        return FetchOk(request_id=v(), largest_group=v())
    if choice == 7:
        return FetchError(request_id=v(), code=v(), reason=blob())
    return Unsubscribe(request_id=v())


class TestRandomized:
    def test_control_round_trip_bulk(self):
        rng = random.Random(0xC0FFEE)
        for _ in range(2000):
            msg = random_control(rng)
            decoded, consumed = wire.decode_control(wire.encode_control(msg))
            assert decoded == msg

    def test_fuzzed_decode_never_crashes(self):
        rng = random.Random(0xFACADE)
        for _ in range(2000):
            data = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 40)))
            for decoder in (wire.decode_control, wire.decode_object):
                try:
                    decoder(data)
                except wire.WireError:
                    pass

    def test_mutated_valid_frames_never_crash(self):
        rng = random.Random(0xBEEF)
        for _ in range(1000):
            data = bytearray(wire.encode_control(random_control(rng)))
            for _ in range(rng.randrange(1, 4)):
                data[rng.randrange(len(data))] = rng.randrange(256)
            try:
                wire.decode_control(bytes(data))
            except wire.WireError:
                pass


@settings(max_examples=300)
@given(st.binary(max_size=64))
def test_decode_arbitrary_bytes_structured_errors(data):
    try:
        wire.decode_control(data)
    except wire.WireError:
        pass
    try:
        wire.decode_object(data)
    except wire.WireError:
        pass
