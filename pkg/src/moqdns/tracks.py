"""Mapping between DNS questions, track identities, and response objects.

A question maps to a track as: namespace element 1 packs OPCODE (high
nibble), RD (bit 3), CD (bit 2) with the low two bits reserved zero;
elements 2 and 3 carry QTYPE and QCLASS big-endian; the track name is the
canonicalized QNAME in wire format. Responses ride in objects whose group
id is the publisher's zone version and whose object id is always zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .dnscodec import (
    CLASS_IN,
    DnsError,
    DnsMessage,
    canonicalize_name,
    decode_name,
    encode_message,
    encode_name,
    make_query,
)
from .wire import MAX_TRACKNAME_BYTES, ObjectMessage, TrackKey

__all__ = [
    "TrackKey",
    "TrackQuestion",
    "query_to_track",
    "track_for_question",
    "track_to_query",
    "question_from_track",
    "response_to_object",
    "canonical_payload",
]

_RESERVED_MASK = 0x03


@dataclass(frozen=True)
class TrackQuestion:
    """The five question fields plus name recovered from a track identity."""

    opcode: int
    rd: int
    cd: int
    qtype: int
    qclass: int
    qname: str


def query_to_track(query: DnsMessage) -> TrackKey:
    """Derive the track identity for a request with exactly one question."""
    if query.header.qr != 0:
        raise ValueError("track mapping requires a request (QR=0)")
    if len(query.questions) != 1:
        raise ValueError(f"track mapping requires exactly one question, have {len(query.questions)}")
    q = query.questions[0]
    trackname = encode_name(canonicalize_name(q.qname))
    if len(trackname) > MAX_TRACKNAME_BYTES:
        raise ValueError(f"qname wire form is {len(trackname)} bytes, limit {MAX_TRACKNAME_BYTES}")
    flags = (
        (query.header.opcode & 0xF) << 4
        | (query.header.rd & 1) << 3
        | (query.header.cd & 1) << 2
    )
    return TrackKey(
        namespace=(bytes([flags]), q.qtype.to_bytes(2, "big"), q.qclass.to_bytes(2, "big")),
        trackname=trackname,
    )


def track_for_question(
    qname: str,
    qtype: int,
    qclass: int = CLASS_IN,
    *,
    rd: int = 1,
    cd: int = 0,
    opcode: int = 0,
) -> TrackKey:
    return query_to_track(make_query(qname, qtype, qclass, rd=rd, cd=cd, opcode=opcode))


def track_to_query(track: TrackKey) -> TrackQuestion:
    """Invert the mapping. Rejects reserved bits and malformed track names."""
    flags = track.namespace[0][0]
    if flags & _RESERVED_MASK:
        raise ValueError(f"reserved namespace bits set: {flags:#04x}")
    try:
        qname, used = decode_name(track.trackname, 0)
    except DnsError as exc:
        raise ValueError(f"bad track name: {exc}") from exc
    if used != len(track.trackname):
        raise ValueError("trailing bytes after track name")
    if qname != canonicalize_name(qname):
        raise ValueError(f"track name not canonical: {qname!r}")
    return TrackQuestion(
        opcode=flags >> 4,
        rd=flags >> 3 & 1,
        cd=flags >> 2 & 1,
        qtype=int.from_bytes(track.namespace[1], "big"),
        qclass=int.from_bytes(track.namespace[2], "big"),
        qname=qname,
    )


def question_from_track(track: TrackKey) -> DnsMessage:
    """Reconstruct the request message a track identity stands for."""
    tq = track_to_query(track)
    return make_query(tq.qname, tq.qtype, tq.qclass, rd=tq.rd, cd=tq.cd, opcode=tq.opcode)


def canonical_payload(resp: DnsMessage) -> bytes:
    """Encode a response with id 0: the shared form pushed to subscribers."""
    neutral = replace(resp.header, id=0)
    return encode_message(
        DnsMessage(
            header=neutral,
            questions=resp.questions,
            answers=resp.answers,
            authority=resp.authority,
            additional=resp.additional,
        )
    )


def response_to_object(version: int, request_id: int, resp: DnsMessage) -> ObjectMessage:
    """Wrap a response in an object at the given zone version."""
    if not resp.is_response():
        raise ValueError("object payloads must be responses (QR=1)")
    return ObjectMessage(
        request_id=request_id,
        group_id=version,
        object_id=0,
        payload=canonical_payload(resp),
    )
