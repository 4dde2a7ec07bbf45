"""Classic DNS message codec (RFC 1035 subset).

Names are handled as presentation strings ("www.example.com.") with RFC 1035
escaping for bytes that are not printable ASCII. The encoder always emits
uncompressed names so equal messages produce identical bytes; the decoder
accepts compression pointers for interoperability with traditional servers.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass, field

# Record types supported with typed presentation forms. Anything else is
# carried opaquely (hex presentation).
TYPE_A = 1
TYPE_NS = 2
TYPE_CNAME = 5
TYPE_SOA = 6
TYPE_TXT = 16
TYPE_AAAA = 28
TYPE_HTTPS = 65

CLASS_IN = 1

RCODE_NOERROR = 0
RCODE_FORMERR = 1
RCODE_SERVFAIL = 2
RCODE_NXDOMAIN = 3
RCODE_NOTIMP = 4
RCODE_REFUSED = 5

OPCODE_QUERY = 0

RTYPE_NAMES = {
    TYPE_A: "A",
    TYPE_NS: "NS",
    TYPE_CNAME: "CNAME",
    TYPE_SOA: "SOA",
    TYPE_TXT: "TXT",
    TYPE_AAAA: "AAAA",
    TYPE_HTTPS: "HTTPS",
}
RTYPE_VALUES = {name: value for value, name in RTYPE_NAMES.items()}

MAX_LABEL = 63
MAX_NAME_WIRE = 255

_NAME_TYPED_RDATA = (TYPE_NS, TYPE_CNAME)


class DnsError(Exception):
    """Raised for any malformed name, record, or message."""


def _parse_labels(text: str) -> list[bytes]:
    """Parse presentation text into raw label byte strings (unescaping)."""
    if text in ("", "."):
        return []
    labels: list[bytes] = []
    current = bytearray()
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            if i + 4 <= len(text) and text[i + 1 : i + 4].isdigit():
                code = int(text[i + 1 : i + 4])
                if code > 255:
                    raise DnsError(f"bad escape in name: {text!r}")
                current.append(code)
                i += 4
                continue
            if i + 1 >= len(text):
                raise DnsError(f"dangling escape in name: {text!r}")
            current.append(ord(text[i + 1]))
            i += 2
            continue
        if ch == ".":
            if not current:
                raise DnsError(f"empty label in name: {text!r}")
            labels.append(bytes(current))
            current = bytearray()
        else:
            code = ord(ch)
            if code > 255:
                raise DnsError(f"non-ASCII character in name: {text!r}")
            current.append(code)
        i += 1
    if current:
        labels.append(bytes(current))
    return labels


def _render_labels(labels: list[bytes]) -> str:
    if not labels:
        return "."
    out = []
    for label in labels:
        chunk = []
        for b in label:
            c = chr(b)
            if c in ".\\":
                chunk.append("\\" + c)
            elif 0x21 <= b <= 0x7E:
                chunk.append(c)
            else:
                chunk.append("\\%03d" % b)
        out.append("".join(chunk))
    return ".".join(out) + "."


def _check_labels(labels: list[bytes]) -> None:
    wire_len = sum(len(l) + 1 for l in labels) + 1
    for label in labels:
        if not 1 <= len(label) <= MAX_LABEL:
            raise DnsError(f"label length {len(label)} out of range")
    if wire_len > MAX_NAME_WIRE:
        raise DnsError(f"name wire form is {wire_len} bytes, limit {MAX_NAME_WIRE}")


def canonicalize_name(name: str) -> str:
    """Lowercase the name and make it fully qualified. Idempotent."""
    labels = [bytes(b + 32 if 0x41 <= b <= 0x5A else b for b in l) for l in _parse_labels(name)]
    return _render_labels(labels)


def encode_name(name: str) -> bytes:
    """Encode a presentation name to wire format, without compression."""
    labels = _parse_labels(name)
    _check_labels(labels)
    return b"".join(bytes([len(l)]) + l for l in labels) + b"\x00"


def decode_name(data: bytes, offset: int) -> tuple[str, int]:
    """Decode a possibly-compressed name starting at offset.

    Returns (presentation text, bytes consumed at the top level). Pointers
    must point strictly backwards, which also rules out loops.
    """
    labels: list[bytes] = []
    total = 0
    pos = offset
    segment_start = offset
    end: int | None = None
    while True:
        if pos >= len(data):
            raise DnsError("truncated name")
        n = data[pos]
        if n == 0:
            pos += 1
            break
        if n & 0xC0 == 0xC0:
            if pos + 2 > len(data):
                raise DnsError("truncated compression pointer")
            ptr = ((n & 0x3F) << 8) | data[pos + 1]
            if ptr >= segment_start:
                raise DnsError(f"compression pointer to {ptr} does not point backwards")
            if end is None:
                end = pos + 2
            pos = ptr
            segment_start = ptr
        elif n & 0xC0 == 0:
            if pos + 1 + n > len(data):
                raise DnsError("truncated label")
            total += n + 1
            if total + 1 > MAX_NAME_WIRE:
                raise DnsError("decompressed name too long")
            labels.append(data[pos + 1 : pos + 1 + n])
            pos += 1 + n
        else:
            raise DnsError(f"reserved label type in byte {n:#x}")
    if end is None:
        end = pos
    return _render_labels(labels), end - offset


@dataclass
class DnsHeader:
    id: int = 0
    qr: int = 0
    opcode: int = 0
    aa: int = 0
    tc: int = 0
    rd: int = 0
    ra: int = 0
    z: int = 0
    ad: int = 0
    cd: int = 0
    rcode: int = 0

    def pack_flags(self) -> int:
        if not 0 <= self.opcode < 16:
            raise DnsError(f"opcode {self.opcode} out of range")
        if not 0 <= self.rcode < 16:
            raise DnsError(f"rcode {self.rcode} out of range")
        return (
            (self.qr & 1) << 15
            | self.opcode << 11
            | (self.aa & 1) << 10
            | (self.tc & 1) << 9
            | (self.rd & 1) << 8
            | (self.ra & 1) << 7
            | (self.z & 1) << 6
            | (self.ad & 1) << 5
            | (self.cd & 1) << 4
            | self.rcode
        )

    @classmethod
    def unpack_flags(cls, id_: int, flags: int) -> "DnsHeader":
        return cls(
            id=id_,
            qr=flags >> 15 & 1,
            opcode=flags >> 11 & 0xF,
            aa=flags >> 10 & 1,
            tc=flags >> 9 & 1,
            rd=flags >> 8 & 1,
            ra=flags >> 7 & 1,
            z=flags >> 6 & 1,
            ad=flags >> 5 & 1,
            cd=flags >> 4 & 1,
            rcode=flags & 0xF,
        )


@dataclass
class Question:
    qname: str
    qtype: int
    qclass: int = CLASS_IN


@dataclass
class ResourceRecord:
    name: str
    rtype: int
    rclass: int
    ttl: int
    rdata: bytes

    def rdata_text(self) -> str:
        return rdata_to_text(self.rtype, self.rdata)


@dataclass
class DnsMessage:
    header: DnsHeader = field(default_factory=DnsHeader)
    questions: list[Question] = field(default_factory=list)
    answers: list[ResourceRecord] = field(default_factory=list)
    authority: list[ResourceRecord] = field(default_factory=list)
    additional: list[ResourceRecord] = field(default_factory=list)

    @property
    def question(self) -> Question:
        if len(self.questions) != 1:
            raise DnsError(f"expected exactly one question, have {len(self.questions)}")
        return self.questions[0]

    def is_response(self) -> bool:
        return self.header.qr == 1


def make_query(
    qname: str,
    qtype: int,
    qclass: int = CLASS_IN,
    *,
    id: int = 0,
    rd: int = 1,
    cd: int = 0,
    opcode: int = OPCODE_QUERY,
) -> DnsMessage:
    """Build a single-question request with a canonicalized name."""
    return DnsMessage(
        header=DnsHeader(id=id, qr=0, opcode=opcode, rd=rd, cd=cd),
        questions=[Question(qname=canonicalize_name(qname), qtype=qtype, qclass=qclass)],
    )


def rdata_from_text(rtype: int, text: str) -> bytes:
    """Convert presentation rdata to wire bytes for the supported types."""
    try:
        if rtype == TYPE_A:
            return socket.inet_pton(socket.AF_INET, text)
        if rtype == TYPE_AAAA:
            return socket.inet_pton(socket.AF_INET6, text)
        if rtype in _NAME_TYPED_RDATA:
            return encode_name(canonicalize_name(text))
        if rtype == TYPE_TXT:
            raw = text.encode("ascii")
            chunks = [raw[i : i + 255] for i in range(0, len(raw), 255)] or [b""]
            return b"".join(bytes([len(c)]) + c for c in chunks)
        return bytes.fromhex(text)
    except (OSError, ValueError, UnicodeEncodeError) as exc:
        raise DnsError(f"bad rdata for type {rtype}: {text!r}") from exc


def rdata_to_text(rtype: int, rdata: bytes) -> str:
    if rtype == TYPE_A and len(rdata) == 4:
        return socket.inet_ntop(socket.AF_INET, rdata)
    if rtype == TYPE_AAAA and len(rdata) == 16:
        return socket.inet_ntop(socket.AF_INET6, rdata)
    if rtype in _NAME_TYPED_RDATA:
        name, _ = decode_name(rdata, 0)
        return name
    if rtype == TYPE_TXT:
        parts = []
        pos = 0
        while pos < len(rdata):
            n = rdata[pos]
            parts.append(rdata[pos + 1 : pos + 1 + n])
            pos += 1 + n
        return b"".join(parts).decode("ascii", "backslashreplace")
    return rdata.hex()


def _validate_rdata(rtype: int, rdata: bytes) -> None:
    if rtype == TYPE_A and len(rdata) != 4:
        raise DnsError(f"A rdata must be 4 bytes, got {len(rdata)}")
    if rtype == TYPE_AAAA and len(rdata) != 16:
        raise DnsError(f"AAAA rdata must be 16 bytes, got {len(rdata)}")


def _encode_rr(rr: ResourceRecord) -> bytes:
    _validate_rdata(rr.rtype, rr.rdata)
    if not 0 <= rr.ttl < 2**32:
        raise DnsError(f"ttl {rr.ttl} out of range")
    if len(rr.rdata) > 0xFFFF:
        raise DnsError("rdata too long")
    return (
        encode_name(rr.name)
        + struct.pack(">HHIH", rr.rtype, rr.rclass, rr.ttl, len(rr.rdata))
        + rr.rdata
    )


def encode_message(msg: DnsMessage) -> bytes:
    """Encode to wire format with uncompressed names."""
    sections = (msg.questions, msg.answers, msg.authority, msg.additional)
    for section in sections:
        if len(section) > 0xFFFF:
            raise DnsError("section count overflow")
    out = [
        struct.pack(
            ">HHHHHH",
            msg.header.id,
            msg.header.pack_flags(),
            len(msg.questions),
            len(msg.answers),
            len(msg.authority),
            len(msg.additional),
        )
    ]
    for q in msg.questions:
        out.append(encode_name(q.qname) + struct.pack(">HH", q.qtype, q.qclass))
    for section in (msg.answers, msg.authority, msg.additional):
        for rr in section:
            out.append(_encode_rr(rr))
    return b"".join(out)


def _decode_rr(data: bytes, offset: int) -> tuple[ResourceRecord, int]:
    name, used = decode_name(data, offset)
    pos = offset + used
    if pos + 10 > len(data):
        raise DnsError("truncated record header")
    rtype, rclass, ttl, rdlen = struct.unpack(">HHIH", data[pos : pos + 10])
    pos += 10
    if pos + rdlen > len(data):
        raise DnsError("truncated rdata")
    if rtype in _NAME_TYPED_RDATA:
        # Decompress the embedded name and store it in canonical wire form.
        target, used = decode_name(data, pos)
        if used != rdlen:
            raise DnsError("rdata length does not match embedded name")
        rdata = encode_name(target)
    else:
        rdata = data[pos : pos + rdlen]
        _validate_rdata(rtype, rdata)
    pos += rdlen
    return ResourceRecord(name=name, rtype=rtype, rclass=rclass, ttl=ttl, rdata=rdata), pos - offset


def decode_message(data: bytes) -> DnsMessage:
    """Decode a wire-format message; compression pointers are accepted."""
    if len(data) < 12:
        raise DnsError(f"message is {len(data)} bytes, header needs 12")
    id_, flags, qdcount, ancount, nscount, arcount = struct.unpack(">HHHHHH", data[:12])
    msg = DnsMessage(header=DnsHeader.unpack_flags(id_, flags))
    pos = 12
    for _ in range(qdcount):
        qname, used = decode_name(data, pos)
        pos += used
        if pos + 4 > len(data):
            raise DnsError("truncated question")
        qtype, qclass = struct.unpack(">HH", data[pos : pos + 4])
        pos += 4
        msg.questions.append(Question(qname=qname, qtype=qtype, qclass=qclass))
    for count, section in ((ancount, msg.answers), (nscount, msg.authority), (arcount, msg.additional)):
        for _ in range(count):
            rr, used = _decode_rr(data, pos)
            section.append(rr)
            pos += used
    return msg


def rewrite_id(wire_bytes: bytes, new_id: int) -> bytes:
    """Replace the message id without reparsing (first two bytes)."""
    if len(wire_bytes) < 2:
        raise DnsError("message too short for id rewrite")
    return struct.pack(">H", new_id & 0xFFFF) + wire_bytes[2:]


def names_equal(a: str, b: str) -> bool:
    return canonicalize_name(a) == canonicalize_name(b)


def _canonical_rr_key(rr: ResourceRecord) -> tuple:
    return (canonicalize_name(rr.name), rr.rtype, rr.rclass, rr.ttl, rr.rdata)


def semantically_equal(a: DnsMessage, b: DnsMessage) -> bool:
    """Field-level equality ignoring name case and record order."""
    if (a.header.pack_flags(), a.header.id) != (b.header.pack_flags(), b.header.id):
        return False
    qa = [(canonicalize_name(q.qname), q.qtype, q.qclass) for q in a.questions]
    qb = [(canonicalize_name(q.qname), q.qtype, q.qclass) for q in b.questions]
    if qa != qb:
        return False
    for sa, sb in zip(
        (a.answers, a.authority, a.additional), (b.answers, b.authority, b.additional)
    ):
        if sorted(map(_canonical_rr_key, sa)) != sorted(map(_canonical_rr_key, sb)):
            return False
    return True
