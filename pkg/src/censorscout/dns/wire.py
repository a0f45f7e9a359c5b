"""Minimal RFC 1035 codec: A-record queries out, responses in."""
from __future__ import annotations

import ipaddress
import secrets
import struct
from dataclasses import dataclass, field

QTYPE_A = 1
QCLASS_IN = 1

_HEADER = struct.Struct("!HHHHHH")
_FLAG_QR = 0x8000
_MAX_POINTER_HOPS = 64


class EncodeError(ValueError):
    pass


class DecodeError(ValueError):
    """Truncated or garbled datagram."""


def random_txid() -> int:
    return secrets.randbelow(0x10000)


def _ascii_label(label: str) -> str:
    if label.isascii():
        return label
    try:
        return label.encode("idna").decode("ascii")
    except UnicodeError as exc:
        raise EncodeError(f"cannot encode label {label!r}") from exc


def _labels(name: str) -> tuple[str, ...]:
    name = name.rstrip(".")
    if not name:
        raise EncodeError("empty name")
    labels = tuple(name.split("."))
    wire_len = 1
    for label in labels:
        raw = _ascii_label(label).encode("ascii")
        if not raw:
            raise EncodeError(f"empty label in {name!r}")
        if len(raw) > 63:
            raise EncodeError(f"label longer than 63 bytes in {name!r}")
        wire_len += 1 + len(raw)
    if wire_len > 255:
        raise EncodeError(f"name longer than 255 bytes on the wire: {name!r}")
    return labels


@dataclass(frozen=True)
class DnsQuestion:
    qname: str
    txid: int = field(default_factory=random_txid)
    qtype: int = QTYPE_A
    qclass: int = QCLASS_IN

    def __post_init__(self) -> None:
        if not 0 <= self.txid <= 0xFFFF:
            raise EncodeError("txid must fit in 16 bits")

    @property
    def labels(self) -> tuple[str, ...]:
        return _labels(self.qname)

    @property
    def wire_name(self) -> str:
        """The name as it appears on the wire, lowercased (IDN labels in punycode)."""
        return ".".join(_ascii_label(label) for label in self.labels).lower()

    def same_question(self, qname: str, qtype: int, qclass: int) -> bool:
        return (
            qname.rstrip(".").lower() == self.wire_name
            and qtype == self.qtype
            and qclass == self.qclass
        )


def encode_name(name: str) -> bytes:
    out = bytearray()
    for label in _labels(name):
        raw = _ascii_label(label).encode("ascii")
        out.append(len(raw))
        out += raw
    out.append(0)
    return bytes(out)


def encode_query(q: DnsQuestion) -> bytes:
    """12-byte header (QR=0, RD=0, QDCOUNT=1) followed by the question."""
    header = _HEADER.pack(q.txid, 0, 1, 0, 0, 0)
    return header + encode_name(q.qname) + struct.pack("!HH", q.qtype, q.qclass)


def encode_response(
    q: DnsQuestion,
    answers: list[str] = (),
    ttl: int = 300,
    flags: int = 0x8180,
) -> bytes:
    """Build a response to ``q`` carrying A records; used by the simulated censor."""
    header = _HEADER.pack(q.txid, flags, 1, len(answers), 0, 0)
    body = bytearray(encode_name(q.qname) + struct.pack("!HH", q.qtype, q.qclass))
    for ip in answers:
        body += struct.pack("!HHHIH", 0xC00C, QTYPE_A, QCLASS_IN, ttl, 4)
        body += ipaddress.IPv4Address(ip).packed
    return header + bytes(body)


def _read_name(buf: bytes, offset: int) -> tuple[str, int]:
    """Decode a possibly-compressed name; returns (name, offset after it)."""
    labels = []
    end = None
    hops = 0
    total = 0
    while True:
        if offset >= len(buf):
            raise DecodeError("name runs past end of message")
        length = buf[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(buf):
                raise DecodeError("truncated compression pointer")
            if end is None:
                end = offset + 2
            hops += 1
            if hops > _MAX_POINTER_HOPS:
                raise DecodeError("compression pointer loop")
            offset = ((length & 0x3F) << 8) | buf[offset + 1]
            continue
        if length & 0xC0:
            raise DecodeError("reserved label type")
        offset += 1
        if length == 0:
            break
        if offset + length > len(buf):
            raise DecodeError("label runs past end of message")
        total += length + 1
        if total > 255:
            raise DecodeError("name too long")
        labels.append(buf[offset:offset + length].decode("ascii", errors="replace"))
        offset += length
    return ".".join(labels), (end if end is not None else offset)


@dataclass(frozen=True)
class DnsMessage:
    txid: int
    flags: int
    questions: tuple[tuple[str, int, int], ...]
    answers: tuple[tuple[str, int, int, bytes], ...]

    @property
    def is_response(self) -> bool:
        return bool(self.flags & _FLAG_QR)

    @property
    def a_records(self) -> list[str]:
        return [
            str(ipaddress.IPv4Address(rdata))
            for _, rtype, rclass, rdata in self.answers
            if rtype == QTYPE_A and rclass == QCLASS_IN and len(rdata) == 4
        ]


def parse_message(buf: bytes) -> DnsMessage:
    """Parse header, question and answer sections. Raises DecodeError."""
    if len(buf) < _HEADER.size:
        raise DecodeError(f"datagram of {len(buf)} bytes is shorter than a header")
    txid, flags, qdcount, ancount, _, _ = _HEADER.unpack_from(buf)
    offset = _HEADER.size
    questions = []
    for _ in range(qdcount):
        name, offset = _read_name(buf, offset)
        if offset + 4 > len(buf):
            raise DecodeError("truncated question")
        qtype, qclass = struct.unpack_from("!HH", buf, offset)
        offset += 4
        questions.append((name, qtype, qclass))
    answers = []
    for _ in range(ancount):
        name, offset = _read_name(buf, offset)
        if offset + 10 > len(buf):
            raise DecodeError("truncated resource record")
        rtype, rclass, _ttl, rdlen = struct.unpack_from("!HHIH", buf, offset)
        offset += 10
        if offset + rdlen > len(buf):
            raise DecodeError("truncated rdata")
        answers.append((name, rtype, rclass, bytes(buf[offset:offset + rdlen])))
        offset += rdlen
    return DnsMessage(txid, flags, tuple(questions), tuple(answers))


@dataclass(frozen=True)
class ParsedResponse:
    txid: int
    qname: str
    answers: tuple[str, ...]


class _Unrelated:
    """A well-formed datagram that does not answer the probe."""

    def __repr__(self) -> str:
        return "UNRELATED"


UNRELATED = _Unrelated()


def decode_response(buf: bytes, expected: DnsQuestion) -> ParsedResponse | _Unrelated:
    """Match ``buf`` against the probe ``expected``.

    Requires QR=1, the same txid and an identical question (names compared
    case-insensitively). Non-matching messages return ``UNRELATED``; only
    truncated or garbled packets raise DecodeError.
    """
    msg = parse_message(buf)
    if not msg.is_response or msg.txid != expected.txid or len(msg.questions) != 1:
        return UNRELATED
    if not expected.same_question(*msg.questions[0]):
        return UNRELATED
    return ParsedResponse(msg.txid, msg.questions[0][0], tuple(msg.a_records))
