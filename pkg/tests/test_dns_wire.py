import struct

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censorscout.dns.wire import (
    UNRELATED,
    DecodeError,
    DnsQuestion,
    EncodeError,
    ParsedResponse,
    decode_response,
    encode_query,
    encode_response,
    parse_message,
)


def flip_qr(buf: bytes) -> bytes:
    return buf[:2] + bytes([buf[2] | 0x80]) + buf[3:]


def test_example_com_wire_bytes():
    wire = encode_query(DnsQuestion("example.com", 0x1234))
    assert wire == bytes.fromhex("123400000001000000000000") + b"\x07example\x03com\x00" + bytes.fromhex("00010001")


def test_label_too_long():
    with pytest.raises(EncodeError):
        encode_query(DnsQuestion("a" * 64 + ".com", 1))
    encode_query(DnsQuestion("a" * 63 + ".com", 1))


def test_name_too_long():
    name = ".".join(["a" * 63] * 4)  # 4 * 64 + 1 = 257 bytes on the wire
    with pytest.raises(EncodeError):
        encode_query(DnsQuestion(name, 1))


def test_empty_label():
    with pytest.raises(EncodeError):
        encode_query(DnsQuestion("a..com", 1))


def test_qr_flipped_query_decodes_as_match():
    q = DnsQuestion("example.com", 0x1234)
    parsed = decode_response(flip_qr(encode_query(q)), q)
    assert parsed == ParsedResponse(0x1234, "example.com", ())


def test_injected_answer_extracted():
    q = DnsQuestion("www.boxun.com", 777)
    assert decode_response(encode_response(q, ["203.0.113.7"]), q).answers == ("203.0.113.7",)


def test_wrong_txid_is_unrelated():
    q = DnsQuestion("example.com", 1)
    assert decode_response(encode_response(DnsQuestion("example.com", 2), ["203.0.113.7"]), q) is UNRELATED


def test_wrong_question_is_unrelated():
    q = DnsQuestion("example.com", 1)
    assert decode_response(encode_response(DnsQuestion("example.org", 1)), q) is UNRELATED
    assert decode_response(encode_response(DnsQuestion("example.com", 1, qtype=28)), q) is UNRELATED


def test_question_name_case_insensitive():
    q = DnsQuestion("Example.COM", 9)
    assert decode_response(encode_response(DnsQuestion("example.com", 9)), q) is not UNRELATED


def test_query_is_not_a_response():
    q = DnsQuestion("example.com", 5)
    assert decode_response(encode_query(q), q) is UNRELATED


def test_truncated_datagram():
    with pytest.raises(DecodeError):
        decode_response(b"\x12\x34\x81\x80\x00", DnsQuestion("example.com", 0x1234))


def test_truncated_answer():
    q = DnsQuestion("example.com", 3)
    with pytest.raises(DecodeError):
        decode_response(encode_response(q, ["1.2.3.4"])[:-2], q)


def test_compression_loop_rejected():
    header = struct.pack("!HHHHHH", 1, 0x8180, 1, 0, 0, 0)
    with pytest.raises(DecodeError):
        parse_message(header + b"\xc0\x0c" + b"\x00\x01\x00\x01")


def test_non_a_answers_ignored():
    q = DnsQuestion("example.com", 3)
    msg = bytearray(encode_response(q, ["1.2.3.4"]))
    msg[7] = 2  # ANCOUNT = 2
    msg += struct.pack("!HHHIH", 0xC00C, 28, 1, 60, 16) + bytes(16)
    assert decode_response(bytes(msg), q).answers == ("1.2.3.4",)


label = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=63)
hostname = st.lists(label, min_size=1, max_size=4).map(".".join).filter(lambda h: len(h) + 2 <= 255)


@settings(max_examples=300, deadline=None)
@given(hostname, st.integers(0, 0xFFFF))
def test_round_trip(name, txid):
    q = DnsQuestion(name, txid)
    wire = encode_query(q)
    msg = parse_message(wire)
    assert (msg.txid, msg.questions) == (txid, ((name, 1, 1),))
    assert decode_response(flip_qr(wire), q) == ParsedResponse(txid, name, ())


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=80))
def test_decoder_total_on_garbage(data):
    q = DnsQuestion("example.com", 1)
    try:
        decode_response(data, q)
    except DecodeError:
        pass
