import socket

import pytest

from censorscout.dns import (
    DnsProber,
    DnsQuestion,
    ProbeOutcome,
    ProbeTarget,
    SimulatedCensor,
    Verdict,
    encode_query,
    encode_response,
    judge,
    probe_host,
    validate_target,
)
from censorscout.dns.probe import load_targets
from censorscout.dns.simcensor import forged_address


def flip_qr(buf: bytes) -> bytes:
    return buf[:2] + bytes([buf[2] | 0x80]) + buf[3:]


Q = DnsQuestion("www.boxun.com", 0x4242)


def test_judge_matching_response_is_censored():
    assert judge([flip_qr(encode_query(Q))], [Q]) is Verdict.CENSORED


def test_judge_wrong_txid_is_not_censored():
    other = DnsQuestion("www.boxun.com", 0x4243)
    assert judge([encode_response(other, ["1.2.3.4"])], [Q]) is Verdict.NOT_CENSORED


def test_judge_ignores_garbage_and_queries():
    stream = [b"", b"\x42", b"\x42\x42\x81", encode_query(Q), encode_response(DnsQuestion("x.com", Q.txid))]
    assert judge(stream, [Q]) is Verdict.NOT_CENSORED
    assert judge(stream + [encode_response(Q)], [Q]) is Verdict.CENSORED


def test_judge_incomplete_and_empty():
    assert judge([], [Q], complete=False) is Verdict.INCONCLUSIVE
    assert judge([], []) is Verdict.INCONCLUSIVE
    assert judge([], [Q]) is Verdict.NOT_CENSORED


def test_target_parsing(tmp_path):
    assert ProbeTarget.parse("192.0.2.1").sockaddr == ("192.0.2.1", 53)
    assert ProbeTarget.parse("192.0.2.1:5353").port == 5353
    t6 = ProbeTarget.parse("[2001:db8::1]:53")
    assert t6.family == socket.AF_INET6
    with pytest.raises(ValueError):
        ProbeTarget.parse("not-an-ip")
    f = tmp_path / "targets.txt"
    f.write_text("# comment\n192.0.2.1\n\n198.51.100.2:54\n")
    assert [str(t) for t in load_targets(f)] == ["192.0.2.1:53", "198.51.100.2:54"]


def test_outcome_round_trip():
    with SimulatedCensor({"bad.example"}) as censor:
        out = probe_host("bad.example", [censor.target(validated=True)], trials=1, wait=0.5)
    assert ProbeOutcome.from_dict(out.to_dict()) == out


def test_validation_rejects_resolvers_and_accepts_silent():
    with SimulatedCensor({"bad.example"}) as silent, SimulatedCensor(answer_everything=True) as resolver:
        assert validate_target(silent.target(), "control.example", trials=1, wait=0.2).validated
        assert not validate_target(resolver.target(), "control.example", trials=1, wait=0.2).validated
        prober = DnsProber([silent.target(), resolver.target()], trials=1, wait=0.2)
        prober.validate("control.example")
        assert [t.sockaddr for t in prober.validated_targets] == [silent.address]


def test_no_validated_target_is_inconclusive():
    with SimulatedCensor({"bad.example"}) as censor:
        out = probe_host("bad.example", [censor.target(validated=False)], trials=2, wait=0.1)
    assert out.verdict is Verdict.INCONCLUSIVE and out.datagrams_sent == 0
    assert censor.datagrams_received == 0


def test_injector_gives_censored_with_evidence():
    with SimulatedCensor({"bad.example"}, latency=0.05) as censor:
        out = probe_host("bad.example", [censor.target(validated=True)], trials=3, wait=1.0)
    assert out.verdict is Verdict.CENSORED
    assert out.evidence[0].answer_ips == (forged_address("bad.example"),)
    assert out.trials == 1 and out.datagrams_sent == 1


def test_blackhole_is_not_censored_after_all_trials():
    with SimulatedCensor({"bad.example"}) as censor:
        out = probe_host("good.example", [censor.target(validated=True)], trials=3, wait=0.1)
    assert (out.verdict, out.trials, out.responses_seen) == (Verdict.NOT_CENSORED, 3, 0)
    assert censor.queries["good.example"] == 3


def test_wrong_txid_noise_is_not_censored():
    with SimulatedCensor({"bad.example"}, noise=3) as censor:
        out = probe_host("good.example", [censor.target(validated=True)], trials=2, wait=0.1)
        assert censor.responses_sent == 6
    assert out.verdict is Verdict.NOT_CENSORED and out.responses_seen == 0


def test_noise_does_not_hide_real_injection():
    with SimulatedCensor({"bad.example"}, noise=2) as censor:
        out = probe_host("bad.example", [censor.target(validated=True)], trials=2, wait=0.5)
    assert out.verdict is Verdict.CENSORED


def test_late_answer_after_wait_is_missed():
    with SimulatedCensor({"bad.example"}, latency=0.6) as censor:
        out = probe_host("bad.example", [censor.target(validated=True)], trials=1, wait=0.1)
    assert out.verdict is Verdict.NOT_CENSORED


def test_datagram_bound_across_targets():
    with SimulatedCensor() as a, SimulatedCensor() as b, SimulatedCensor() as c:
        targets = [x.target(validated=True) for x in (a, b, c)]
        out = probe_host("good.example", targets, trials=2, wait=0.05)
        received = a.datagrams_received + b.datagrams_received + c.datagrams_received
    assert out.datagrams_sent == received == 2 * 3


def test_closed_port_is_silence():
    s = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    out = probe_host("x.example", [ProbeTarget("127.0.0.1", port, validated=True)], trials=2, wait=0.05)
    assert out.verdict is Verdict.NOT_CENSORED


def test_invalid_name_is_inconclusive():
    out = probe_host("a" * 70 + ".com", [ProbeTarget("127.0.0.1", 9, validated=True)], trials=1, wait=0.05)
    assert out.verdict is Verdict.INCONCLUSIVE and out.error


def test_prober_cache_and_order():
    with SimulatedCensor({"b.example", "d.example"}) as censor:
        prober = DnsProber([censor.target(validated=True)], trials=1, wait=0.1, max_in_flight=4)
        hosts = ["a.example", "b.example", "c.example", "d.example"]
        first = prober.probe_many(hosts)
        assert [o.host for o in first] == hosts
        assert [o.verdict for o in first] == [Verdict.NOT_CENSORED, Verdict.CENSORED] * 2
        before = censor.datagrams_received
        assert prober.probe_many(hosts) == first
        assert censor.datagrams_received == before


def test_verdicts_deterministic_across_runs():
    hosts = [f"h{i}.example" for i in range(12)]
    censored = set(hosts[::3])
    runs = []
    for _ in range(2):
        with SimulatedCensor(censored) as censor:
            prober = DnsProber([censor.target(validated=True)], trials=2, wait=0.1, max_in_flight=8)
            runs.append([o.verdict for o in prober.probe_many(hosts)])
    assert runs[0] == runs[1] == [Verdict.CENSORED if h in censored else Verdict.NOT_CENSORED for h in hosts]
