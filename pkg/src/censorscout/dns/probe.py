"""DNS-injection probing against non-resolver targets.

A target inside the censored network runs no DNS service, so any
well-formed answer to a query sent there was forged on the path.
"""
from __future__ import annotations

import enum
import ipaddress
import logging
import select
import socket
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .wire import (
    UNRELATED,
    DecodeError,
    DnsQuestion,
    EncodeError,
    ParsedResponse,
    decode_response,
    encode_query,
    random_txid,
)

log = logging.getLogger(__name__)

_RECV_BUFSIZE = 4096


class Verdict(str, enum.Enum):
    CENSORED = "Censored"
    NOT_CENSORED = "NotCensored"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ProbeTarget:
    address: str
    port: int = 53
    validated: bool = False

    def __post_init__(self) -> None:
        ipaddress.ip_address(self.address)
        if not 0 < self.port < 65536:
            raise ValueError(f"bad port {self.port}")

    @property
    def family(self) -> int:
        return socket.AF_INET6 if ipaddress.ip_address(self.address).version == 6 else socket.AF_INET

    @property
    def sockaddr(self) -> tuple[str, int]:
        return (self.address, self.port)

    def __str__(self) -> str:
        if ":" in self.address:
            return f"[{self.address}]:{self.port}"
        return f"{self.address}:{self.port}"

    @classmethod
    def parse(cls, text: str) -> "ProbeTarget":
        """Accept ``ip``, ``ip:port``, ``[v6]`` or ``[v6]:port``."""
        text = text.strip()
        if text.startswith("["):
            addr, _, rest = text[1:].partition("]")
            port = int(rest[1:]) if rest.startswith(":") else 53
            return cls(addr, port)
        if text.count(":") == 1:
            addr, port = text.split(":")
            return cls(addr, int(port))
        return cls(text)


def load_targets(path: str | Path) -> list[ProbeTarget]:
    targets = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                targets.append(ProbeTarget.parse(line))
    return targets


@dataclass(frozen=True)
class Evidence:
    target: str
    txid_matched: bool
    answer_ips: tuple[str, ...]
    rtt: float


@dataclass(frozen=True)
class ProbeOutcome:
    host: str
    verdict: Verdict
    responses_seen: int = 0
    trials: int = 0
    evidence: tuple[Evidence, ...] = ()
    datagrams_sent: int = 0
    decode_errors: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "host": self.host,
            "verdict": self.verdict.value,
            "responses_seen": self.responses_seen,
            "trials": self.trials,
            "evidence": [
                {"target": e.target, "txid_matched": e.txid_matched, "answer_ips": list(e.answer_ips), "rtt": e.rtt}
                for e in self.evidence
            ],
            "datagrams_sent": self.datagrams_sent,
            "decode_errors": self.decode_errors,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeOutcome":
        return cls(
            host=d["host"],
            verdict=Verdict(d["verdict"]),
            responses_seen=d["responses_seen"],
            trials=d["trials"],
            evidence=tuple(
                Evidence(e["target"], e["txid_matched"], tuple(e["answer_ips"]), e["rtt"]) for e in d["evidence"]
            ),
            datagrams_sent=d.get("datagrams_sent", 0),
            decode_errors=d.get("decode_errors", 0),
            error=d.get("error"),
        )


def match_datagram(buf: bytes, sent: Iterable[DnsQuestion]) -> tuple[DnsQuestion, ParsedResponse] | None:
    """Return the probe question ``buf`` answers, or None.

    Raises DecodeError for garbled datagrams.
    """
    for q in sent:
        parsed = decode_response(buf, q)
        if parsed is not UNRELATED:
            return q, parsed
    return None


def judge(stream: Iterable[bytes], sent: Sequence[DnsQuestion], complete: bool = True) -> Verdict:
    """Verdict for a captured response stream.

    Censored iff some datagram is a response (QR=1) whose txid and question
    both match a query in ``sent``. Garbled datagrams are ignored. Without a
    match the verdict is NotCensored if every trial ran to completion,
    otherwise Inconclusive.
    """
    if not sent:
        return Verdict.INCONCLUSIVE
    by_txid: dict[int, list[DnsQuestion]] = {}
    for q in sent:
        by_txid.setdefault(q.txid, []).append(q)
    for buf in stream:
        if len(buf) < 2:
            continue
        candidates = by_txid.get(int.from_bytes(buf[:2], "big"))
        if not candidates:
            continue
        try:
            if match_datagram(buf, candidates) is not None:
                return Verdict.CENSORED
        except DecodeError:
            continue
    return Verdict.NOT_CENSORED if complete else Verdict.INCONCLUSIVE


def _open_sockets(targets: Sequence[ProbeTarget]) -> dict[int, socket.socket]:
    socks = {}
    for t in targets:
        fam = t.family
        if fam not in socks:
            s = socket.socket(fam, socket.SOCK_DGRAM)
            s.setblocking(False)
            socks[fam] = s
    return socks


def probe_host(
    host: str,
    targets: Sequence[ProbeTarget],
    trials: int = 3,
    wait: float = 2.0,
    stop_on_match: bool = True,
) -> ProbeOutcome:
    """Send ``trials`` rounds of A queries for ``host`` to every validated target.

    Each round uses a fresh random txid per target and listens for ``wait``
    seconds. The first response matching an outstanding query makes the
    host Censored.
    """
    host = host.rstrip(".").lower()
    usable = [t for t in targets if t.validated]
    if trials < 1 or not usable:
        return ProbeOutcome(host, Verdict.INCONCLUSIVE, error="no validated target" if not usable else "trials < 1")
    try:
        DnsQuestion(host, 0).labels
    except EncodeError as exc:
        return ProbeOutcome(host, Verdict.INCONCLUSIVE, error=str(exc))

    outstanding: dict[int, list[tuple[DnsQuestion, ProbeTarget, float]]] = {}
    evidence: list[Evidence] = []
    sent = decode_errors = seen = 0
    socks: dict[int, socket.socket] = {}
    try:
        socks = _open_sockets(usable)
        for trial in range(1, trials + 1):
            for t in usable:
                q = DnsQuestion(host, random_txid())
                outstanding.setdefault(q.txid, []).append((q, t, time.monotonic()))
                socks[t.family].sendto(encode_query(q), t.sockaddr)
                sent += 1
            deadline = time.monotonic() + wait
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                ready, _, _ = select.select(list(socks.values()), [], [], remaining)
                for s in ready:
                    try:
                        buf, _src = s.recvfrom(_RECV_BUFSIZE)
                    except BlockingIOError:
                        continue
                    except ConnectionRefusedError:
                        # ICMP unreachable from a target is silence, not an answer
                        continue
                    now = time.monotonic()
                    entries = outstanding.get(int.from_bytes(buf[:2], "big")) if len(buf) >= 2 else None
                    if not entries:
                        continue
                    try:
                        hit = match_datagram(buf, [e[0] for e in entries])
                    except DecodeError:
                        decode_errors += 1
                        continue
                    if hit is None:
                        continue
                    q, parsed = hit
                    _, target, t0 = next(e for e in entries if e[0] is q)
                    seen += 1
                    evidence.append(Evidence(str(target), True, parsed.answers, round(now - t0, 6)))
                if seen and stop_on_match:
                    return ProbeOutcome(host, Verdict.CENSORED, seen, trial, tuple(evidence), sent, decode_errors)
        verdict = Verdict.CENSORED if seen else Verdict.NOT_CENSORED
        return ProbeOutcome(host, verdict, seen, trials, tuple(evidence), sent, decode_errors)
    except OSError as exc:
        log.warning("probe of %s aborted: %s", host, exc)
        return ProbeOutcome(host, Verdict.INCONCLUSIVE, seen, 0, tuple(evidence), sent, decode_errors, error=str(exc))
    finally:
        for s in socks.values():
            s.close()


def validate_target(t: ProbeTarget, control_host: str, trials: int = 3, wait: float = 2.0) -> ProbeTarget:
    """Mark ``t`` validated iff it stays silent for the benign control name.

    Any answer means the address runs DNS or the control itself is
    censored; either way the target cannot support an injection verdict.
    """
    outcome = probe_host(control_host, [replace(t, validated=True)], trials=trials, wait=wait)
    ok = outcome.verdict is Verdict.NOT_CENSORED
    if not ok:
        log.warning("target %s failed validation (%s)", t, outcome.verdict.value)
    return replace(t, validated=ok)


@dataclass
class DnsProber:
    """Probe hosts with a per-run verdict cache and bounded concurrency."""

    targets: list[ProbeTarget]
    trials: int = 3
    wait: float = 2.0
    max_in_flight: int = 16
    _cache: dict[str, ProbeOutcome] = field(default_factory=dict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def validate(self, control_host: str) -> list[ProbeTarget]:
        self.targets = [validate_target(t, control_host, self.trials, self.wait) for t in self.targets]
        return self.targets

    @property
    def validated_targets(self) -> list[ProbeTarget]:
        return [t for t in self.targets if t.validated]

    def probe(self, host: str) -> ProbeOutcome:
        host = host.rstrip(".").lower()
        with self._lock:
            hit = self._cache.get(host)
        if hit is not None:
            return hit
        outcome = probe_host(host, self.targets, self.trials, self.wait)
        with self._lock:
            return self._cache.setdefault(host, outcome)

    def probe_many(self, hosts: Sequence[str]) -> list[ProbeOutcome]:
        """Probe concurrently; results come back in input order."""
        if len(hosts) <= 1 or self.max_in_flight <= 1:
            return [self.probe(h) for h in hosts]
        with ThreadPoolExecutor(max_workers=min(self.max_in_flight, len(hosts))) as pool:
            return list(pool.map(self.probe, hosts))
