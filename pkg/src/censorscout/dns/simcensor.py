"""In-process UDP stand-in for an on-path DNS injector.

The responder plays the role of a probe target inside the censored network:
queries for censored names get a forged answer after ``latency`` seconds,
everything else is silently dropped (blackhole). ``noise`` adds that many
wrong-txid answers to every query. With
``answer_everything=True`` it behaves like an open resolver instead, which
is what target validation must reject.
"""
from __future__ import annotations

import hashlib
import logging
import socket
import threading
from collections import Counter
from typing import Iterable

from .probe import ProbeTarget
from .wire import DecodeError, DnsQuestion, encode_response, parse_message

log = logging.getLogger(__name__)


def forged_address(name: str) -> str:
    """Deterministic TEST-NET-3 address for a name."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return f"203.0.113.{1 + digest[0] % 254}"


class SimulatedCensor:
    def __init__(
        self,
        censored: Iterable[str] = (),
        latency: float = 0.0,
        answer_everything: bool = False,
        include_subdomains: bool = False,
        noise: int = 0,
        bind: str = "127.0.0.1",
    ):
        self.censored = {h.rstrip(".").lower() for h in censored}
        self.latency = latency
        self.answer_everything = answer_everything
        self.include_subdomains = include_subdomains
        self.noise = noise
        self._bind = bind
        self._sock: socket.socket | None = None
        self._thread: threading.Thread | None = None
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self.queries: Counter[str] = Counter()
        self.datagrams_received = 0
        self.responses_sent = 0

    # lifecycle
    def start(self) -> "SimulatedCensor":
        family = socket.AF_INET6 if ":" in self._bind else socket.AF_INET
        self._sock = socket.socket(family, socket.SOCK_DGRAM)
        self._sock.bind((self._bind, 0))
        self._sock.settimeout(0.05)
        self._stop.clear()
        self._thread = threading.Thread(target=self._serve, name="simulated-censor", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2)
        if self._sock is not None:
            self._sock.close()
        self._sock = None
        self._thread = None

    def __enter__(self) -> "SimulatedCensor":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    @property
    def address(self) -> tuple[str, int]:
        if self._sock is None:
            raise RuntimeError("censor not started")
        return self._sock.getsockname()[:2]

    def target(self, validated: bool = False) -> ProbeTarget:
        addr, port = self.address
        return ProbeTarget(addr, port, validated)

    def is_censored(self, name: str) -> bool:
        name = name.rstrip(".").lower()
        if name in self.censored:
            return True
        if self.include_subdomains:
            labels = name.split(".")
            return any(".".join(labels[i:]) in self.censored for i in range(1, len(labels)))
        return False

    def _serve(self) -> None:
        assert self._sock is not None
        sock = self._sock
        while not self._stop.is_set():
            try:
                buf, src = sock.recvfrom(4096)
            except socket.timeout:
                continue
            except OSError:
                break
            with self._lock:
                self.datagrams_received += 1
            try:
                msg = parse_message(buf)
            except DecodeError:
                continue
            if msg.is_response or len(msg.questions) != 1:
                continue
            qname, qtype, qclass = msg.questions[0]
            with self._lock:
                self.queries[qname.lower()] += 1
            # spoof noise: well-formed answers with the wrong txid, sent for every query
            replies = [
                encode_response(DnsQuestion(qname, msg.txid ^ 0x5A5A, qtype, qclass), [forged_address("noise")])
                for _ in range(self.noise)
            ]
            if self.answer_everything or self.is_censored(qname):
                q = DnsQuestion(qname, msg.txid, qtype, qclass)
                replies.append(encode_response(q, [forged_address(qname.lower())]))
            if not replies:
                continue
            if self.latency > 0:
                timer = threading.Timer(self.latency, self._send, args=(sock, replies, src))
                timer.daemon = True
                timer.start()
            else:
                self._send(sock, replies, src)

    def _send(self, sock: socket.socket, replies: list[bytes], dest) -> None:
        for reply in replies:
            try:
                sock.sendto(reply, dest)
            except OSError:
                return
            with self._lock:
                self.responses_sent += 1

