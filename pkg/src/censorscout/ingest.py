"""Fetch web pages and reduce them to plain text."""
from __future__ import annotations

import codecs
import logging
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser
from typing import Callable
from urllib import robotparser
from urllib.parse import urljoin, urlsplit

import requests

log = logging.getLogger(__name__)


class FetchError(Exception):
    """A page could not be turned into a PageDocument. Never fatal for a run."""

    def __init__(self, url: str, reason: str):
        super().__init__(f"{url}: {reason}")
        self.url = url
        self.reason = reason


class Timeout(FetchError):
    pass


class TooManyRedirects(FetchError):
    pass


class NonHtmlContent(FetchError):
    pass


class TransportFailure(FetchError):
    pass


class RobotsDisallowed(FetchError):
    pass


def host_of(url: str) -> str:
    """Lowercased hostname of ``url`` without a trailing dot ('' if none)."""
    try:
        host = urlsplit(url).hostname or ""
    except ValueError:
        return ""
    return host.rstrip(".").lower()


def normalize_url(url: str) -> str:
    """Drop the fragment and lowercase scheme and host."""
    parts = urlsplit(url.strip())
    netloc = parts.netloc if "@" in parts.netloc else parts.netloc.lower()
    return parts._replace(scheme=parts.scheme.lower(), netloc=netloc, fragment="").geturl()


def is_http_url(url: str) -> bool:
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    return parts.scheme in ("http", "https") and bool(parts.hostname)


@dataclass(frozen=True)
class FetchPolicy:
    timeout: float = 15.0
    max_body_bytes: int = 1 << 20
    max_redirects: int = 5
    user_agent: str = "censorscout/0.1 (+censorship measurement research)"
    per_host_delay: float = 1.0
    max_in_flight: int = 16
    respect_robots: bool = True

    def __post_init__(self) -> None:
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")
        if self.max_body_bytes <= 0:
            raise ValueError("max_body_bytes must be > 0")
        if self.max_redirects < 0:
            raise ValueError("max_redirects must be >= 0")


@dataclass(frozen=True)
class PageDocument:
    url: str
    host: str
    body_text: str
    fetched_at: datetime
    content_bytes_read: int = 0

    @classmethod
    def create(cls, url: str, body_text: str, fetched_at: datetime, content_bytes_read: int = 0) -> "PageDocument":
        return cls(url, host_of(url), body_text, fetched_at, content_bytes_read)

    def to_dict(self) -> dict:
        return {
            "url": self.url,
            "host": self.host,
            "body_text": self.body_text,
            "fetched_at": self.fetched_at.isoformat(),
            "content_bytes_read": self.content_bytes_read,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PageDocument":
        return cls(d["url"], d["host"], d["body_text"], datetime.fromisoformat(d["fetched_at"]), d["content_bytes_read"])


# --- text extraction -------------------------------------------------------

_SKIP_TAGS = frozenset({"script", "style", "noscript", "template", "iframe", "object", "svg", "math"})
_BLOCK_TAGS = frozenset(
    """address article aside blockquote body br dd details dialog div dl dt fieldset figcaption figure
    footer form h1 h2 h3 h4 h5 h6 head header hr html li main nav ol option p pre section summary
    table tbody td tfoot th thead title tr ul""".split()
)
_META_CHARSET = re.compile(rb"""<meta[^>]+charset\s*=\s*["']?\s*([A-Za-z0-9_.:-]+)""", re.I)
# '<' and '&' would be re-read as markup if the text were parsed again;
# the fullwidth forms keep extract_text a fixpoint on its own output.
_NEUTRALIZE = str.maketrans({"<": "＜", "&": "＆"})


class _TextCollector(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            if self._skip_depth:
                self._skip_depth -= 1
        elif tag in _BLOCK_TAGS:
            self.parts.append(" ")

    def handle_data(self, data):
        if not self._skip_depth:
            self.parts.append(data)


def _lookup_codec(name: str | None) -> str | None:
    if not name:
        return None
    name = name.strip().strip("\"'").lower()
    # GB2312 and GBK pages routinely contain characters only GB18030 maps.
    if name in ("gb2312", "gbk", "x-gbk", "gb_2312-80", "csgb2312"):
        name = "gb18030"
    try:
        return codecs.lookup(name).name
    except LookupError:
        return None


def sniff_meta_charset(html_bytes: bytes) -> str | None:
    m = _META_CHARSET.search(html_bytes[:4096])
    return m.group(1).decode("ascii", "replace") if m else None


def decode_body(html_bytes: bytes, declared_charset: str | None = None) -> str:
    """Decode with the declared charset, then a meta declaration, then UTF-8."""
    codec = _lookup_codec(declared_charset) or _lookup_codec(sniff_meta_charset(html_bytes)) or "utf-8"
    return html_bytes.decode(codec, errors="replace")


def html_to_text(html: str) -> str:
    parser = _TextCollector()
    try:
        parser.feed(html)
        parser.close()
    except Exception:  # noqa: BLE001 - malformed markup degrades to what was collected
        log.debug("html parser gave up", exc_info=True)
    text = "".join(parser.parts).translate(_NEUTRALIZE)
    return " ".join(text.split())


def plain_text(text: str) -> str:
    return " ".join(text.translate(_NEUTRALIZE).split())


def extract_text(html_bytes: bytes | str, declared_charset: str | None = None) -> str:
    """Strip tags, scripts, styles and comments; collapse whitespace.

    Sentence punctuation is kept because downstream n-grams use it as a
    boundary.
    """
    if isinstance(html_bytes, str):
        return html_to_text(html_bytes)
    return html_to_text(decode_body(html_bytes, declared_charset))


# --- fetching ---------------------------------------------------------------

class HostRateLimiter:
    """Per-host minimum spacing between request starts."""

    def __init__(self, delay: float, clock: Callable[[], float] = time.monotonic, sleep=time.sleep):
        self.delay = delay
        self._clock = clock
        self._sleep = sleep
        self._next_slot: dict[str, float] = {}
        self._lock = threading.Lock()

    def reserve(self, host: str) -> float:
        """Claim the next slot for ``host``; returns the wait before it opens."""
        with self._lock:
            now = self._clock()
            slot = max(now, self._next_slot.get(host, now))
            self._next_slot[host] = slot + self.delay
            return slot - now

    def wait(self, host: str) -> None:
        pause = self.reserve(host)
        if pause > 0:
            self._sleep(pause)


_HTML_TYPES = ("text/html", "application/xhtml+xml", "text/plain")
_REDIRECT_CODES = (301, 302, 303, 307, 308)


def _parse_content_type(value: str | None) -> tuple[str, str | None]:
    if not value:
        return "", None
    mime, _, params = value.partition(";")
    charset = None
    for param in params.split(";"):
        key, _, val = param.partition("=")
        if key.strip().lower() == "charset":
            charset = val.strip().strip("\"'") or None
    return mime.strip().lower(), charset


@dataclass
class Fetcher:
    """HTTP(S) page fetcher with politeness and a global in-flight cap."""

    policy: FetchPolicy = field(default_factory=FetchPolicy)
    session: requests.Session | None = None
    clock: Callable[[], datetime] = lambda: datetime.now(timezone.utc)

    def __post_init__(self) -> None:
        if self.session is None:
            self.session = requests.Session()
        self.session.headers["User-Agent"] = self.policy.user_agent
        self._limiter = HostRateLimiter(self.policy.per_host_delay)
        self._slots = threading.BoundedSemaphore(self.policy.max_in_flight)
        self._robots: dict[str, robotparser.RobotFileParser | None] = {}
        self._robots_lock = threading.Lock()

    def __call__(self, url: str) -> PageDocument:
        return self.fetch(url)

    def _allowed(self, url: str) -> bool:
        if not self.policy.respect_robots:
            return True
        parts = urlsplit(url)
        origin = f"{parts.scheme}://{parts.netloc}"
        with self._robots_lock:
            known = origin in self._robots
            rp = self._robots.get(origin)
        if not known:
            rp = robotparser.RobotFileParser()
            try:
                resp = self.session.get(origin + "/robots.txt", timeout=self.policy.timeout)
                if resp.status_code >= 400:
                    rp = None
                else:
                    rp.parse(resp.text.splitlines())
            except requests.RequestException:
                rp = None
            with self._robots_lock:
                self._robots[origin] = rp
        return rp is None or rp.can_fetch(self.policy.user_agent, url)

    def fetch(self, url: str) -> PageDocument:
        if not is_http_url(url):
            raise TransportFailure(url, "not an http(s) URL")
        with self._slots:
            return self._fetch(url)

    def _fetch(self, url: str) -> PageDocument:
        policy = self.policy
        current = url
        for _ in range(policy.max_redirects + 1):
            if not self._allowed(current):
                raise RobotsDisallowed(url, "disallowed by robots.txt")
            self._limiter.wait(host_of(current))
            try:
                resp = self.session.get(
                    current,
                    timeout=policy.timeout,
                    allow_redirects=False,
                    stream=True,
                    headers={"User-Agent": policy.user_agent},
                )
            except requests.Timeout as exc:
                raise Timeout(url, str(exc)) from exc
            except requests.RequestException as exc:
                raise TransportFailure(url, str(exc)) from exc
            with resp:
                if resp.status_code in _REDIRECT_CODES and "location" in resp.headers:
                    current = urljoin(current, resp.headers["location"])
                    if not is_http_url(current):
                        raise TransportFailure(url, f"redirect to non-http URL {current}")
                    continue
                if resp.status_code >= 400:
                    raise TransportFailure(url, f"HTTP {resp.status_code}")
                mime, charset = _parse_content_type(resp.headers.get("content-type"))
                if mime and mime not in _HTML_TYPES:
                    raise NonHtmlContent(url, mime)
                body = bytearray()
                try:
                    for chunk in resp.iter_content(chunk_size=65536):
                        body.extend(chunk)
                        if len(body) >= policy.max_body_bytes:
                            break
                except requests.Timeout as exc:
                    raise Timeout(url, str(exc)) from exc
                except requests.RequestException as exc:
                    raise TransportFailure(url, str(exc)) from exc
                del body[policy.max_body_bytes:]
                if mime == "text/plain":
                    text = plain_text(decode_body(bytes(body), charset))
                else:
                    text = extract_text(bytes(body), charset)
                return PageDocument.create(url, text, self.clock(), len(body))
        raise TooManyRedirects(url, f"more than {policy.max_redirects} redirects")


def fetch_page(url: str, policy: FetchPolicy | None = None) -> PageDocument:
    return Fetcher(policy or FetchPolicy()).fetch(url)
