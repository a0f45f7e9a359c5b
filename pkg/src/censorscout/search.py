"""Web-search backends and result filtering."""
from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Protocol, Sequence

import requests

from .ingest import host_of, is_http_url, normalize_url
from .segment import Phrase

log = logging.getLogger(__name__)

MAX_RESULTS_PER_QUERY = 50
DEFAULT_EXCLUSIONS = ("blogspot.com", "facebook.com", "twitter.com", "youtube.com", "tumblr.com")


class BackendError(Exception):
    """HTTP failure, quota exhaustion or a malformed response."""


class RateLimited(BackendError):
    pass


class SearchBackend(Protocol):
    page_size: int

    def query(self, text: str, count: int) -> list[str]:
        """Return up to ``count`` result URLs for ``text`` in backend order."""
        ...


@dataclass(frozen=True)
class SearchResult:
    url: str
    host: str
    rank: int
    query: Phrase
    probe_skippable: bool = False


def domain_matches(host: str, suffix: str) -> bool:
    """Label-aligned suffix test: x.blogspot.com matches blogspot.com, notblogspot.com does not."""
    host = host.rstrip(".").lower()
    suffix = suffix.strip(".").lower()
    return host == suffix or host.endswith("." + suffix)


@dataclass(frozen=True)
class ExclusionList:
    suffixes: frozenset[str] = frozenset(DEFAULT_EXCLUSIONS)

    @classmethod
    def of(cls, suffixes: Iterable[str]) -> "ExclusionList":
        return cls(frozenset(s.strip(".").lower() for s in suffixes if s.strip(".")))

    def extended(self, extra: Iterable[str]) -> "ExclusionList":
        return ExclusionList.of(set(self.suffixes) | set(extra))

    def matches(self, host: str) -> bool:
        host = host.rstrip(".").lower()
        labels = host.split(".")
        return any(".".join(labels[i:]) in self.suffixes for i in range(len(labels)))


def query_key(surface: str) -> str:
    return hashlib.sha256(surface.encode("utf-8")).hexdigest()


class FixtureSearchBackend:
    """Offline backend reading ``<sha256(query)>.json`` files from a directory.

    Each file is either a JSON list of URLs or an object with a ``results``
    list; an object may instead carry ``"error": "rate_limited"`` or any
    other error string to simulate backend failures.
    """

    def __init__(self, root: str | Path, page_size: int = MAX_RESULTS_PER_QUERY):
        self.root = Path(root)
        self.page_size = page_size
        self.calls = 0
        self._lock = threading.Lock()

    def query(self, text: str, count: int) -> list[str]:
        with self._lock:
            self.calls += 1
        path = self.root / f"{query_key(text)}.json"
        if not path.exists():
            return []
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise BackendError(f"malformed fixture {path.name}: {exc}") from exc
        if isinstance(payload, dict):
            error = payload.get("error")
            if error == "rate_limited":
                raise RateLimited(text)
            if error:
                raise BackendError(str(error))
            payload = payload.get("results", [])
        if not isinstance(payload, list):
            raise BackendError(f"fixture {path.name} holds no result list")
        return [str(u) for u in payload[:count]]

    @staticmethod
    def write(root: str | Path, surface: str, urls: Sequence[str]) -> Path:
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        path = root / f"{query_key(surface)}.json"
        path.write_text(json.dumps({"query": surface, "results": list(urls)}, ensure_ascii=False, indent=1), encoding="utf-8")
        return path


def _dig(payload: Any, path: str) -> Any:
    for part in filter(None, path.split(".")):
        if not isinstance(payload, dict) or part not in payload:
            raise BackendError(f"response lacks field {path!r}")
        payload = payload[part]
    return payload


class HttpSearchBackend:
    """Live JSON web-search API client.

    Query text goes in ``query_param``, the key in the ``key_header``
    request header. Results are read from ``results_path`` (a dotted path to
    a list) and each item's ``url_field``.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str = "",
        key_header: str = "Ocp-Apim-Subscription-Key",
        query_param: str = "q",
        count_param: str = "count",
        results_path: str = "webPages.value",
        url_field: str = "url",
        extra_params: dict[str, str] | None = None,
        page_size: int = MAX_RESULTS_PER_QUERY,
        max_qps: float = 3.0,
        max_in_flight: int = 4,
        timeout: float = 20.0,
        session: requests.Session | None = None,
    ):
        self.endpoint = endpoint
        self.api_key = api_key
        self.key_header = key_header
        self.query_param = query_param
        self.count_param = count_param
        self.results_path = results_path
        self.url_field = url_field
        self.extra_params = dict(extra_params or {})
        self.page_size = page_size
        self.timeout = timeout
        self._session = session or requests.Session()
        self._interval = 1.0 / max_qps if max_qps > 0 else 0.0
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._pace_lock = threading.Lock()
        self._next_start = 0.0

    def _pace(self) -> None:
        with self._pace_lock:
            now = time.monotonic()
            start = max(now, self._next_start)
            self._next_start = start + self._interval
        if start > now:
            time.sleep(start - now)

    def query(self, text: str, count: int) -> list[str]:
        params = {**self.extra_params, self.query_param: text, self.count_param: str(count)}
        headers = {self.key_header: self.api_key} if self.api_key else {}
        with self._slots:
            self._pace()
            try:
                resp = self._session.get(self.endpoint, params=params, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                raise BackendError(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimited(f"HTTP 429 for {text!r}")
        if resp.status_code != 200:
            raise BackendError(f"HTTP {resp.status_code} for {text!r}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise BackendError(f"non-JSON response: {exc}") from exc
        items = _dig(payload, self.results_path)
        if not isinstance(items, list):
            raise BackendError(f"{self.results_path!r} is not a list")
        urls = []
        for item in items:
            url = item.get(self.url_field) if isinstance(item, dict) else item
            if isinstance(url, str):
                urls.append(url)
        return urls[:count]


def search(
    phrase: Phrase,
    backend: SearchBackend,
    limit: int = MAX_RESULTS_PER_QUERY,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> list[SearchResult]:
    """One backend request for ``phrase`` (plus one retry after a rate limit)."""
    surface = phrase.surface
    if not surface:
        raise ValueError("empty phrase")
    if limit > backend.page_size:
        raise ValueError(f"limit {limit} exceeds backend page size {backend.page_size}")
    try:
        urls = backend.query(surface, limit)
    except RateLimited:
        log.info("rate limited on %r; retrying once after %.1fs", surface, backoff)
        sleep(backoff)
        urls = backend.query(surface, limit)
    results = []
    for url in urls[:limit]:
        results.append(SearchResult(url=url, host=host_of(url), rank=len(results) + 1, query=phrase))
    return results


def filter_results(
    results: Sequence[SearchResult],
    exclusions: ExclusionList,
    seen_urls: Iterable[str] = (),
    seen_hosts_probed: Iterable[str] = (),
) -> list[SearchResult]:
    """Drop excluded hosts, non-http URLs and already-seen URLs.

    Results on hosts that already have a verdict are kept but flagged
    ``probe_skippable``; their URLs still count toward the crawl budget.
    """
    seen = set(seen_urls)
    probed = set(seen_hosts_probed)
    kept: list[SearchResult] = []
    batch: set[str] = set()
    for r in results:
        if not r.host or not is_http_url(r.url) or exclusions.matches(r.host):
            continue
        key = normalize_url(r.url)
        if key in seen or key in batch:
            continue
        batch.add(key)
        skippable = r.host in probed
        kept.append(r if r.probe_skippable == skippable else replace(r, probe_skippable=skippable))
    return kept
