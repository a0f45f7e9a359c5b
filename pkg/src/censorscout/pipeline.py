"""The discovery loop: probe seeds, extract and rank phrases, search, probe results, repeat.

Pages from censored hosts go on a FIFO frontier. Each popped page yields
up to ``queries_per_page`` unused phrases; each phrase costs one search
call. Every new result URL counts against ``url_budget``. New hosts found
censored go on the blocklist, and their pages go back on the frontier.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

from .config import NgramMode, RunConfig
from .dns.probe import ProbeOutcome, Verdict
from .ingest import FetchError, PageDocument, host_of, is_http_url, normalize_url
from .ranking import CorpusFrequencyProvider, IdfFunction, score_phrases, select_queries, smoothed_idf
from .search import BackendError, ExclusionList, SearchBackend, filter_results, search
from .segment import Phrase, SegmenterDictionary, page_phrases

log = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "censorscout.snapshot"
SNAPSHOT_VERSION = 1


class EmptyFrontier(RuntimeError):
    """No seed page was confirmed censored, so there is nothing to expand."""


class CorruptSnapshot(ValueError):
    pass


class Prober(Protocol):
    def probe(self, host: str) -> ProbeOutcome: ...

    def probe_many(self, hosts: Sequence[str]) -> list[ProbeOutcome]: ...


def wall_clock(_url_counter: int) -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


@dataclass
class Services:
    """Everything the loop talks to. Swapped wholesale for the offline simulation."""

    fetch: Callable[[str], PageDocument]
    backend: SearchBackend
    prober: Prober
    corpus: CorpusFrequencyProvider
    dictionary: SegmenterDictionary = field(default_factory=SegmenterDictionary)
    clock: Callable[[int], datetime] = wall_clock
    idf: IdfFunction = smoothed_idf
    fetch_in_flight: int = 16
    sleep: Callable[[float], None] | None = None


@dataclass(frozen=True)
class BlocklistEntry:
    host: str
    first_seen_at: datetime
    discovered_via_phrase: str
    source_result_url: str
    ngram_mode: NgramMode

    def to_tsv(self) -> str:
        return "\t".join(
            (self.host, self.first_seen_at.isoformat(), self.discovered_via_phrase, self.source_result_url,
             self.ngram_mode.value)
        )

    def to_dict(self) -> dict:
        return {
            "host": self.host,
            "first_seen_at": self.first_seen_at.isoformat(),
            "phrase": self.discovered_via_phrase,
            "source_url": self.source_result_url,
            "ngram_mode": self.ngram_mode.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BlocklistEntry":
        return cls(d["host"], datetime.fromisoformat(d["first_seen_at"]), d["phrase"], d["source_url"],
                   NgramMode(d["ngram_mode"]))


@dataclass
class PhraseStats:
    results_returned: int = 0
    unique_hosts: int = 0
    censored_hosts: int = 0
    new_hosts: int = 0
    urls_accepted: int = 0
    error: str | None = None

    def to_dict(self) -> dict:
        return dict(vars(self))


@dataclass
class RunState:
    ngram_mode: NgramMode
    frontier: deque[PageDocument] = field(default_factory=deque)
    seed_urls: set[str] = field(default_factory=set)
    seed_hosts: set[str] = field(default_factory=set)
    seen_urls: set[str] = field(default_factory=set)
    url_counter: int = 0
    host_verdicts: dict[str, ProbeOutcome] = field(default_factory=dict)
    host_url_counts: dict[str, int] = field(default_factory=dict)
    used_phrases: set[Phrase] = field(default_factory=set)
    phrase_stats: dict[Phrase, PhraseStats] = field(default_factory=dict)
    blocklist: dict[str, BlocklistEntry] = field(default_factory=dict)
    discovery_log: list[tuple[int, str]] = field(default_factory=list)
    pages_processed: int = 0
    steps: int = 0

    def verdict(self, host: str) -> Verdict | None:
        outcome = self.host_verdicts.get(host)
        return outcome.verdict if outcome else None

    def is_censored(self, host: str) -> bool:
        return self.verdict(host) is Verdict.CENSORED

    def check_invariants(self, url_budget: int | None = None) -> None:
        if url_budget is not None and self.url_counter > url_budget:
            raise AssertionError(f"url_counter {self.url_counter} exceeds budget {url_budget}")
        if self.url_counter != len(self.seen_urls):
            raise AssertionError("url_counter != |seen_urls|")
        for host in self.blocklist:
            if not self.is_censored(host):
                raise AssertionError(f"blocklist host {host} lacks a Censored verdict")
        counters = [c for c, _ in self.discovery_log]
        if counters != sorted(counters):
            raise AssertionError("discovery_log is not ordered by url_counter")

    # serialization -------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "ngram_mode": self.ngram_mode.value,
            "frontier": [p.to_dict() for p in self.frontier],
            "seed_urls": sorted(self.seed_urls),
            "seed_hosts": sorted(self.seed_hosts),
            "seen_urls": sorted(self.seen_urls),
            "url_counter": self.url_counter,
            "host_verdicts": {h: self.host_verdicts[h].to_dict() for h in sorted(self.host_verdicts)},
            "host_url_counts": {h: self.host_url_counts[h] for h in sorted(self.host_url_counts)},
            "used_phrases": sorted(p.surface for p in self.used_phrases),
            "phrase_stats": {p.surface: s.to_dict() for p, s in sorted(self.phrase_stats.items(), key=lambda kv: kv[0].surface)},
            "blocklist": [e.to_dict() for e in self.blocklist.values()],
            "discovery_log": [[c, h] for c, h in self.discovery_log],
            "pages_processed": self.pages_processed,
            "steps": self.steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunState":
        return cls(
            ngram_mode=NgramMode(d["ngram_mode"]),
            frontier=deque(PageDocument.from_dict(p) for p in d["frontier"]),
            seed_urls=set(d["seed_urls"]),
            seed_hosts=set(d["seed_hosts"]),
            seen_urls=set(d["seen_urls"]),
            url_counter=d["url_counter"],
            host_verdicts={h: ProbeOutcome.from_dict(o) for h, o in d["host_verdicts"].items()},
            host_url_counts=dict(d["host_url_counts"]),
            used_phrases={Phrase.from_surface(s) for s in d["used_phrases"]},
            phrase_stats={Phrase.from_surface(s): PhraseStats(**v) for s, v in d["phrase_stats"].items()},
            blocklist={e["host"]: BlocklistEntry.from_dict(e) for e in d["blocklist"]},
            discovery_log=[(c, h) for c, h in d["discovery_log"]],
            pages_processed=d["pages_processed"],
            steps=d["steps"],
        )


def _fetch_all(services: Services, urls: Sequence[str]) -> list[PageDocument]:
    """Fetch concurrently; failures are logged and dropped, order is kept."""

    def one(url: str) -> PageDocument | None:
        try:
            return services.fetch(url)
        except FetchError as exc:
            log.info("skip page %s: %s", url, exc.reason)
        except Exception:  # noqa: BLE001 - one bad page never halts the run
            log.exception("unexpected failure fetching %s", url)
        return None

    if len(urls) > 1 and services.fetch_in_flight > 1:
        with ThreadPoolExecutor(max_workers=min(services.fetch_in_flight, len(urls))) as pool:
            pages = list(pool.map(one, urls))
    else:
        pages = [one(u) for u in urls]
    return [p for p in pages if p is not None]


def _probe_all(services: Services, hosts: Sequence[str]) -> list[ProbeOutcome]:
    try:
        return services.prober.probe_many(hosts)
    except Exception:  # noqa: BLE001
        log.exception("batch probe failed; probing hosts one by one")
    outcomes = []
    for h in hosts:
        try:
            outcomes.append(services.prober.probe(h))
        except Exception as exc:  # noqa: BLE001
            outcomes.append(ProbeOutcome(h, Verdict.INCONCLUSIVE, error=str(exc)))
    return outcomes


def bootstrap(seeds: Iterable[str], config: RunConfig, services: Services) -> RunState:
    """Probe every seed host and queue the pages of hosts that are censored now."""
    state = RunState(ngram_mode=config.ngram_mode)
    ordered: list[str] = []
    for url in seeds:
        if not is_http_url(url):
            log.warning("ignoring malformed seed %r", url)
            continue
        key = normalize_url(url)
        if key not in state.seed_urls:
            state.seed_urls.add(key)
            ordered.append(url)
    if not ordered:
        raise ValueError("no usable seed URLs")
    hosts = list(dict.fromkeys(host_of(u) for u in ordered))
    state.seed_hosts.update(hosts)
    for host, outcome in zip(hosts, _probe_all(services, hosts)):
        state.host_verdicts[host] = outcome
    censored_urls = [u for u in ordered if state.is_censored(host_of(u))]
    state.frontier.extend(_fetch_all(services, censored_urls))
    if not state.frontier:
        tally: dict[str, int] = {}
        for o in state.host_verdicts.values():
            tally[o.verdict.value] = tally.get(o.verdict.value, 0) + 1
        raise EmptyFrontier(
            f"none of {len(ordered)} seed pages is currently censored and fetchable "
            f"(host verdicts: {tally}, censored pages fetched: 0 of {len(censored_urls)})"
        )
    log.info("bootstrap: %d seed pages, %d censored pages queued", len(ordered), len(state.frontier))
    return state


def _process_phrase(state: RunState, phrase: Phrase, config: RunConfig, services: Services,
                    exclusions: ExclusionList) -> None:
    stats = PhraseStats()
    state.phrase_stats[phrase] = stats
    try:
        kwargs = {"sleep": services.sleep} if services.sleep else {}
        results = search(phrase, services.backend, config.results_per_query, config.search.backoff, **kwargs)
    except BackendError as exc:
        log.warning("search failed for %r: %s", phrase.surface, exc)
        stats.error = str(exc) or type(exc).__name__
        return

    visible = filter_results(results, exclusions)
    stats.results_returned = len(visible)
    fresh = [r for r in visible
             if (key := normalize_url(r.url)) not in state.seen_urls and key not in state.seed_urls]

    accepted: list[tuple[str, str, int]] = []
    for r in fresh:
        if state.url_counter >= config.url_budget:
            break
        key = normalize_url(r.url)
        state.seen_urls.add(key)
        state.url_counter += 1
        state.host_url_counts[r.host] = state.host_url_counts.get(r.host, 0) + 1
        accepted.append((r.url, r.host, state.url_counter))
    stats.urls_accepted = len(accepted)

    pending = [h for h in dict.fromkeys(host for _, host, _ in accepted) if h not in state.host_verdicts]
    for host, outcome in zip(pending, _probe_all(services, pending)):
        state.host_verdicts[host] = outcome

    to_fetch = []
    for url, host, counter in accepted:
        if not state.is_censored(host):
            continue
        to_fetch.append(url)
        if host in state.blocklist or host in state.seed_hosts or exclusions.matches(host):
            continue
        state.blocklist[host] = BlocklistEntry(host, services.clock(counter), phrase.surface, url, config.ngram_mode)
        state.discovery_log.append((counter, host))
        stats.new_hosts += 1
    state.frontier.extend(_fetch_all(services, to_fetch))

    hosts = set(r.host for r in visible)
    stats.unique_hosts = len(hosts)
    stats.censored_hosts = sum(1 for h in hosts if state.is_censored(h))


def step(state: RunState, config: RunConfig, services: Services) -> RunState:
    """Expand the oldest frontier page. Mutates and returns ``state``."""
    if not state.frontier:
        raise EmptyFrontier("frontier is empty")
    if state.url_counter >= config.url_budget:
        return state
    exclusions = ExclusionList.of(config.exclusions)
    page = state.frontier.popleft()
    state.pages_processed += 1
    state.steps += 1
    try:
        counts = page_phrases(page.body_text, services.dictionary, config.ngram_mode.n)
    except Exception:  # noqa: BLE001
        log.exception("phrase extraction failed on %s", page.url)
        return state
    if not counts:
        return state
    scored = score_phrases(counts, services.corpus, services.idf)
    for phrase in select_queries(scored, config.queries_per_page, state.used_phrases):
        if state.url_counter >= config.url_budget:
            break
        state.used_phrases.add(phrase)
        try:
            _process_phrase(state, phrase, config, services, exclusions)
        except Exception:  # noqa: BLE001 - a single phrase never halts the run
            log.exception("phrase %r failed", phrase.surface)
    return state


def run(
    config: RunConfig,
    services: Services,
    state: RunState | None = None,
    snapshot_path: str | Path | None = None,
    max_steps: int | None = None,
) -> RunState:
    """Bootstrap (unless resuming ``state``) and step until budget or frontier runs out."""
    if state is None:
        state = bootstrap(config.all_seeds(), config, services)
        if snapshot_path:
            checkpoint(state, snapshot_path, config)
    taken = 0
    while state.frontier and state.url_counter < config.url_budget:
        if max_steps is not None and taken >= max_steps:
            break
        step(state, config, services)
        taken += 1
        if snapshot_path and config.checkpoint_every and state.steps % config.checkpoint_every == 0:
            checkpoint(state, snapshot_path, config)
    if snapshot_path:
        checkpoint(state, snapshot_path, config)
    log.info("run finished: %d URLs, %d pages, %d censored hosts discovered",
             state.url_counter, state.pages_processed, len(state.blocklist))
    return state


# --- persistence -------------------------------------------------------------

def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def snapshot_bytes(state: RunState, config: RunConfig | None = None) -> bytes:
    payload = {"state": state.to_dict(), "config": config.to_dict() if config else None}
    body = _canonical(payload)
    envelope = {
        "format": SNAPSHOT_FORMAT,
        "version": SNAPSHOT_VERSION,
        "sha256": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        "payload": payload,
    }
    return (_canonical(envelope) + "\n").encode("utf-8")


def checkpoint(state: RunState, path: str | Path, config: RunConfig | None = None) -> Path:
    """Write a checksummed snapshot atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = snapshot_bytes(state, config)
    fd, tmp = tempfile.mkstemp(prefix=path.name + ".", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def load_snapshot(path: str | Path) -> tuple[RunState, RunConfig | None]:
    try:
        envelope = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptSnapshot(f"{path}: unreadable snapshot ({exc})") from exc
    if not isinstance(envelope, dict) or envelope.get("format") != SNAPSHOT_FORMAT:
        raise CorruptSnapshot(f"{path}: not a {SNAPSHOT_FORMAT} file")
    if envelope.get("version") != SNAPSHOT_VERSION:
        raise CorruptSnapshot(f"{path}: unsupported snapshot version {envelope.get('version')!r}")
    payload = envelope.get("payload")
    if not isinstance(payload, dict) or hashlib.sha256(_canonical(payload).encode("utf-8")).hexdigest() != envelope.get("sha256"):
        raise CorruptSnapshot(f"{path}: checksum mismatch")
    try:
        state = RunState.from_dict(payload["state"])
        config = RunConfig.from_dict(payload["config"]) if payload.get("config") else None
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"{path}: malformed state ({exc})") from exc
    return state, config


def resume(path: str | Path) -> RunState:
    return load_snapshot(path)[0]


def blocklist_lines(state: RunState) -> list[str]:
    return [entry.to_tsv() for entry in state.blocklist.values()]


def write_blocklist(state: RunState, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in blocklist_lines(state):
            fh.write(line + "\n")
    return path
