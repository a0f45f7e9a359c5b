"""Offline worlds for end-to-end runs: fixture pages, fixture search, simulated censor.

A world directory holds::

    world.json        seeds, censored hosts, url -> page file map, config overrides
    pages/            HTML files
    search/           FixtureSearchBackend files (sha256 of query surface)
    dictionary.txt    segmenter word list
    corpus.tsv        '#N <size>' plus '<phrase>\\t<df>' lines
"""
from __future__ import annotations

import json
import random
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Iterator

from .config import NgramMode, RunConfig, apply_overrides
from .dns.probe import DnsProber
from .dns.simcensor import SimulatedCensor
from .ingest import PageDocument, TransportFailure, extract_text, normalize_url
from .pipeline import Services
from .ranking import FrequencyTable
from .search import FixtureSearchBackend
from .segment import SegmenterDictionary

EPOCH = datetime(2017, 11, 11, tzinfo=timezone.utc)
CONTROL_HOST = "control.censorscout.invalid"

SIMULATION_DEFAULTS = {
    "probe.trials": 2,
    "probe.wait": 0.1,
    "probe.control_host": CONTROL_HOST,
    "fetch.per_host_delay": 0.0,
    "checkpoint_every": 0,
}


def logical_clock(url_counter: int) -> datetime:
    """Timestamps that depend only on run progress, so reruns are byte-identical."""
    return EPOCH + timedelta(seconds=url_counter)


class FixtureFetcher:
    def __init__(self, pages: dict[str, str]):
        self._pages = {normalize_url(u): html for u, html in pages.items()}
        self.calls = 0

    def __call__(self, url: str) -> PageDocument:
        self.calls += 1
        html = self._pages.get(normalize_url(url))
        if html is None:
            raise TransportFailure(url, "HTTP 404")
        raw = html.encode("utf-8")
        return PageDocument.create(url, extract_text(raw, "utf-8"), EPOCH, len(raw))


@dataclass
class World:
    root: Path
    seeds: list[str]
    censored_hosts: set[str]
    pages: dict[str, str]
    config_overrides: dict = field(default_factory=dict)

    @classmethod
    def load(cls, root: str | Path) -> "World":
        root = Path(root)
        manifest = json.loads((root / "world.json").read_text(encoding="utf-8"))
        pages = {
            url: (root / "pages" / name).read_text(encoding="utf-8")
            for url, name in manifest.get("pages", {}).items()
        }
        return cls(
            root=root,
            seeds=list(manifest["seeds"]),
            censored_hosts={h.lower() for h in manifest.get("censored_hosts", [])},
            pages=pages,
            config_overrides=dict(manifest.get("config", {})),
        )

    def dictionary(self) -> SegmenterDictionary:
        path = self.root / "dictionary.txt"
        return SegmenterDictionary.load(path) if path.exists() else SegmenterDictionary()

    def corpus(self) -> FrequencyTable:
        path = self.root / "corpus.tsv"
        return FrequencyTable.load(path) if path.exists() else FrequencyTable({}, 1)

    def config(self, overrides: dict | None = None) -> RunConfig:
        merged = {**SIMULATION_DEFAULTS, **self.config_overrides, **(overrides or {})}
        merged["seed_urls"] = self.seeds
        return apply_overrides(RunConfig(), merged)


@contextmanager
def simulated_services(world: World, config: RunConfig) -> Iterator[tuple[Services, SimulatedCensor]]:
    """Services wired to the world's fixtures and a running simulated censor."""
    with SimulatedCensor(world.censored_hosts) as censor:
        prober = DnsProber([censor.target()], trials=config.probe.trials, wait=config.probe.wait,
                           max_in_flight=config.probe.max_in_flight)
        prober.validate(config.probe.control_host or CONTROL_HOST)
        services = Services(
            fetch=FixtureFetcher(world.pages),
            backend=FixtureSearchBackend(world.root / "search"),
            prober=prober,
            corpus=world.corpus(),
            dictionary=world.dictionary(),
            clock=logical_clock,
            fetch_in_flight=config.fetch.max_in_flight,
            sleep=lambda _s: None,
        )
        yield services, censor


# --- world generation ----------------------------------------------------------

# CJK ideographs used to mint two-character dictionary words
_HAN_POOL = "".join(chr(cp) for cp in range(0x4E00, 0x4E00 + 400))


@dataclass
class LinkedWorld:
    """In-memory description of a generated world, used as a test oracle."""

    seeds: list[str]
    censored_hosts: set[str]
    page_phrases: dict[str, list[str]]  # url -> phrase surfaces on that page
    search_index: dict[str, list[str]]  # phrase surface -> result URLs
    phrase_df: dict[str, int]
    corpus_size: int = 1000
    config: dict = field(default_factory=dict)

    def write(self, root: str | Path) -> Path:
        root = Path(root)
        (root / "pages").mkdir(parents=True, exist_ok=True)
        page_files = {}
        for i, (url, phrases) in enumerate(sorted(self.page_phrases.items())):
            name = f"page{i:04d}.html"
            page_files[url] = name
            (root / "pages" / name).write_text(render_page(url, phrases), encoding="utf-8")
        for surface, urls in self.search_index.items():
            FixtureSearchBackend.write(root / "search", surface, urls)
        words = sorted({tok for p in self.page_phrases.values() for s in p for tok in s.split() if len(tok) > 1})
        (root / "dictionary.txt").write_text("# generated\n" + "".join(w + "\n" for w in words), encoding="utf-8")
        FrequencyTable(self.phrase_df, self.corpus_size).dump(root / "corpus.tsv")
        manifest = {
            "seeds": self.seeds,
            "censored_hosts": sorted(self.censored_hosts),
            "pages": page_files,
            "config": self.config,
        }
        (root / "world.json").write_text(json.dumps(manifest, indent=1, ensure_ascii=False) + "\n", encoding="utf-8")
        return root


def render_page(url: str, phrases: list[str]) -> str:
    sentences = "".join(f"<p>{p}。</p>" for p in phrases)
    return (
        "<!DOCTYPE html><html><head><meta charset=\"utf-8\"><title></title>"
        "<script>var tracker = '无关脚本';</script></head>"
        f"<body>{sentences}<!-- {url} --></body></html>"
    )


def generate_linked_world(
    seed: int = 7,
    reachable_censored: int = 12,
    unreachable_censored: int = 4,
    uncensored_pages: int = 11,
    noise_per_phrase: int = 4,
    max_phrases_per_page: int = 3,
) -> LinkedWorld:
    """Build a unigram world where the reachable censored set is known by construction.

    Two censored seed pages and one uncensored seed page start the world.
    Each reachable censored page is hung off a phrase of an earlier censored
    page. Uncensored pages appear in results too; their phrases lead to the
    unreachable censored pages, which the loop must never expand into.
    Phrase results also carry excluded-domain URLs on censored hosts and
    result-only hosts with no page.
    """
    rng = random.Random(seed)
    words = iter(_mint_words(rng))

    def host(kind: str, i: int) -> str:
        return f"{kind}{i}.example"

    seeds = ["http://seed0.example/", "http://seed1.example/", "http://seed2.example/"]
    censored = {"seed0.example", "seed1.example"}
    page_phrases: dict[str, list[str]] = {u: [] for u in seeds}
    search_index: dict[str, list[str]] = {}

    expandable = seeds[:2]
    reach_urls = []
    for i in range(reachable_censored):
        url = f"http://{host('r', i)}/story"
        censored.add(host("r", i))
        page_phrases[url] = []
        reach_urls.append(url)

    unreach_urls = []
    for i in range(unreachable_censored):
        url = f"http://{host('u', i)}/hidden"
        censored.add(host("u", i))
        page_phrases[url] = []
        unreach_urls.append(url)

    plain_urls = []
    for i in range(uncensored_pages):
        url = f"http://{host('n', i)}/page"
        page_phrases[url] = []
        plain_urls.append(url)

    noise_counter = 0

    def add_phrase(owner: str, targets: list[str]) -> None:
        nonlocal noise_counter
        surface = next(words)
        page_phrases[owner].append(surface)
        results = list(targets)
        for _ in range(noise_per_phrase):
            results.append(f"http://noise{noise_counter}.example/{noise_counter}")
            noise_counter += 1
        results.append(f"http://w{noise_counter}.blogspot.com/post")
        censored.add(f"w{noise_counter}.blogspot.com")
        results.append(f"http://twitter.com/status/{noise_counter}")
        rng.shuffle(results)
        search_index[surface] = results

    # hang each reachable page off an already-reachable censored page
    for url in reach_urls:
        candidates = [u for u in expandable if len(page_phrases[u]) < max_phrases_per_page] or expandable
        parent = rng.choice(candidates)
        extra = [rng.choice(plain_urls)] if rng.random() < 0.6 else []
        add_phrase(parent, [url] + extra)
        expandable.append(url)
    # uncensored pages lead to the unreachable censored ones
    for i, url in enumerate(unreach_urls):
        add_phrase(plain_urls[i % len(plain_urls)], [url])
    add_phrase(seeds[2], [unreach_urls[0]])
    # every uncensored page must be a search result somewhere
    for url in plain_urls:
        if not any(url in r for r in search_index.values()):
            owner = rng.choice(expandable)
            add_phrase(owner, [url])
    for url, phrases in page_phrases.items():
        if not phrases:
            add_phrase(url, [])

    phrase_df = {s: rng.randrange(0, 1000) for s in search_index}
    return LinkedWorld(
        seeds=seeds,
        censored_hosts=censored,
        page_phrases=page_phrases,
        search_index=search_index,
        phrase_df=phrase_df,
        config={"ngram_mode": NgramMode.UNIGRAM.value, "queries_per_page": 10, "url_budget": 100000},
    )


def _mint_words(rng: random.Random) -> list[str]:
    pool = list(_HAN_POOL)
    seen: set[str] = set()
    out = []
    while len(out) < 5000:
        w = rng.choice(pool) + rng.choice(pool)
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out
