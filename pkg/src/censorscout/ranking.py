"""TF-IDF scoring of page phrases against a background corpus."""
from __future__ import annotations

import logging
import math
import re
import sqlite3
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import requests

from .segment import Phrase

log = logging.getLogger(__name__)

IdfFunction = Callable[[int, int], float]


def smoothed_idf(df: int, corpus_size: int) -> float:
    """``ln((N + 1) / (df + 1)) + 1``; finite at df = 0 and equal to 1 at df = N."""
    return math.log((corpus_size + 1) / (df + 1)) + 1.0


class CorpusFrequencyProvider(Protocol):
    corpus_size: int

    def df(self, phrase: Phrase) -> int: ...


class FrequencyTable:
    """In-memory document frequencies keyed by phrase surface form."""

    def __init__(self, frequencies: Mapping[str, int], corpus_size: int):
        if corpus_size < 1:
            raise ValueError("corpus_size must be >= 1")
        for surface, count in frequencies.items():
            if not 0 <= count <= corpus_size:
                raise ValueError(f"df out of range for {surface!r}: {count}")
        self._freq = dict(frequencies)
        self.corpus_size = corpus_size

    def df(self, phrase: Phrase) -> int:
        return self._freq.get(phrase.surface, 0)

    def __len__(self) -> int:
        return len(self._freq)

    @classmethod
    def load(cls, path: str | Path) -> "FrequencyTable":
        """Parse ``#N <size>`` followed by ``<phrase>\\t<df>`` lines."""
        corpus_size = None
        freq: dict[str, int] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\r\n")
                if not line:
                    continue
                if line.startswith("#"):
                    m = re.match(r"#N\s+(\d+)\s*$", line)
                    if m:
                        corpus_size = int(m.group(1))
                    continue
                surface, sep, count = line.rpartition("\t")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected '<phrase>\\t<df>'")
                freq[" ".join(surface.split())] = int(count)
        if corpus_size is None:
            raise ValueError(f"{path}: missing '#N <corpus_size>' header")
        return cls(freq, corpus_size)

    def dump(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#N {self.corpus_size}\n")
            for surface in sorted(self._freq):
                fh.write(f"{surface}\t{self._freq[surface]}\n")

    @classmethod
    def from_documents(cls, documents: Iterable[Iterable[Phrase]]) -> "FrequencyTable":
        """Build document frequencies from per-document phrase collections."""
        freq: dict[str, int] = {}
        total = 0
        for doc in documents:
            total += 1
            for surface in {p.surface for p in doc}:
                freq[surface] = freq.get(surface, 0) + 1
        return cls(freq, max(total, 1))


class RemoteFrequencyClient:
    """Phrase-frequency web service client with an on-disk sqlite cache.

    The phrase is sent URL-encoded in ``query_param``; the body must hold a
    single integer, either bare or under ``count_field`` of a JSON object.
    Lookups that fail count as df = 0.
    """

    def __init__(
        self,
        endpoint: str,
        corpus_size: int,
        cache_path: str | Path | None = None,
        query_param: str = "q",
        count_field: str = "count",
        timeout: float = 10.0,
        session: requests.Session | None = None,
    ):
        if corpus_size < 1:
            raise ValueError("corpus_size must be >= 1")
        self.endpoint = endpoint
        self.corpus_size = corpus_size
        self.query_param = query_param
        self.count_field = count_field
        self.timeout = timeout
        self._session = session or requests.Session()
        self._write_lock = threading.Lock()
        self._cache_path = str(cache_path) if cache_path else ":memory:"
        self._local = threading.local()
        self._memory_conn = None
        if self._cache_path == ":memory:":
            self._memory_conn = sqlite3.connect(":memory:", check_same_thread=False)
        with self._write_lock:
            conn = self._conn()
            conn.execute("CREATE TABLE IF NOT EXISTS df (surface TEXT PRIMARY KEY, count INTEGER NOT NULL)")
            conn.commit()

    def _conn(self) -> sqlite3.Connection:
        if self._memory_conn is not None:
            return self._memory_conn
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = sqlite3.connect(self._cache_path, timeout=30)
            self._local.conn = conn
        return conn

    def _cached(self, surface: str) -> int | None:
        if self._memory_conn is not None:
            with self._write_lock:
                row = self._conn().execute("SELECT count FROM df WHERE surface = ?", (surface,)).fetchone()
        else:
            row = self._conn().execute("SELECT count FROM df WHERE surface = ?", (surface,)).fetchone()
        return None if row is None else int(row[0])

    def _store(self, surface: str, count: int) -> None:
        with self._write_lock:
            conn = self._conn()
            conn.execute("INSERT OR REPLACE INTO df (surface, count) VALUES (?, ?)", (surface, count))
            conn.commit()

    def _parse(self, resp: requests.Response) -> int:
        try:
            payload = resp.json()
        except ValueError:
            payload = resp.text.strip()
        if isinstance(payload, dict):
            payload = payload[self.count_field]
        if isinstance(payload, bool):
            raise ValueError("boolean is not a frequency")
        if isinstance(payload, (int, float)):
            return int(payload)
        return int(str(payload).strip())

    def df(self, phrase: Phrase) -> int:
        surface = phrase.surface
        hit = self._cached(surface)
        if hit is not None:
            return hit
        try:
            resp = self._session.get(self.endpoint, params={self.query_param: surface}, timeout=self.timeout)
            resp.raise_for_status()
            count = self._parse(resp)
        except (requests.RequestException, ValueError, KeyError, TypeError) as exc:
            log.warning("frequency lookup failed for %r: %s; using df=0", surface, exc)
            return 0
        count = max(0, min(count, self.corpus_size))
        self._store(surface, count)
        return count


@dataclass(frozen=True)
class ScoredPhrase:
    phrase: Phrase
    tf: int
    df: int
    score: float


def _rank_key(sp: ScoredPhrase):
    return (-sp.score, -sp.tf, sp.phrase.surface)


def score_phrases(
    counts: Mapping[Phrase, int],
    corpus: CorpusFrequencyProvider,
    idf: IdfFunction = smoothed_idf,
) -> list[ScoredPhrase]:
    """Score each phrase as ``tf * idf(df, N)``, best first.

    Ties fall back to higher tf, then the lexicographically smaller surface.
    """
    n_docs = corpus.corpus_size
    scored = []
    for phrase, tf in counts.items():
        if tf < 1:
            continue
        df = corpus.df(phrase)
        scored.append(ScoredPhrase(phrase, tf, df, tf * idf(df, n_docs)))
    scored.sort(key=_rank_key)
    return scored


def select_queries(scored: Sequence[ScoredPhrase], k: int, used: Iterable[Phrase] = ()) -> list[Phrase]:
    if k < 1:
        raise ValueError("k must be >= 1")
    used = set(used)
    picked: list[Phrase] = []
    for sp in scored:
        if sp.phrase in used:
            continue
        used.add(sp.phrase)
        picked.append(sp.phrase)
        if len(picked) == k:
            break
    return picked
