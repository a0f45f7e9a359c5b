"""Run configuration: one JSON file, every key overridable from the command line."""
from __future__ import annotations

import dataclasses
import enum
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .search import DEFAULT_EXCLUSIONS, MAX_RESULTS_PER_QUERY


class NgramMode(str, enum.Enum):
    UNIGRAM = "unigram"
    BIGRAM = "bigram"
    TRIGRAM = "trigram"

    @property
    def n(self) -> int:
        return {"unigram": 1, "bigram": 2, "trigram": 3}[self.value]


@dataclass
class FetchSettings:
    timeout: float = 15.0
    max_body_bytes: int = 1 << 20
    max_redirects: int = 5
    user_agent: str = "censorscout/0.1 (+censorship measurement research)"
    per_host_delay: float = 1.0
    max_in_flight: int = 16
    respect_robots: bool = True


@dataclass
class ProbeSettings:
    targets: list[str] = field(default_factory=list)
    targets_file: str = ""
    control_host: str = ""
    trials: int = 3
    wait: float = 2.0
    max_in_flight: int = 16
    validate_targets: bool = True


@dataclass
class SearchSettings:
    backend: str = "http"  # "http" or "fixture"
    endpoint: str = "https://api.bing.microsoft.com/v7.0/search"
    api_key_env: str = "CENSORSCOUT_SEARCH_KEY"
    key_header: str = "Ocp-Apim-Subscription-Key"
    query_param: str = "q"
    count_param: str = "count"
    results_path: str = "webPages.value"
    url_field: str = "url"
    market: str = ""
    market_param: str = "mkt"
    fixture_dir: str = ""
    max_qps: float = 3.0
    max_in_flight: int = 4
    backoff: float = 2.0


@dataclass
class CorpusSettings:
    table: str = ""
    remote_endpoint: str = ""
    remote_corpus_size: int = 0
    remote_query_param: str = "q"
    remote_count_field: str = "count"
    cache: str = ""


@dataclass
class RunConfig:
    seed_urls: list[str] = field(default_factory=list)
    seeds_file: str = ""
    ngram_mode: NgramMode = NgramMode.UNIGRAM
    url_budget: int = 1_000_000
    queries_per_page: int = 10
    results_per_query: int = MAX_RESULTS_PER_QUERY
    exclusions: list[str] = field(default_factory=lambda: list(DEFAULT_EXCLUSIONS))
    dictionary: str = ""
    output_dir: str = "run-output"
    checkpoint_every: int = 50
    fetch: FetchSettings = field(default_factory=FetchSettings)
    probe: ProbeSettings = field(default_factory=ProbeSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    corpus: CorpusSettings = field(default_factory=CorpusSettings)

    def __post_init__(self) -> None:
        self.ngram_mode = NgramMode(self.ngram_mode)
        self.validate()

    def validate(self) -> None:
        if self.url_budget < 1:
            raise ValueError("url_budget must be >= 1")
        if not 1 <= self.results_per_query <= MAX_RESULTS_PER_QUERY:
            raise ValueError(f"results_per_query must be in 1..{MAX_RESULTS_PER_QUERY}")
        if self.queries_per_page < 1:
            raise ValueError("queries_per_page must be >= 1")

    def all_seeds(self) -> list[str]:
        seeds = list(self.seed_urls)
        if self.seeds_file:
            for line in Path(self.seeds_file).read_text(encoding="utf-8").splitlines():
                line = line.split("#", 1)[0].strip()
                if line:
                    seeds.append(line)
        return seeds

    def to_dict(self) -> dict[str, Any]:
        return _to_jsonable(dataclasses.asdict(self))

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        return _build(cls, data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_to_jsonable(v) for v in obj]
    return obj


def _build(cls, data: dict[str, Any]):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            value = _build(hint, value or {})
        kwargs[name] = value
    return cls(**kwargs)


def iter_keys(cls=RunConfig, prefix: str = ""):
    """Yield ``(dotted_key, type)`` for every leaf setting."""
    hints = typing.get_type_hints(cls)
    for f in dataclasses.fields(cls):
        hint = hints[f.name]
        if dataclasses.is_dataclass(hint):
            yield from iter_keys(hint, f"{prefix}{f.name}.")
        else:
            yield f"{prefix}{f.name}", hint


def coerce(value: str, hint) -> Any:
    if hint is bool:
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if hint is int:
        return int(value.replace("_", ""))
    if hint is float:
        return float(value)
    if typing.get_origin(hint) is list:
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(hint, type) and issubclass(hint, enum.Enum):
        return hint(value)
    return value


def apply_overrides(config: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    """Return a new config with dotted-key overrides applied."""
    data = config.to_dict()
    for key, value in overrides.items():
        node = data
        *parents, leaf = key.split(".")
        for part in parents:
            node = node[part]
        if leaf not in node:
            raise KeyError(key)
        node[leaf] = _to_jsonable(value)
    return RunConfig.from_dict(data)
