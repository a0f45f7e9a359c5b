"""Phrase-driven discovery of DNS-injection-censored websites."""
from .config import NgramMode, RunConfig
from .ingest import FetchPolicy, PageDocument, extract_text, fetch_page
from .kernels import BACKEND as KERNEL_BACKEND
from .pipeline import (
    BlocklistEntry,
    CorruptSnapshot,
    EmptyFrontier,
    RunState,
    Services,
    bootstrap,
    checkpoint,
    resume,
    run,
    step,
)
from .ranking import FrequencyTable, ScoredPhrase, score_phrases, select_queries, smoothed_idf
from .search import ExclusionList, SearchResult, filter_results, search
from .segment import BOUNDARY, Phrase, SegmenterDictionary, Token, extract_ngrams, segment

__version__ = "0.1.0"

__all__ = [
    "BOUNDARY", "BlocklistEntry", "CorruptSnapshot", "EmptyFrontier", "ExclusionList", "FetchPolicy",
    "FrequencyTable", "KERNEL_BACKEND", "NgramMode", "PageDocument", "Phrase", "RunConfig", "RunState",
    "ScoredPhrase", "SearchResult", "SegmenterDictionary", "Services", "Token", "bootstrap", "checkpoint",
    "extract_ngrams", "extract_text", "fetch_page", "filter_results", "resume", "run", "score_phrases",
    "search", "segment", "select_queries", "smoothed_idf", "step",
]
