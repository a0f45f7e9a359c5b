"""Mixed Chinese/Latin segmentation and n-gram phrase extraction."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

from . import kernels


class Script(enum.Enum):
    HAN = "han"
    LATIN = "latin"
    OTHER = "other"


_SCRIPT_BY_CODE = {kernels.HAN: Script.HAN, kernels.LATIN: Script.LATIN, kernels.OTHER: Script.OTHER}


def script_of(text: str) -> Script:
    if text and all(kernels.is_han(ord(ch)) for ch in text):
        return Script.HAN
    if text.isascii() and text.isalnum():
        return Script.LATIN
    return Script.OTHER


@dataclass(frozen=True, order=True)
class Token:
    text: str
    script: Script = field(compare=False)

    def __post_init__(self) -> None:
        if not self.text or any(ch.isspace() for ch in self.text):
            raise ValueError(f"invalid token text: {self.text!r}")

    @classmethod
    def of(cls, text: str) -> "Token":
        return cls(text, script_of(text))


class _Boundary:
    """Sentence-boundary marker in a token stream."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOUNDARY"

    def __reduce__(self):
        return (_Boundary, ())


BOUNDARY = _Boundary()

TokenStream = Sequence[Union[Token, _Boundary]]


@dataclass(frozen=True)
class Phrase:
    """An n-gram of 1-3 tokens. Hash and equality go through ``surface``."""

    tokens: tuple[Token, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.tokens) <= 3:
            raise ValueError("a phrase has 1 to 3 tokens")

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def surface(self) -> str:
        return " ".join(t.text for t in self.tokens)

    @classmethod
    def from_surface(cls, surface: str) -> "Phrase":
        return cls(tuple(Token.of(part) for part in surface.split()))

    @classmethod
    def of(cls, *texts: str) -> "Phrase":
        return cls(tuple(Token.of(t) for t in texts))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Phrase):
            return NotImplemented
        return self.surface == other.surface

    def __hash__(self) -> int:
        return hash(self.surface)

    def __lt__(self, other: "Phrase") -> bool:
        return self.surface < other.surface

    def __str__(self) -> str:
        return self.surface


@dataclass(frozen=True)
class SegmenterDictionary:
    entries: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if any(len(e) < 1 for e in self.entries):
            raise ValueError("dictionary entries must be non-empty")

    @property
    def max_word_len(self) -> int:
        return max((len(e) for e in self.entries), default=0)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "SegmenterDictionary":
        return cls(frozenset(w.strip() for w in words if w.strip()))

    @classmethod
    def load(cls, path: str | Path) -> "SegmenterDictionary":
        """Read a UTF-8 word list, one entry per line; ``#`` lines are comments."""
        words = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line and not line.startswith("#"):
                    words.append(line)
        return cls.from_words(words)

    def __contains__(self, word: str) -> bool:
        return word in self.entries


EMPTY_DICTIONARY = SegmenterDictionary()


def segment(text: str, dictionary: SegmenterDictionary = EMPTY_DICTIONARY) -> list[Token | _Boundary]:
    """Tokenize ``text``.

    Han runs are split by forward maximum matching against ``dictionary``;
    any other run of letters/digits becomes one token. Punctuation, symbols
    and line breaks become ``BOUNDARY`` markers.
    """
    out: list[Token | _Boundary] = []
    for item in kernels.scan(text, dictionary.entries, dictionary.max_word_len):
        if item is None:
            out.append(BOUNDARY)
        else:
            code, piece = item
            out.append(Token(piece, _SCRIPT_BY_CODE[code]))
    return out


def _phrase_eligible(token: Token) -> bool:
    if token.text.isdigit():
        return False
    if token.script is Script.LATIN and len(token.text) == 1 and token.text.isalpha():
        return False
    return True


def extract_ngrams(tokens: TokenStream, n: int) -> dict[Phrase, int]:
    """Count every n-token window that stays inside one sentence.

    Windows touching a digits-only token or a single Latin letter are dropped.
    """
    if n not in (1, 2, 3):
        raise ValueError(f"n must be 1, 2 or 3, got {n}")
    texts: list[str | None] = []
    by_text: dict[str, Token] = {}
    for tok in tokens:
        if isinstance(tok, Token) and _phrase_eligible(tok):
            texts.append(tok.text)
            by_text.setdefault(tok.text, tok)
        else:
            texts.append(None)
    raw = kernels.count_ngrams(texts, n)
    return {Phrase(tuple(by_text[t] for t in key)): c for key, c in raw.items()}


def page_phrases(text: str, dictionary: SegmenterDictionary, n: int) -> dict[Phrase, int]:
    return extract_ngrams(segment(text, dictionary), n)
