import unicodedata
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censorscout.segment import (
    BOUNDARY,
    Phrase,
    Script,
    SegmenterDictionary,
    Token,
    extract_ngrams,
    segment,
)

DICT = SegmenterDictionary.from_words(["自由", "亚洲", "电台", "特首", "人权", "侵犯"])


def texts(tokens):
    return [t.text if isinstance(t, Token) else "|" for t in tokens]


def test_dictionary_word_is_one_token(kernel_impl):
    assert texts(segment("特首", SegmenterDictionary.from_words(["特首"]))) == ["特首"]


def test_empty_dictionary_splits_per_character(kernel_impl):
    assert texts(segment("特首", SegmenterDictionary())) == ["特", "首"]


def test_forward_maximum_matching(kernel_impl):
    d = SegmenterDictionary.from_words(["自由", "亚洲", "电台"])
    tokens = segment("自由亚洲电台", d)
    assert texts(tokens) == ["自由", "亚洲", "电台"]
    assert all(t.script is Script.HAN for t in tokens)


def test_longest_entry_wins(kernel_impl):
    d = SegmenterDictionary.from_words(["中国", "中国共产党", "共产党"])
    assert texts(segment("中国共产党", d)) == ["中国共产党"]


def test_mixed_script_and_boundaries(kernel_impl):
    tokens = segment("Vimeo上的视频。Hello, world!", DICT)
    assert texts(tokens) == ["Vimeo", "上", "的", "视", "频", "|", "Hello", "|", "world"]
    assert tokens[0].script is Script.LATIN


def test_other_script_token():
    (tok,) = segment("café")
    assert tok.script is Script.OTHER


def test_empty_text():
    assert segment("") == []


def test_dictionary_file(tmp_path):
    path = tmp_path / "words.txt"
    path.write_text("# comment\n特首\n\n自由亚洲\n", encoding="utf-8")
    d = SegmenterDictionary.load(path)
    assert d.entries == {"特首", "自由亚洲"}
    assert d.max_word_len == 4


def eng(text):
    return [Token.of(w) for w in text.split()]


def test_bigrams_of_english_example():
    got = extract_ngrams(eng("Chinese human rights violation"), 2)
    assert {p.surface: c for p, c in got.items()} == {
        "Chinese human": 1, "human rights": 1, "rights violation": 1,
    }


def test_trigrams_of_english_example():
    got = extract_ngrams(eng("Chinese human rights violation"), 3)
    assert {p.surface: c for p, c in got.items()} == {"Chinese human rights": 1, "human rights violation": 1}


def test_ngrams_never_cross_boundary():
    assert extract_ngrams([Token.of("ab"), BOUNDARY, Token.of("cd")], 2) == {}


def test_digit_and_single_letter_tokens_filtered():
    assert extract_ngrams(eng("in 1989 the x protest"), 2) == {}
    assert {p.surface for p in extract_ngrams(eng("big student protest 1989"), 2)} == {"big student", "student protest"}
    assert "x" not in {p.surface for p in extract_ngrams(eng("a x b"), 1)}


def test_ngram_counts_repeat():
    tokens = segment("人权。人权。人权侵犯", DICT)
    got = {p.surface: c for p, c in extract_ngrams(tokens, 1).items()}
    assert got == {"人权": 3, "侵犯": 1}


def test_invalid_n():
    with pytest.raises(ValueError):
        extract_ngrams([], 4)


def test_phrase_identity():
    p = Phrase.of("自由", "亚洲")
    assert p.surface == "自由 亚洲" and p.n == 2
    assert Phrase.from_surface("自由 亚洲") == p
    assert hash(Phrase.from_surface(p.surface)) == hash(p)


# --- properties ---------------------------------------------------------------------

alphabet = list("自由亚洲电台特首人权侵犯中国 abcdeXYZ0123.。!！?？;；,，、-\n ")
text_st = st.text(alphabet=st.sampled_from(alphabet), max_size=80)


def _is_dropped(ch):
    if ch.isspace():
        return True
    return unicodedata.category(ch)[0] in "PSCZ"


@settings(max_examples=200, deadline=None)
@given(text_st)
def test_segmentation_is_lossless(text):
    tokens = segment(text, DICT)
    rebuilt = "".join(t.text for t in tokens if isinstance(t, Token))
    assert rebuilt == "".join(ch for ch in text if not _is_dropped(ch))


@settings(max_examples=100, deadline=None)
@given(text_st)
def test_segmentation_deterministic(text):
    assert segment(text, DICT) == segment(text, DICT)


def brute_force_ngrams(stream, n):
    """Independent oracle: enumerate windows, reject any containing a break or filtered token."""
    counts = Counter()
    for i in range(len(stream) - n + 1):
        window = stream[i:i + n]
        if any(not isinstance(t, Token) for t in window):
            continue
        if any(t.text.isdigit() or (len(t.text) == 1 and t.text.isascii() and t.text.isalpha()) for t in window):
            continue
        counts[" ".join(t.text for t in window)] += 1
    return dict(counts)


token_st = st.lists(
    st.one_of(st.just(BOUNDARY), st.sampled_from(["中国", "人权", "abc", "x", "42", "Vimeo", "自由", "é"]).map(Token.of)),
    max_size=30,
)


@settings(max_examples=200, deadline=None)
@given(token_st, st.integers(1, 3))
def test_ngram_counts_match_brute_force(stream, n):
    got = {p.surface: c for p, c in extract_ngrams(stream, n).items()}
    assert got == brute_force_ngrams(stream, n)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from(["中国", "人权", "abc", "Vimeo", "自由"]), max_size=20))
def test_bigram_total_per_sentence(words):
    stream = [Token.of(w) for w in words]
    assert sum(extract_ngrams(stream, 2).values()) == max(0, len(words) - 1)
