import os
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censorscout import _pykernels, kernels

try:
    from censorscout import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled kernels not built")

WORDS = frozenset({"自由", "亚洲", "电台", "自由亚洲", "特首", "人权", "中国共产党", "共产党"})

mixed_text = st.text(
    alphabet=st.sampled_from(list("自由亚洲电台特首人权中国共产党 abcXYZ019.,;!?。！？；，\n\téü-'") + [" ", "　"]),
    max_size=60,
)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@needs_ext
def test_compiled_backend_is_default():
    assert kernels.BACKEND == "cython"


def test_pure_python_forced_by_env():
    env = dict(os.environ, CENSORSCOUT_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from censorscout import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_ext
@settings(max_examples=300, deadline=None)
@given(mixed_text)
def test_scan_parity(text):
    assert _ckernels.scan(text, WORDS, 5) == _pykernels.scan(text, WORDS, 5)


@needs_ext
@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(st.none(), st.sampled_from(["a", "b", "c", "中", "文"])), max_size=40), st.integers(1, 3))
def test_count_ngrams_parity(texts, n):
    assert _ckernels.count_ngrams(texts, n) == _pykernels.count_ngrams(texts, n)


@needs_ext
@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.characters(min_codepoint=0, max_codepoint=0x2FFFF, exclude_categories=("Cs",)), max_size=20))
def test_char_class_parity_over_unicode(text):
    for ch in text:
        assert _ckernels.char_class(ch) == _pykernels.char_class(ch)


def test_fmm_greedy_longest(kernel_impl):
    assert kernel_impl.fmm("自由亚洲电台", WORDS, 5) == ["自由亚洲", "电台"]
    assert kernel_impl.fmm("特首", frozenset(), 0) == ["特", "首"]


def test_scan_collapses_boundaries(kernel_impl):
    out = kernel_impl.scan("。。a!!b。", frozenset(), 0)
    assert out == [(1, "a"), None, (1, "b")]
