"""Pure-Python text kernels.

These are the reference implementations; ``_ckernels.pyx`` mirrors them
line for line and must produce identical output.
"""
import unicodedata

HAN = 0
LATIN = 1
OTHER = 2

# character classes used by the scanner
_C_HAN = 0
_C_WORD = 1
_C_SEP = 2
_C_BOUND = 3

_HAN_RANGES = (
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0x20000, 0x2A6DF),
    (0x2A700, 0x2EBEF),
    (0x2EBF0, 0x2EE5F),
    (0x30000, 0x323AF),
)

_NEWLINES = frozenset("\n\r\x85\u2028\u2029")


def is_han(cp: int) -> bool:
    for lo, hi in _HAN_RANGES:
        if lo <= cp <= hi:
            return True
    return False


def char_class(ch: str) -> int:
    if is_han(ord(ch)):
        return _C_HAN
    if ch in _NEWLINES:
        return _C_BOUND
    if ch.isspace():
        return _C_SEP
    major = unicodedata.category(ch)[0]
    if major == "P" or major == "S":
        return _C_BOUND
    if major == "C" or major == "Z":
        return _C_SEP
    return _C_WORD


_ASCII_CLASS = tuple(char_class(chr(i)) for i in range(128))


def _word_script(word: str) -> int:
    if word.isascii() and word.isalnum():
        return LATIN
    return OTHER


def fmm(run: str, words, max_len: int) -> list:
    """Forward maximum matching over a run of Han characters."""
    out = []
    i = 0
    n = len(run)
    while i < n:
        step = 1
        longest = min(max_len, n - i)
        for size in range(longest, 1, -1):
            if run[i:i + size] in words:
                step = size
                break
        out.append(run[i:i + step])
        i += step
    return out


def scan(text: str, words, max_len: int) -> list:
    """Split text into ``(script, token)`` pairs and ``None`` boundary markers.

    Consecutive boundaries collapse into one and the output never starts
    or ends with a boundary.
    """
    out = []
    n = len(text)
    i = 0
    while i < n:
        ch = text[i]
        cp = ord(ch)
        cls = _ASCII_CLASS[cp] if cp < 128 else char_class(ch)
        if cls == _C_SEP:
            i += 1
            continue
        if cls == _C_BOUND:
            if out and out[-1] is not None:
                out.append(None)
            i += 1
            continue
        j = i + 1
        while j < n:
            cj = ord(text[j])
            c2 = _ASCII_CLASS[cj] if cj < 128 else char_class(text[j])
            if c2 != cls:
                break
            j += 1
        if cls == _C_HAN:
            for piece in fmm(text[i:j], words, max_len):
                out.append((HAN, piece))
        else:
            word = text[i:j]
            out.append((_word_script(word), word))
        i = j
    if out and out[-1] is None:
        out.pop()
    return out


def count_ngrams(texts: list, n: int) -> dict:
    """Count contiguous n-token windows; ``None`` entries break windows."""
    counts = {}
    start = 0  # index of first token in the current unbroken span
    for i, item in enumerate(texts):
        if item is None:
            start = i + 1
            continue
        if i - start + 1 >= n:
            key = tuple(texts[i - n + 1:i + 1])
            counts[key] = counts.get(key, 0) + 1
    return counts
