# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled text kernels; output must match ``_pykernels`` exactly."""
import unicodedata

cdef enum:
    C_HAN = 0
    C_WORD = 1
    C_SEP = 2
    C_BOUND = 3

HAN = 0
LATIN = 1
OTHER = 2

cdef int _ascii_class[128]


cdef inline bint _is_han(Py_UCS4 cp):
    return ((0x4E00 <= cp <= 0x9FFF) or (0x3400 <= cp <= 0x4DBF)
            or (0x20000 <= cp <= 0x2A6DF) or (0x2A700 <= cp <= 0x2EBEF)
            or (0x2EBF0 <= cp <= 0x2EE5F) or (0x30000 <= cp <= 0x323AF))


cdef int _slow_class(Py_UCS4 ch):
    cdef str major
    if _is_han(ch):
        return C_HAN
    if ch == u'\n' or ch == u'\r' or ch == 0x85 or ch == 0x2028 or ch == 0x2029:
        return C_BOUND
    if ch.isspace():
        return C_SEP
    major = unicodedata.category(ch)[0]
    if major == u'P' or major == u'S':
        return C_BOUND
    if major == u'C' or major == u'Z':
        return C_SEP
    return C_WORD


cdef inline int _class(Py_UCS4 ch):
    if ch < 128:
        return _ascii_class[ch]
    return _slow_class(ch)


cdef int _i
for _i in range(128):
    _ascii_class[_i] = _slow_class(<Py_UCS4>_i)


def char_class(str ch):
    return _class(ch[0])


cdef list _fmm(str run, object words, Py_ssize_t max_len):
    cdef list out = []
    cdef Py_ssize_t i = 0, n = len(run), step, size, longest
    while i < n:
        step = 1
        longest = max_len if max_len < n - i else n - i
        size = longest
        while size > 1:
            if run[i:i + size] in words:
                step = size
                break
            size -= 1
        out.append(run[i:i + step])
        i += step
    return out


def fmm(str run, words, Py_ssize_t max_len):
    """Forward maximum matching over a run of Han characters."""
    return _fmm(run, words, max_len)


def scan(str text, words, Py_ssize_t max_len):
    cdef list out = []
    cdef Py_ssize_t n = len(text), i = 0, j
    cdef int cls
    cdef str word, piece
    while i < n:
        cls = _class(text[i])
        if cls == C_SEP:
            i += 1
            continue
        if cls == C_BOUND:
            if out and out[len(out) - 1] is not None:
                out.append(None)
            i += 1
            continue
        j = i + 1
        while j < n and _class(text[j]) == cls:
            j += 1
        if cls == C_HAN:
            for piece in _fmm(text[i:j], words, max_len):
                out.append((HAN, piece))
        else:
            word = text[i:j]
            out.append((LATIN if (word.isascii() and word.isalnum()) else OTHER, word))
        i = j
    if out and out[len(out) - 1] is None:
        out.pop()
    return out


def count_ngrams(list texts, Py_ssize_t n):
    cdef dict counts = {}
    cdef Py_ssize_t i, start = 0, total = len(texts)
    cdef object key
    for i in range(total):
        if texts[i] is None:
            start = i + 1
            continue
        if i - start + 1 >= n:
            key = tuple(texts[i - n + 1:i + 1])
            counts[key] = counts.get(key, 0) + 1
    return counts
