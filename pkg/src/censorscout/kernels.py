"""Backend selection for the segmentation and n-gram kernels.

The compiled extension is used when it was built; otherwise the pure-Python
implementation is loaded. Set ``CENSORSCOUT_PURE_PYTHON=1`` to force the
fallback.
"""
import os

from . import _pykernels

if os.environ.get("CENSORSCOUT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

HAN = _pykernels.HAN
LATIN = _pykernels.LATIN
OTHER = _pykernels.OTHER

scan = _impl.scan
fmm = _impl.fmm
count_ngrams = _impl.count_ngrams
is_han = _pykernels.is_han

__all__ = ["BACKEND", "HAN", "LATIN", "OTHER", "scan", "fmm", "count_ngrams", "is_han"]
