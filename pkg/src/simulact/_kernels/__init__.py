"""Hot inner loops for the quality metrics.

The compiled ``_ckernels`` module is used when it was built; otherwise the
pure-Python ``_pykernels`` twin is loaded. Set ``SIMULACT_PURE_PYTHON=1`` to
force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("SIMULACT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

edit_distance = _impl.edit_distance
ngram_stats = _impl.ngram_stats
shift_candidates = _impl.shift_candidates
apply_shift = _pykernels.apply_shift

__all__ = ["BACKEND", "edit_distance", "ngram_stats", "shift_candidates", "apply_shift"]
