"""Kernel selection: compiled extension if built, pure Python otherwise."""
from . import fallback

try:
    from . import _fhcore as _impl
    HAVE_COMPILED = True
except ImportError:
    _impl = fallback
    HAVE_COMPILED = False

segment_sorted_edges = _impl.segment_sorted_edges
