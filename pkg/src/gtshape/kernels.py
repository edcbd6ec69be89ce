"""Selects the compiled embedding kernel when available.

Set ``GTSHAPE_PURE=1`` to force the pure-Python fallback.
"""
from __future__ import annotations

import os

from . import _embed_py

try:
    if os.environ.get("GTSHAPE_PURE"):
        raise ImportError("pure mode requested")
    from . import _embed_ext
except ImportError:
    _embed_ext = None

BACKEND = "cython" if _embed_ext is not None else "python"

search_embedding = (_embed_ext or _embed_py).search_embedding


def use(backend: str) -> None:
    """Switch backend at runtime (``"cython"`` or ``"python"``)."""
    global search_embedding, BACKEND
    if backend == "cython":
        if _embed_ext is None:
            raise RuntimeError("compiled kernel is not built")
        search_embedding = _embed_ext.search_embedding
    elif backend == "python":
        search_embedding = _embed_py.search_embedding
    else:
        raise ValueError(backend)
    BACKEND = backend
