"""Stepping-kernel selection: compiled extension when available, numpy otherwise.

Set HEATCHAIN_BACKEND=numpy (or =cython) to force a choice; forcing cython
without a built extension raises at import of the simulator.
"""

from __future__ import annotations

import os

from . import _sim_numpy

try:
    from . import _kernels
    HAVE_EXTENSION = True
except ImportError:
    _kernels = None
    HAVE_EXTENSION = False


def active_backend() -> str:
    forced = os.environ.get("HEATCHAIN_BACKEND", "").strip().lower()
    if forced == "numpy":
        return "numpy"
    if forced == "cython":
        if not HAVE_EXTENSION:
            raise RuntimeError("HEATCHAIN_BACKEND=cython but the extension is not built")
        return "cython"
    return "cython" if HAVE_EXTENSION else "numpy"


def advance_chunk_fn(backend: str | None = None):
    name = backend or active_backend()
    if name == "cython":
        if not HAVE_EXTENSION:
            raise RuntimeError("compiled kernel requested but not available")
        return _kernels.advance_chunk
    return _sim_numpy.advance_chunk
