"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``FGGC_BACKEND=python``
to force the numpy fallback.  ``BACKEND`` names the active one.
"""

from __future__ import annotations

import os

from . import _kernels_py


def _load(name: str | None = None):
    choice = (name or os.environ.get("FGGC_BACKEND", "auto")).lower()
    if choice not in ("auto", "cython", "python"):
        raise ValueError(f"unknown backend {choice!r}")
    if choice != "python":
        try:
            from . import _kernels as mod

            return "cython", mod
        except ImportError:
            if choice == "cython":
                raise
    return "python", _kernels_py


def get_backend(name: str | None = None):
    """Return ``(name, module)`` for the requested or default backend."""
    return _load(name)


BACKEND, _impl = _load()

FREE, HARMONIC, COSINE, GAUSSIAN_WELL = 0, 1, 2, 3

rk4_flow = _impl.rk4_flow
gauss_sum = _impl.gauss_sum
tile_blocks = _impl.tile_blocks
fold_blocks = _impl.fold_blocks
