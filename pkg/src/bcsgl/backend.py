"""Numba/numpy backend selection for the hot elementwise kernels.

The environment variable ``BCSGL_BACKEND`` picks the implementation:
``numba`` (default when importable) or ``numpy``. Anything the dispatcher
returns is a module exposing the same kernel signatures, so callers never
branch themselves.
"""

import os
import warnings

_BACKEND = None
_NAME = None


def _resolve():
    global _BACKEND, _NAME
    if _BACKEND is not None:
        return
    want = os.environ.get("BCSGL_BACKEND", "numba").strip().lower()
    if want not in ("numba", "numpy"):
        raise ValueError(f"BCSGL_BACKEND must be 'numba' or 'numpy', got {want!r}")
    if want == "numba":
        try:
            from . import _kernels_numba as mod
            _BACKEND, _NAME = mod, "numba"
            return
        except ImportError as exc:  # pragma: no cover - depends on install
            warnings.warn(f"numba backend unavailable ({exc}); falling back to numpy")
    from . import _kernels_numpy as mod
    _BACKEND, _NAME = mod, "numpy"


def get_kernels():
    _resolve()
    return _BACKEND


def active_backend() -> str:
    _resolve()
    return _NAME
