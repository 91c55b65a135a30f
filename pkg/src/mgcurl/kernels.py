"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``MGCURL_PURE_PYTHON`` is set, the numpy fallback is
used. :func:`set_backend` switches at runtime, which the benchmark uses to
time both.
"""
from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np
import scipy.sparse as sp

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

__all__ = ["BACKEND", "available_backends", "current_backend", "set_backend", "use_backend",
           "accumulate_blocks", "residual"]

_BACKENDS = {"python": _fallback}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled

if _compiled is not None and not os.environ.get("MGCURL_PURE_PYTHON"):
    BACKEND = "compiled"
else:
    BACKEND = "python"
_impl = _BACKENDS[BACKEND]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def current_backend() -> str:
    return BACKEND


def set_backend(name: str) -> None:
    global BACKEND, _impl
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    BACKEND, _impl = name, _BACKENDS[name]


@contextmanager
def use_backend(name: str):
    previous = BACKEND
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def accumulate_blocks(
    out: np.ndarray, r: np.ndarray, idx: np.ndarray, ops: np.ndarray, group_ptr: np.ndarray
) -> None:
    """Add ``ops[g] @ r[idx[b]]`` into ``out[idx[b]]`` for every block ``b``.

    Rows ``group_ptr[g]:group_ptr[g + 1]`` of ``idx`` share operator ``g``.
    """
    _impl.accumulate_blocks(out, r, idx, ops, group_ptr)


def residual(A: sp.csr_matrix, g: np.ndarray, z: np.ndarray) -> np.ndarray:
    """``g - A z``."""
    out = np.empty_like(g)
    if BACKEND == "python" or A.indices.dtype != np.int32:
        np.subtract(g, A @ z, out=out)
    else:
        _impl.csr_residual(out, g, A.indptr, A.indices, A.data, z)
    return out
