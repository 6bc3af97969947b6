"""Kernel backend selection.

The hot operators (clipping IoU, rotated NMS, the raster oracle, and
rotated RoI align) exist twice: a compiled extension (_native, Cython)
and a pure Python / numpy twin (_fallback) with identical signatures and
semantics. The compiled backend is selected at import time when present.

Environment:
  ROTBOX_KERNELS  force a backend: "native" or "python" ("auto" default).
  ROTBOX_THREADS  optional positive integer capping internal parallelism.
                  Current kernels run single-threaded, so any cap >= 1 is
                  honored as-is.
"""

from __future__ import annotations

import os

BACKENDS = ("native", "python")


def _load(name: str):
    if name == "native":
        from . import _native
        return _native
    if name == "python":
        from . import _fallback
        return _fallback
    raise ValueError(f"unknown kernel backend {name!r}; expected one of {BACKENDS}")


_forced = os.environ.get("ROTBOX_KERNELS", "").strip().lower()
if _forced in ("", "auto"):
    try:
        impl = _load("native")
        BACKEND = "native"
    except ImportError:
        impl = _load("python")
        BACKEND = "python"
elif _forced in ("native", "compiled", "cython"):
    impl = _load("native")
    BACKEND = "native"
elif _forced in ("python", "pure", "fallback"):
    impl = _load("python")
    BACKEND = "python"
else:
    raise RuntimeError(
        f"ROTBOX_KERNELS={_forced!r} not understood; use 'native', 'python' or 'auto'")


def get_impl(name: str):
    """Load a specific backend module (for benchmarks and tests)."""
    return _load(name)


def available_backends() -> list[str]:
    out = []
    for name in BACKENDS:
        try:
            _load(name)
        except ImportError:
            continue
        out.append(name)
    return out


def max_threads() -> int:
    """Worker cap from ROTBOX_THREADS; 1 when unset."""
    raw = os.environ.get("ROTBOX_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"ROTBOX_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"ROTBOX_THREADS must be >= 1, got {n}")
    return n
