"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the numpy
implementation in ``_pykernels`` takes over. ``CMF_BACKEND`` (``native`` /
``python``) forces a choice and ``CMF_THREADS`` caps worker threads.
"""

from __future__ import annotations

import contextlib
import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

try:
    from . import _native
except ImportError as exc:  # pragma: no cover - depends on the build
    _native = None
    log.debug("native kernels unavailable: %s", exc)

_state = {"name": None, "threads": None}


def native_available() -> bool:
    return _native is not None


def _default_name() -> str:
    requested = os.environ.get("CMF_BACKEND", "auto").strip().lower()
    if requested == "python":
        return "python"
    if requested == "native":
        if _native is None:
            raise RuntimeError("CMF_BACKEND=native but the compiled extension is not built")
        return "native"
    return "native" if _native is not None else "python"


def backend_name() -> str:
    if _state["name"] is None:
        _state["name"] = _default_name()
    return _state["name"]


def set_backend(name: str) -> None:
    if name not in ("native", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "native" and _native is None:
        raise RuntimeError("compiled extension is not built")
    _state["name"] = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = backend_name()
    set_backend(name)
    try:
        yield
    finally:
        _state["name"] = previous


def kernels():
    return _native if backend_name() == "native" else _pykernels


def threads() -> int:
    if _state["threads"] is None:
        env = os.environ.get("CMF_THREADS")
        _state["threads"] = int(env) if env else (os.cpu_count() or 1)
    return _state["threads"]


def set_threads(n: int | None) -> None:
    if n is not None and n < 1:
        raise ValueError("thread count must be >= 1")
    _state["threads"] = n
