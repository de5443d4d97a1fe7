"""Selection of the pair-loop implementation and the global thread knob.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``FRACDENSITY_BACKEND=python`` is set) the numpy
fallback is used.  Both give thread-count independent results.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_requested = os.environ.get("FRACDENSITY_BACKEND", "").strip().lower()
if _requested and _requested not in ("python", "compiled"):
    raise ImportError(f"unknown FRACDENSITY_BACKEND {_requested!r}")
if _requested == "compiled" and _ckernels is None:
    raise ImportError("FRACDENSITY_BACKEND=compiled but the extension is not built")

_state = {
    "name": _requested or ("compiled" if _ckernels is not None else "python"),
    "threads": max(1, int(os.environ.get("FRACDENSITY_THREADS", "1"))),
}


def available():
    return sorted(_BACKENDS)


def name():
    return _state["name"]


def ops(backend=None):
    return _BACKENDS[backend or _state["name"]]


def use(backend):
    if backend not in _BACKENDS:
        raise ValueError(f"backend {backend!r} not available (have {available()})")
    _state["name"] = backend


def set_num_threads(n):
    if int(n) < 1:
        raise ValueError("thread count must be >= 1")
    _state["threads"] = int(n)


def get_num_threads():
    return _state["threads"]
