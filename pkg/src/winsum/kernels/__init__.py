"""LSTM sequence kernels with a compiled fast path.

The Cython extension is preferred when it imported cleanly; the numpy
reference otherwise. WINSUM_PURE_PYTHON=1 forces the reference backend, and
`use_backend` switches at runtime (handy for tests and benchmarks). Both
backends implement the same contract; results agree to float rounding.
"""

from __future__ import annotations

import os
from contextlib import contextmanager

import numpy as np

from . import reference

_BACKENDS = {"python": reference}
try:
    from . import _core

    _BACKENDS["cython"] = _core
except ImportError:
    pass

if os.environ.get("WINSUM_PURE_PYTHON"):
    _active_name = "python"
else:
    _active_name = "cython" if "cython" in _BACKENDS else "python"


def backend_name() -> str:
    return _active_name


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def use_backend(name: str) -> None:
    global _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}")
    _active_name = name


@contextmanager
def forced_backend(name: str):
    previous = _active_name
    use_backend(name)
    try:
        yield
    finally:
        use_backend(previous)


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def lstm_seq_forward(xw, u, b, h0, c0):
    return _BACKENDS[_active_name].lstm_seq_forward(_c(xw), _c(u), _c(b), _c(h0), _c(c0))


def lstm_seq_backward(u, gates, cs, h0, c0, dh_out, dc_last):
    return _BACKENDS[_active_name].lstm_seq_backward(
        _c(u), _c(gates), _c(cs), _c(h0), _c(c0), _c(dh_out), _c(dc_last)
    )
