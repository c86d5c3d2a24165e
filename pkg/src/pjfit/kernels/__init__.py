"""Recurrence kernels: compiled extension when available, numpy fallback.

The backend is chosen at import time; set ``PJFIT_KERNELS=numpy`` (or
``cython``) to force one, or call :func:`use_backend` from code.
"""

import os

from . import gru_numpy

_BACKENDS = {"numpy": gru_numpy}
try:
    from . import _gru as _cython_impl

    _BACKENDS["cython"] = _cython_impl
except ImportError:
    _cython_impl = None


def _initial_backend():
    forced = os.environ.get("PJFIT_KERNELS", "auto").lower()
    if forced in _BACKENDS:
        return forced
    if forced not in ("", "auto"):
        raise ValueError(f"PJFIT_KERNELS must be one of auto/{'/'.join(sorted(_BACKENDS))}")
    return "cython" if "cython" in _BACKENDS else "numpy"


_active_name = _initial_backend()
_active = _BACKENDS[_active_name]


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return _active_name


def get_backend(name):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown kernel backend {name!r}; have {available_backends()}") from None


def use_backend(name):
    """Switch the active kernel backend (mainly for tests and benchmarks)."""
    global _active, _active_name
    _active = get_backend(name)
    _active_name = name


def gru_sequence_forward(xw, Wh, lengths, reverse):
    return _active.gru_sequence_forward(xw, Wh, lengths, reverse)


def gru_sequence_backward(Wh, lengths, reverse, cache, g_out):
    return _active.gru_sequence_backward(Wh, lengths, reverse, cache, g_out)
